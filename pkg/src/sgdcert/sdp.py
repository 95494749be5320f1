"""Reference solver for small block-diagonal semidefinite programs.

Standard-form conic program

    minimize    <c, x>
    subject to  A x = b,   x in K = R^l_+ x S^{n_1}_+ x ... x S^{n_k}_+

solved by a primal-dual path-following method with Nesterov-Todd scaling on a
homogeneous self-dual embedding.  All linear algebra is dense: the target
problems have dozens of constraints and PSD blocks of size at most a few,
where robust infeasibility detection matters far more than scale.  KKT
systems are solved through a Bunch-Kaufman factorization of the symmetric
indefinite augmented matrix with two passes of iterative refinement.

Symmetric matrices travel in scaled vec ("svec") coordinates: the upper
triangle column by column, off-diagonal entries multiplied by sqrt(2), so
that inner products of matrices become dot products of vectors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import Infeasible, SolverFailure

SQRT2 = math.sqrt(2.0)


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def svec_pairs(n: int) -> list[tuple[int, int]]:
    """(row, col) pairs in svec order: upper triangle, column major."""
    return [(i, j) for j in range(n) for i in range(j + 1)]


def svec(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    out = np.empty(svec_dim(n))
    k = 0
    for j in range(n):
        for i in range(j + 1):
            out[k] = M[i, j] if i == j else SQRT2 * M[i, j]
            k += 1
    return out


def smat(v: np.ndarray, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    k = 0
    for j in range(n):
        for i in range(j + 1):
            if i == j:
                M[i, j] = v[k]
            else:
                M[i, j] = M[j, i] = v[k] / SQRT2
            k += 1
    return M


@dataclass(frozen=True)
class Cone:
    """l nonnegative scalars followed by dense PSD blocks of the given sizes."""

    n_lin: int
    psd_dims: tuple[int, ...]

    @property
    def vec_dim(self) -> int:
        return self.n_lin + sum(svec_dim(n) for n in self.psd_dims)

    @property
    def degree(self) -> int:
        return self.n_lin + sum(self.psd_dims)

    def slices(self) -> list[slice]:
        """svec coordinate slice per PSD block."""
        out = []
        offset = self.n_lin
        for n in self.psd_dims:
            out.append(slice(offset, offset + svec_dim(n)))
            offset += svec_dim(n)
        return out


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITER = "MaxIter"
    NUMERICAL_TROUBLE = "NumericalTrouble"


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    step_factor: float = 0.99
    min_step: float = 1e-14
    refinement_passes: int = 2
    static_reg: float = 1e-12
    # wide-neighborhood safeguard: keep every eigenvalue product of the new
    # iterate above neighborhood * mu, which bounds the scaling condition
    # number along the whole path
    neighborhood: float = 1e-4


@dataclass
class SolveOutcome:
    status: SolveStatus
    primal_objective: float
    dual_objective: float
    gap: float
    iterations: int
    primal_residual: float
    dual_residual: float

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass
class ConeSolution:
    outcome: SolveOutcome
    x: np.ndarray            # primal cone point (scaled by 1/tau already)
    y: np.ndarray            # equality multipliers
    s: np.ndarray            # dual slack
    tau: float
    kappa: float


class _KktSolver:
    """Bunch-Kaufman factorization of [[H, A'], [A, 0]] with refinement."""

    def __init__(self, H: np.ndarray, A: np.ndarray, opts: SolverOptions):
        n = H.shape[0]
        m = A.shape[0]
        K = np.zeros((n + m, n + m))
        K[:n, :n] = H
        if m:
            K[:n, n:] = A.T
            K[n:, :n] = A
        # extended-precision copy for refinement residuals: plain float64
        # refinement stalls at cond(K) * eps, which is not enough near the
        # central-path boundary
        self.K_ext = K.astype(np.longdouble)
        reg = opts.static_reg * max(1.0, float(np.abs(K).max()))
        K[np.arange(n), np.arange(n)] += reg
        K[np.arange(n, n + m), np.arange(n, n + m)] -= reg
        self.n, self.m = n, m
        self.passes = opts.refinement_passes
        ldu, ipiv, info = lapack.dsytrf(K, lower=0)
        if info != 0:
            raise SolverFailure(f"KKT factorization failed (info={info})")
        self._ldu, self._ipiv = ldu, ipiv

    def solve(self, rx: np.ndarray, ry: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rhs = np.concatenate([rx, ry]) if self.m else rx.copy()
        sol, info = lapack.dsytrs(self._ldu, self._ipiv, rhs, lower=0)
        if info != 0:
            raise SolverFailure(f"KKT solve failed (info={info})")
        rhs_ext = rhs.astype(np.longdouble)
        sol_ext = sol.astype(np.longdouble)
        best_sol, best_norm = sol_ext, math.inf
        for _ in range(self.passes):
            resid = rhs_ext - self.K_ext @ sol_ext
            norm = float(np.linalg.norm(resid.astype(float)))
            if norm < best_norm:
                best_sol, best_norm = sol_ext.copy(), norm
            corr, info = lapack.dsytrs(self._ldu, self._ipiv,
                                       resid.astype(float), lower=0)
            if info != 0:
                break
            sol_ext = sol_ext + corr.astype(np.longdouble)
        resid = rhs_ext - self.K_ext @ sol_ext
        if float(np.linalg.norm(resid.astype(float))) > best_norm:
            sol_ext = best_sol
        sol = sol_ext.astype(float)
        return sol[:self.n], sol[self.n:]


class _Scaling:
    """Nesterov-Todd scaling point for the current (x, s)."""

    def __init__(self, cone: Cone, x: np.ndarray, s: np.ndarray):
        self.cone = cone
        l = cone.n_lin
        self.w_lin = np.sqrt(x[:l] / s[:l]) if l else np.empty(0)
        self.lam_lin = np.sqrt(x[:l] * s[:l]) if l else np.empty(0)
        self.R = []
        self.Rti = []          # R^{-T}
        self.lam = []          # singular values, the scaled point eigenvalues
        for sl, n in zip(cone.slices(), cone.psd_dims):
            X = smat(x[sl], n)
            S = smat(s[sl], n)
            Lx = np.linalg.cholesky(X)
            Ls = np.linalg.cholesky(S)
            U, sv, Vt = np.linalg.svd(Ls.T @ Lx)
            inv_sqrt = 1.0 / np.sqrt(sv)
            self.R.append(Lx @ Vt.T * inv_sqrt)
            self.Rti.append(Ls @ U * inv_sqrt)
            self.lam.append(sv)

    def h_matrix(self) -> np.ndarray:
        """Dense matrix of H = W^{-1} W^{-T} in svec coordinates."""
        cone = self.cone
        H = np.zeros((cone.vec_dim, cone.vec_dim))
        l = cone.n_lin
        if l:
            H[np.arange(l), np.arange(l)] = 1.0 / self.w_lin ** 2
        for blk, (sl, n) in enumerate(zip(cone.slices(), cone.psd_dims)):
            Tinv = self.Rti[blk] @ self.Rti[blk].T
            pairs = svec_pairs(n)
            dim = svec_dim(n)
            Hb = np.empty((dim, dim))
            for col, (i, j) in enumerate(pairs):
                ti = Tinv[:, i]
                tj = Tinv[:, j]
                if i == j:
                    C = np.outer(ti, tj)
                else:
                    C = (np.outer(ti, tj) + np.outer(tj, ti)) / SQRT2
                Hb[:, col] = svec((C + C.T) / 2.0)
            H[sl, sl] = (Hb + Hb.T) / 2.0
        return H

    def scale_x(self, dx: np.ndarray) -> list:
        """W^{-T} dx per block (lin part returned as vector)."""
        out = [dx[:self.cone.n_lin] / np.where(self.w_lin == 0, 1, self.w_lin)
               if self.cone.n_lin else np.empty(0)]
        for blk, (sl, n) in enumerate(zip(self.cone.slices(), self.cone.psd_dims)):
            Rinv = self.Rti[blk].T
            out.append(Rinv @ smat(dx[sl], n) @ Rinv.T)
        return out

    def scale_s(self, ds: np.ndarray) -> list:
        """W ds per block."""
        out = [ds[:self.cone.n_lin] * self.w_lin if self.cone.n_lin else np.empty(0)]
        for blk, (sl, n) in enumerate(zip(self.cone.slices(), self.cone.psd_dims)):
            R = self.R[blk]
            out.append(R.T @ smat(ds[sl], n) @ R)
        return out

    def unscale_jordan_inverse(self, d_lin: np.ndarray, d_blocks: list) -> np.ndarray:
        """W^{-1}(lambda o^{-1} d) back in svec coordinates."""
        cone = self.cone
        out = np.zeros(cone.vec_dim)
        if cone.n_lin:
            out[:cone.n_lin] = (d_lin / self.lam_lin) / self.w_lin
        for blk, (sl, n) in enumerate(zip(cone.slices(), cone.psd_dims)):
            lam = self.lam[blk]
            D = d_blocks[blk]
            V = 2.0 * D / np.add.outer(lam, lam)
            M = self.Rti[blk] @ V @ self.Rti[blk].T
            out[sl] = svec((M + M.T) / 2.0)
        return out


def _max_step(cone: Cone, scaling: _Scaling, d_scaled_lin: np.ndarray,
              d_scaled_blocks: list, lam_lin: np.ndarray, lam_blocks: list) -> float:
    """Largest alpha with lambda + alpha * d staying in the cone."""
    alpha = math.inf
    if cone.n_lin and d_scaled_lin.size:
        neg = d_scaled_lin < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-lam_lin[neg] / d_scaled_lin[neg])))
    for blk, n in enumerate(cone.psd_dims):
        lam = lam_blocks[blk]
        D = d_scaled_blocks[blk]
        inv_sqrt = 1.0 / np.sqrt(lam)
        M = (inv_sqrt[:, None] * D) * inv_sqrt[None, :]
        w = np.linalg.eigvalsh((M + M.T) / 2.0)
        if w[0] < 0:
            alpha = min(alpha, -1.0 / float(w[0]))
    return alpha


def _min_product(cone: Cone, x: np.ndarray, s: np.ndarray,
                 tau: float, kappa: float) -> float:
    """Smallest eigenvalue product of (x, s, tau, kappa); -inf outside the cone."""
    worst = tau * kappa
    if cone.n_lin:
        worst = min(worst, float(np.min(x[:cone.n_lin] * s[:cone.n_lin])))
    for sl, n in zip(cone.slices(), cone.psd_dims):
        X = smat(x[sl], n)
        S = smat(s[sl], n)
        try:
            Lx = np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            return -math.inf
        w = np.linalg.eigvalsh(Lx.T @ S @ Lx)
        if w[0] <= 0:
            return -math.inf
        worst = min(worst, float(w[0]))
    return worst


def _ruiz_equilibrate(A: np.ndarray, b: np.ndarray, c: np.ndarray, cone: Cone,
                      passes: int = 8):
    """Cone-compatible row/column inf-norm balancing.

    Column scalings must preserve the cone, so linear coordinates get
    individual factors while each PSD block gets one uniform factor.
    Returns (A', b', c', row_scale, col_scale) with A' = R A D, b' = R b,
    c' = D c; the solution maps back as x = D x', y = R y', s = D^{-1}... s
    is recovered through s' = D s.
    """
    m, n = A.shape
    row = np.ones(m)
    col = np.ones(n)
    As = A.copy()
    block_slices = cone.slices()
    for _ in range(passes):
        if m:
            r = np.sqrt(np.abs(As).max(axis=1))
            r[r == 0] = 1.0
            As /= r[:, None]
            row /= r
        cmax = np.abs(As).max(axis=0) if m else np.zeros(n)
        d = np.ones(n)
        d[:cone.n_lin] = np.sqrt(cmax[:cone.n_lin])
        for sl in block_slices:
            blockmax = cmax[sl].max() if m else 0.0
            d[sl] = math.sqrt(blockmax)
        d[d == 0] = 1.0
        As /= d[None, :]
        col /= d
    return As, b * row, c * col, row, col


def solve_cone_program(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                       cone: Cone, opts: SolverOptions | None = None,
                       equilibrate: bool = True) -> ConeSolution:
    """Homogeneous self-dual interior-point solve of the standard-form program.

    The embedding starts from the identity-scaled strictly feasible point
    (x = s = e, tau = kappa = 1) and classifies the limit: Optimal when the
    scaled residuals and the relative gap drop below tolerance, Infeasible /
    Unbounded from the Farkas-type certificates, NumericalTrouble when the
    step length collapses.
    """
    opts = opts or SolverOptions()
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m_eq, n_vec = (A.shape if A.size else (b.shape[0], cone.vec_dim))
    if m_eq != b.shape[0] or n_vec != cone.vec_dim or c.shape[0] != n_vec:
        raise ValueError("inconsistent program dimensions")

    # drop zero rows: 0 = b_i is vacuous, 0 = b_i != 0 is flatly infeasible
    if m_eq:
        row_norm = np.abs(A).max(axis=1) if A.size else np.zeros(m_eq)
        zero_rows = row_norm == 0.0
        if np.any(zero_rows):
            if np.any(np.abs(b[zero_rows]) > 0):
                outcome = SolveOutcome(SolveStatus.INFEASIBLE, math.nan, math.nan,
                                       math.nan, 0, math.inf, math.inf)
                return ConeSolution(outcome, np.zeros(n_vec), np.zeros(m_eq),
                                    np.zeros(n_vec), 0.0, 1.0)
            keep = ~zero_rows
            A, b = A[keep], b[keep]
            full_y = np.zeros(m_eq)
            inner = solve_cone_program(A, b, c, cone, opts, equilibrate)
            full_y[keep] = inner.y
            inner.y = full_y
            return inner

    if equilibrate and m_eq:
        As, bs, cs, row, colv = _ruiz_equilibrate(A, b, c, cone)
        inner = solve_cone_program(As, bs, cs, cone, opts, equilibrate=False)
        inner.x = inner.x * colv
        inner.y = inner.y * row
        inner.s = inner.s / colv
        # outcome objective/residual values were computed in scaled data;
        # recompute the reported numbers against the original data
        if inner.tau > 0 and not math.isnan(inner.outcome.primal_objective):
            xt, yt, st = inner.x, inner.y, inner.s
            pobj = float(c @ xt)
            dobj = float(b @ yt)
            inner.outcome.primal_objective = pobj
            inner.outcome.dual_objective = dobj
            inner.outcome.gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
            inner.outcome.primal_residual = float(
                np.linalg.norm(A @ xt - b)) / max(1.0, float(np.linalg.norm(b)))
            inner.outcome.dual_residual = float(
                np.linalg.norm(A.T @ yt + st - c)) / max(1.0, float(np.linalg.norm(c)))
        return inner

    # identity start
    x = np.zeros(n_vec)
    s = np.zeros(n_vec)
    if cone.n_lin:
        x[:cone.n_lin] = 1.0
        s[:cone.n_lin] = 1.0
    for sl, n in zip(cone.slices(), cone.psd_dims):
        eye = svec(np.eye(n))
        x[sl] = eye
        s[sl] = eye
    y = np.zeros(A.shape[0])
    tau, kappa = 1.0, 1.0
    nu = cone.degree + 1

    norm_b = max(1.0, float(np.linalg.norm(b)))
    norm_c = max(1.0, float(np.linalg.norm(c)))

    best = None
    status = SolveStatus.MAX_ITER
    iters = 0
    for iteration in range(opts.max_iter):
        iters = iteration
        r_p = A @ x - b * tau                    # primal residual
        r_d = -A.T @ y - s + c * tau             # dual residual
        r_g = b @ y - c @ x - kappa              # gap residual
        mu = (x @ s + tau * kappa) / nu

        # convergence bookkeeping at the de-homogenized point
        xt, yt, st = x / tau, y / tau, s / tau
        pres = float(np.linalg.norm(A @ xt - b)) / norm_b
        dres = float(np.linalg.norm(A.T @ yt + st - c)) / norm_c
        pobj = float(c @ xt)
        dobj = float(b @ yt)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        candidate = SolveOutcome(SolveStatus.OPTIMAL, pobj, dobj, relgap,
                                 iteration, pres, dres)
        if best is None or (relgap + pres + dres
                            < best.gap + best.primal_residual + best.dual_residual):
            best = candidate
            best_point = (xt.copy(), yt.copy(), st.copy(), tau, kappa)
        if pres <= opts.feas_tol and dres <= opts.feas_tol and relgap <= opts.gap_tol:
            status = SolveStatus.OPTIMAL
            break

        # infeasibility certificates of the homogeneous model
        by = float(b @ y)
        cx = float(c @ x)
        hd = float(np.linalg.norm(A.T @ y + s))
        hp = float(np.linalg.norm(A @ x))
        if by > 0 and hd <= opts.feas_tol * by * norm_c / norm_b:
            status = SolveStatus.INFEASIBLE
            best_point = (x.copy(), y / by, s / by, tau, kappa)
            best = SolveOutcome(status, math.nan, math.nan, math.nan,
                                iteration, pres, dres)
            break
        if cx < 0 and hp <= opts.feas_tol * (-cx) * norm_b / norm_c:
            status = SolveStatus.UNBOUNDED
            best_point = (x / (-cx), y.copy(), s.copy(), tau, kappa)
            best = SolveOutcome(status, math.nan, math.nan, math.nan,
                                iteration, pres, dres)
            break

        try:
            scaling = _Scaling(cone, x, s)
            H = scaling.h_matrix()
            kkt = _KktSolver(H, A, opts)
            u1, w1 = kkt.solve(-c, b)
            v1 = -w1
        except (np.linalg.LinAlgError, SolverFailure):
            status = SolveStatus.NUMERICAL_TROUBLE
            break

        lam_lin = scaling.lam_lin
        lam_blocks = scaling.lam

        def newton(sigma_mu: float, corr_lin, corr_blocks, corr_tk: float):
            # centrality targets in scaled space
            d_lin = (sigma_mu - lam_lin ** 2 - corr_lin) if cone.n_lin \
                else np.empty(0)
            d_blocks = []
            for blk, n in enumerate(cone.psd_dims):
                Db = sigma_mu * np.eye(n) - np.diag(lam_blocks[blk] ** 2)
                if corr_blocks is not None:
                    Db = Db - corr_blocks[blk]
                d_blocks.append(Db)
            d_tilde = scaling.unscale_jordan_inverse(d_lin, d_blocks)
            d_kappa = sigma_mu - tau * kappa - corr_tk
            u2, w2 = kkt.solve(-r_d + d_tilde, -r_p)
            v2 = -w2
            denom = float(c @ u1 - b @ v1 - kappa / tau)
            num = r_g - float(c @ u2) + float(b @ v2) - d_kappa / tau
            dtau = num / denom
            dx = u2 + dtau * u1
            dy = v2 + dtau * v1
            # ds from the dual equation so feasibility contracts exactly;
            # KKT solve error then only perturbs the centrality target
            ds = r_d - A.T @ dy + c * dtau
            dkappa = (d_kappa - kappa * dtau) / tau
            return dx, dy, ds, dtau, dkappa

        def boundary(dx, ds, dtau, dkappa):
            sx = scaling.scale_x(dx)
            ss = scaling.scale_s(ds)
            a = _max_step(cone, scaling, sx[0], sx[1:], lam_lin, lam_blocks)
            a = min(a, _max_step(cone, scaling, ss[0], ss[1:], lam_lin, lam_blocks))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a, sx, ss

        # predictor
        try:
            zeros_lin = np.zeros(cone.n_lin)
            dxa, dya, dsa, dtaua, dkappaa = newton(0.0, zeros_lin, None, 0.0)
        except SolverFailure:
            status = SolveStatus.NUMERICAL_TROUBLE
            break
        a_aff, sxa, ssa = boundary(dxa, dsa, dtaua, dkappaa)
        a_aff = min(1.0, opts.step_factor * a_aff)
        mu_aff = ((x + a_aff * dxa) @ (s + a_aff * dsa)
                  + (tau + a_aff * dtaua) * (kappa + a_aff * dkappaa)) / nu
        sigma = max(min((mu_aff / mu) ** 3, 1.0), 1e-12)

        # corrector with Mehrotra second-order terms in the scaled space
        corr_lin = sxa[0] * ssa[0] if cone.n_lin else np.empty(0)
        corr_blocks = []
        for blk in range(len(cone.psd_dims)):
            U, V = sxa[1 + blk], ssa[1 + blk]
            corr_blocks.append((U @ V + V @ U) / 2.0)
        try:
            dx, dy, ds, dtau, dkappa = newton(sigma * mu, corr_lin, corr_blocks,
                                              dtaua * dkappaa)
        except SolverFailure:
            status = SolveStatus.NUMERICAL_TROUBLE
            break
        a_max, _, _ = boundary(dx, ds, dtau, dkappa)
        alpha = min(1.0, opts.step_factor * a_max)
        # keep the new iterate inside the wide neighborhood of the central
        # path; off-center iterates make the scaling singular long before mu
        # reaches the tolerance
        accepted = False
        for _ in range(40):
            if alpha < opts.min_step:
                break
            xn = x + alpha * dx
            sn = s + alpha * ds
            tn = tau + alpha * dtau
            kn = kappa + alpha * dkappa
            mu_new = (xn @ sn + tn * kn) / nu
            if mu_new > 0 and _min_product(cone, xn, sn, tn, kn) \
                    >= opts.neighborhood * mu_new:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            status = SolveStatus.NUMERICAL_TROUBLE
            break
        x, s, tau, kappa = xn, sn, tn, kn
        y = y + alpha * dy

    xt, yt, st, tau_f, kappa_f = best_point
    outcome = SolveOutcome(status, best.primal_objective, best.dual_objective,
                           best.gap, iters + 1, best.primal_residual,
                           best.dual_residual)
    if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
        outcome.primal_objective = math.nan
        outcome.dual_objective = math.nan
    return ConeSolution(outcome, xt, yt, st, tau_f, kappa_f)


# ---------------------------------------------------------------------------
# Named-variable layer


@dataclass(frozen=True)
class VarRef:
    name: str
    kind: str                 # "scalar" | "psd"
    index: int                # offset in the packed cone vector
    dim: int = 1


class BlockSdp:
    """Block-diagonal SDP with named nonnegative scalars and PSD matrix blocks.

    Equalities are linear in all variables; matrix coefficients pair with PSD
    blocks through the trace inner product.  The objective is a linear
    functional with an explicit sense.
    """

    def __init__(self):
        self._scalars: list[str] = []
        self._psd: list[tuple[str, int]] = []
        self._by_name: dict[str, VarRef] = {}
        self._equalities: list[tuple[list[tuple[str, object]], float]] = []
        self._objective: list[tuple[str, object]] = []
        self._sense = "min"
        self._frozen_layout: Cone | None = None

    def add_scalar(self, name: str) -> VarRef:
        if name in self._by_name:
            raise ValueError(f"duplicate variable {name}")
        ref = VarRef(name, "scalar", len(self._scalars))
        self._scalars.append(name)
        self._by_name[name] = ref
        return ref

    def add_psd(self, name: str, n: int) -> VarRef:
        if name in self._by_name:
            raise ValueError(f"duplicate variable {name}")
        ref = VarRef(name, "psd", len(self._psd), dim=n)
        self._psd.append((name, n))
        self._by_name[name] = ref
        return ref

    def add_equality(self, terms: list[tuple[str, object]], rhs: float):
        """sum of coeff * scalar and <M, X> terms equals rhs."""
        self._equalities.append((list(terms), float(rhs)))

    def set_objective(self, terms: list[tuple[str, object]], sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self._objective = list(terms)
        self._sense = sense

    # --- packing ---

    def cone(self) -> Cone:
        return Cone(n_lin=len(self._scalars),
                    psd_dims=tuple(n for _, n in self._psd))

    def _offset(self, name: str) -> tuple[int, int]:
        """(vec offset, block dim or 0 for scalars)."""
        ref = self._by_name[name]
        if ref.kind == "scalar":
            return ref.index, 0
        offset = len(self._scalars)
        for psd_name, n in self._psd:
            if psd_name == name:
                return offset, n
            offset += svec_dim(n)
        raise KeyError(name)

    def _pack_terms(self, terms) -> np.ndarray:
        cone = self.cone()
        row = np.zeros(cone.vec_dim)
        for name, coeff in terms:
            if name not in self._by_name:
                raise KeyError(f"unknown variable {name}")
            offset, n = self._offset(name)
            if n == 0:
                row[offset] += float(coeff)
            else:
                M = np.asarray(coeff, dtype=float)
                if M.shape != (n, n):
                    raise ValueError(f"coefficient for {name} must be {n}x{n}")
                row[offset:offset + svec_dim(n)] += svec((M + M.T) / 2.0)
        return row

    def assemble(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, Cone, float]:
        """(A, b, c, cone, objective_sign): min sign*c'x in standard form."""
        cone = self.cone()
        A = np.zeros((len(self._equalities), cone.vec_dim))
        b = np.zeros(len(self._equalities))
        for k, (terms, rhs) in enumerate(self._equalities):
            A[k] = self._pack_terms(terms)
            b[k] = rhs
        c = self._pack_terms(self._objective)
        sign = 1.0 if self._sense == "min" else -1.0
        return A, b, sign * c, cone, sign


@dataclass
class SdpSolution:
    outcome: SolveOutcome
    _values: dict
    y: np.ndarray

    def scalar(self, name: str) -> float:
        return self._values[name]

    def block(self, name: str) -> np.ndarray:
        return self._values[name]


def solve(sdp: BlockSdp, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve a BlockSdp with the reference interior-point method."""
    A, b, c, cone, sign = sdp.assemble()
    sol = solve_cone_program(A, b, c, cone, opts)
    outcome = sol.outcome
    if not math.isnan(outcome.primal_objective):
        outcome.primal_objective *= sign
        outcome.dual_objective *= sign
        if sign < 0:
            outcome.primal_objective, outcome.dual_objective = \
                outcome.dual_objective, outcome.primal_objective
    values = {}
    for k, name in enumerate(sdp._scalars):
        values[name] = float(sol.x[k])
    offset = len(sdp._scalars)
    for name, n in sdp._psd:
        values[name] = smat(sol.x[offset:offset + svec_dim(n)], n)
        offset += svec_dim(n)
    return SdpSolution(outcome=outcome, _values=values, y=sol.y)
