"""Gram-lifted performance-estimation programs for the Lyapunov decrease.

One SGD step with parameters (a_t, a_{t+1}, e_t, rho) decreases the energy in
the worst case over all m-component L-smooth mu-strongly-convex data exactly
when a small dual SDP is feasible.  This module assembles those programs in
Gram coordinates, solves the joint optimization over all Lyapunov parameters
(best bias, or best variance at fixed bias), and converts dual solutions into
machine-readable decrease certificates.

Coordinate layout for m components: the Gram matrix G_t is the 2m x 2m Gram
of the columns (grad_1..grad_m at x_t, grad_1..grad_{m-1} at x*, x_t - x*);
the gradient of component m at x* is eliminated through the stationarity
constraint sum_i grad_i(x*) = 0.  Function values live in a 2m-vector
(values at x_t, then at x*).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateClass, Infeasible, NotFeasible, SolverFailure
from .problems import ProblemClass
from .sdp import (BlockSdp, SolveOutcome, SolveStatus, SolverOptions, smat,
                  solve, svec)

INSTABILITY_GAP = 1e-4
DUAL_RESIDUAL_TOL = 1e-8
PSD_EIG_TOL = 1e-9


def _sym(M: np.ndarray) -> np.ndarray:
    return (M + M.T) / 2.0


@dataclass(frozen=True)
class GramBasis:
    """Selector vectors identifying each algebraic object in Gram coordinates."""

    m: int
    p_grad_t: np.ndarray    # (m, 2m) rows: gradients at x_t
    p_grad_s: np.ndarray    # (m, 2m) rows: gradients at x*, row m-1 eliminated
    p_x: np.ndarray         # (2m,) x_t - x*
    f_t: np.ndarray         # (m, 2m) rows: value selectors at x_t
    f_s: np.ndarray         # (m, 2m) rows: value selectors at x*

    @property
    def dim(self) -> int:
        return 2 * self.m


def gram_basis(m: int) -> GramBasis:
    if m < 2:
        raise ValueError("need at least two components for a nontrivial program")
    dim = 2 * m
    eye = np.eye(dim)
    p_grad_t = eye[:m].copy()
    p_grad_s = np.zeros((m, dim))
    p_grad_s[:m - 1] = eye[m:2 * m - 1]
    p_grad_s[m - 1] = -eye[m:2 * m - 1].sum(axis=0)
    p_x = eye[dim - 1].copy()
    f_eye = np.eye(2 * m)
    return GramBasis(m=m, p_grad_t=p_grad_t, p_grad_s=p_grad_s, p_x=p_x,
                     f_t=f_eye[:m].copy(), f_s=f_eye[m:].copy())


@dataclass(frozen=True)
class InterpolationConstraint:
    """f_part . F + <matrix, G> <= 0 in Gram coordinates."""

    matrix: np.ndarray
    f_part: np.ndarray
    label: str


def build_interpolation_constraint(mu: float, L: float, basis: GramBasis,
                                   component: int, first: str
                                   ) -> InterpolationConstraint:
    """Smoothness/strong-convexity interpolation inequality for one component.

    ``first`` selects the ordering: "t" builds the (t,*) inequality whose
    function part is f_*(i) - f_t(i); "*" builds the (*,t) one.  Both share
    the quadratic core; only the linear gradient term and the function part
    flip.  mu = L is rejected: the denominator 1 - mu/L vanishes.
    """
    if not (0 <= mu < L):
        raise DegenerateClass(f"need 0 <= mu < L, got mu={mu}, L={L}")
    i = component
    d = basis.p_grad_t[i] - basis.p_grad_s[i]
    px = basis.p_x
    quad = (np.outer(d, d) / (2.0 * (L - mu))
            + (mu * L / (2.0 * (L - mu))) * np.outer(px, px)
            - (mu / (L - mu)) * np.outer(d, px))
    if first == "t":
        M = np.outer(basis.p_grad_s[i], px) + quad
        f_part = basis.f_s[i] - basis.f_t[i]
        label = f"interp(t,*,i={i + 1})"
    elif first == "*":
        M = -np.outer(basis.p_grad_t[i], px) + quad
        f_part = basis.f_t[i] - basis.f_s[i]
        label = f"interp(*,t,i={i + 1})"
    else:
        raise ValueError("first must be 't' or '*'")
    return InterpolationConstraint(matrix=_sym(M), f_part=f_part, label=label)


@dataclass(frozen=True)
class PepStepProgram:
    """One step's objective data Delta_t / Delta~ plus constraint matrices.

    Delta_t is stored through its linear decomposition in the step's scalars:
    Delta_t = a_next * D_next + a_curr * D_curr + e * D_var, which is what the
    joint SDP needs; the embedded scalar values reproduce the fixed-parameter
    program of a single feasibility check.
    """

    basis: GramBasis
    cls: ProblemClass
    a_curr: float
    a_next: float
    e: float
    rho: float
    D_next: np.ndarray
    D_curr: np.ndarray
    D_var: np.ndarray
    A_ts: tuple[InterpolationConstraint, ...]
    A_st: tuple[InterpolationConstraint, ...]

    @property
    def delta(self) -> np.ndarray:
        return _sym(self.a_next * self.D_next + self.a_curr * self.D_curr
                    + self.e * self.D_var)

    @property
    def delta_tilde(self) -> np.ndarray:
        m = self.basis.m
        return self.rho / m * (self.basis.f_t.sum(axis=0)
                               - self.basis.f_s.sum(axis=0))

    def energy_difference(self, G: np.ndarray, F: np.ndarray) -> float:
        """Conditional expected energy change at lifted data (G, F)."""
        return float(np.trace(self.delta @ G) + F @ self.delta_tilde)


def step_decomposition(basis: GramBasis, gamma: float
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(D_next, D_curr, D_var): coefficient matrices of a_{t+1}, a_t, e_t."""
    m = basis.m
    px = basis.p_x
    D_next = np.zeros((basis.dim, basis.dim))
    for i in range(m):
        v = px - gamma * basis.p_grad_t[i]
        D_next += np.outer(v, v)
    D_next = _sym(D_next / m)
    D_curr = -np.outer(px, px)
    D_var = np.zeros((basis.dim, basis.dim))
    for i in range(m):
        D_var -= np.outer(basis.p_grad_s[i], basis.p_grad_s[i])
    D_var = _sym(D_var / m)
    return D_next, D_curr, D_var


def build_step_program(cls: ProblemClass, a_curr: float, a_next: float,
                       e: float, rho: float) -> PepStepProgram:
    cls.require_step_in_0_2()
    basis = gram_basis(cls.m)
    D_next, D_curr, D_var = step_decomposition(basis, cls.gamma)
    A_ts = tuple(build_interpolation_constraint(cls.mu, cls.L, basis, i, "t")
                 for i in range(cls.m))
    A_st = tuple(build_interpolation_constraint(cls.mu, cls.L, basis, i, "*")
                 for i in range(cls.m))
    return PepStepProgram(basis=basis, cls=cls, a_curr=a_curr, a_next=a_next,
                          e=e, rho=rho, D_next=D_next, D_curr=D_curr,
                          D_var=D_var, A_ts=A_ts, A_st=A_st)


class BiasObjective(enum.Enum):
    MAXIMIZE_RHO = "MaximizeRho"
    MINIMIZE_A0 = "MinimizeA0"


class VarianceObjective(enum.Enum):
    MINIMIZE_AVG_E = "MinimizeAvgE"
    MINIMIZE_SUM_E = "MinimizeSumE"


@dataclass
class PepCertificate:
    """Dual multipliers and PSD blocks proving the Lyapunov decrease.

    lam_ts[t, i] weights the (t,*) interpolation inequality of component i at
    step t (the beta_t side of the closed-form proofs), lam_st the (*,t) one
    (the alpha_t side).  ``value`` is the achieved objective of the solve that
    produced the certificate (rho_opt, a0_opt, e_bar_opt or e_sum_opt).
    """

    objective: str
    value: float
    rho: float
    a: np.ndarray
    e: np.ndarray
    lam_ts: np.ndarray       # (T, m)
    lam_st: np.ndarray       # (T, m)
    Lambda: list
    gap: float
    status: SolveStatus
    instability: bool
    outcome: SolveOutcome

    def residuals(self, cls: ProblemClass) -> dict:
        """Re-validate dual feasibility by direct arithmetic."""
        basis = gram_basis(cls.m)
        D_next, D_curr, D_var = step_decomposition(basis, cls.gamma)
        A_ts = [build_interpolation_constraint(cls.mu, cls.L, basis, i, "t")
                for i in range(cls.m)]
        A_st = [build_interpolation_constraint(cls.mu, cls.L, basis, i, "*")
                for i in range(cls.m)]
        mat_res, fun_res, eig_min = 0.0, 0.0, math.inf
        for t in range(cls.T):
            M = _sym(self.a[t + 1] * D_next + self.a[t] * D_curr
                     + self.e[t] * D_var)
            target = -M
            fvec = -(self.rho / cls.m) * (basis.f_t.sum(axis=0)
                                          - basis.f_s.sum(axis=0))
            for i in range(cls.m):
                target = target + self.lam_ts[t, i] * A_ts[i].matrix \
                    + self.lam_st[t, i] * A_st[i].matrix
                fvec = fvec + self.lam_ts[t, i] * A_ts[i].f_part \
                    + self.lam_st[t, i] * A_st[i].f_part
            scale = max(1.0, float(np.abs(target).max()))
            mat_res = max(mat_res, float(np.abs(target - self.Lambda[t]).max()) / scale)
            fun_res = max(fun_res, float(np.abs(fvec).max()))
            w = np.linalg.eigvalsh(_sym(self.Lambda[t]))
            eig_min = min(eig_min, float(w[0]) / max(1.0, float(np.trace(self.Lambda[t]))))
        return {"matrix": mat_res, "function": fun_res, "eig_min": eig_min}

    def is_valid(self, cls: ProblemClass, tol: float = DUAL_RESIDUAL_TOL) -> bool:
        r = self.residuals(cls)
        return (r["matrix"] <= tol and r["function"] <= tol
                and r["eig_min"] >= -PSD_EIG_TOL)


def _joint_sdp(cls: ProblemClass, *, normalization: str,
               fix: dict | None = None) -> BlockSdp:
    """Assemble the joint program over (rho, a_t, e_t, lambda, Lambda_t).

    All per-step dual-feasibility conditions are linear in the decision
    variables, so the bilevel 'worst case <= 0 for every step' collapses into
    one block-diagonal SDP.  ``normalization`` pins a[0] or a[T] to 1 and
    ``fix`` adds extra pinning equalities (e.g. rho = rho_theory).
    """
    cls.require_step_in_0_2()
    m, T = cls.m, cls.T
    basis = gram_basis(m)
    D_next, D_curr, D_var = step_decomposition(basis, cls.gamma)
    A_ts = [build_interpolation_constraint(cls.mu, cls.L, basis, i, "t")
            for i in range(m)]
    A_st = [build_interpolation_constraint(cls.mu, cls.L, basis, i, "*")
            for i in range(m)]
    sdp = BlockSdp()
    sdp.add_scalar("rho")
    for t in range(T + 1):
        sdp.add_scalar(f"a[{t}]")
    for t in range(T):
        sdp.add_scalar(f"e[{t}]")
    for t in range(T):
        for i in range(m):
            sdp.add_scalar(f"lts[{t},{i}]")
            sdp.add_scalar(f"lst[{t},{i}]")
    for t in range(T):
        sdp.add_psd(f"Lam[{t}]", 2 * m)

    dim = 2 * m
    pairs = [(i, j) for j in range(dim) for i in range(j + 1)]
    for t in range(T):
        # matrix equality Lam_t + Delta_t - sum lambda A = 0, entrywise on the
        # upper triangle
        for (i, j) in pairs:
            E = np.zeros((dim, dim))
            E[i, j] = E[j, i] = 0.5 if i != j else 1.0
            terms = [(f"Lam[{t}]", E),
                     (f"a[{t + 1}]", float(D_next[i, j])),
                     (f"a[{t}]", float(D_curr[i, j])),
                     (f"e[{t}]", float(D_var[i, j]))]
            for comp in range(m):
                terms.append((f"lts[{t},{comp}]", -float(A_ts[comp].matrix[i, j])))
                terms.append((f"lst[{t},{comp}]", -float(A_st[comp].matrix[i, j])))
            sdp.add_equality(terms, 0.0)
        # function equalities: coefficient of f_t^(i) must vanish
        for comp in range(m):
            sdp.add_equality([("rho", -1.0 / m),
                              (f"lts[{t},{comp}]", -1.0),
                              (f"lst[{t},{comp}]", 1.0)], 0.0)
    if normalization == "a0":
        sdp.add_equality([("a[0]", 1.0)], 1.0)
    elif normalization == "aT":
        sdp.add_equality([(f"a[{T}]", 1.0)], 1.0)
    else:
        raise ValueError("normalization must be 'a0' or 'aT'")
    for name, value in (fix or {}).items():
        sdp.add_equality([(name, 1.0)], float(value))
    return sdp


def _certificate_from(sdp_solution, cls: ProblemClass, objective: str,
                      value: float) -> PepCertificate:
    T, m = cls.T, cls.m
    a = np.array([sdp_solution.scalar(f"a[{t}]") for t in range(T + 1)])
    e = np.array([sdp_solution.scalar(f"e[{t}]") for t in range(T)])
    lam_ts = np.array([[sdp_solution.scalar(f"lts[{t},{i}]") for i in range(m)]
                       for t in range(T)])
    lam_st = np.array([[sdp_solution.scalar(f"lst[{t},{i}]") for i in range(m)]
                       for t in range(T)])
    Lambda = [sdp_solution.block(f"Lam[{t}]") for t in range(T)]
    out = sdp_solution.outcome
    return PepCertificate(objective=objective, value=value,
                          rho=sdp_solution.scalar("rho"), a=a, e=e,
                          lam_ts=lam_ts, lam_st=lam_st, Lambda=Lambda,
                          gap=out.gap, status=out.status,
                          instability=out.gap > INSTABILITY_GAP
                          or out.status is not SolveStatus.OPTIMAL,
                          outcome=out)


def solve_step_feasibility(step: PepStepProgram,
                           opts: SolverOptions | None = None) -> PepCertificate:
    """Feasibility of one step's dual program at fixed Lyapunov scalars.

    Feasible means the step's worst case B_t is nonpositive; the returned
    certificate carries the multipliers.  Raises Infeasible when B_t > 0.
    """
    cls = step.cls
    m = step.basis.m
    dim = step.basis.dim
    sdp = BlockSdp()
    for i in range(m):
        sdp.add_scalar(f"lts[{i}]")
        sdp.add_scalar(f"lst[{i}]")
    sdp.add_psd("Lam", dim)
    pairs = [(i, j) for j in range(dim) for i in range(j + 1)]
    delta = step.delta
    for (i, j) in pairs:
        E = np.zeros((dim, dim))
        E[i, j] = E[j, i] = 0.5 if i != j else 1.0
        terms = [("Lam", E)]
        for comp in range(m):
            terms.append((f"lts[{comp}]", -float(step.A_ts[comp].matrix[i, j])))
            terms.append((f"lst[{comp}]", -float(step.A_st[comp].matrix[i, j])))
        sdp.add_equality(terms, -float(delta[i, j]))
    for comp in range(m):
        sdp.add_equality([(f"lts[{comp}]", -1.0), (f"lst[{comp}]", 1.0)],
                         step.rho / m)
    sdp.set_objective([], "min")
    sol = solve(sdp, opts)
    status = sol.outcome.status
    if status is SolveStatus.INFEASIBLE:
        raise Infeasible("step program infeasible: the energy can increase",
                         outcome=sol.outcome)
    if status is not SolveStatus.OPTIMAL:
        raise SolverFailure(f"step feasibility solve ended with {status.value}",
                            outcome=sol.outcome)
    lam_ts = np.array([[sol.scalar(f"lts[{i}]") for i in range(m)]])
    lam_st = np.array([[sol.scalar(f"lst[{i}]") for i in range(m)]])
    return PepCertificate(objective="StepFeasibility", value=0.0,
                          rho=step.rho,
                          a=np.array([step.a_curr, step.a_next]),
                          e=np.array([step.e]),
                          lam_ts=lam_ts, lam_st=lam_st,
                          Lambda=[sol.block("Lam")],
                          gap=sol.outcome.gap, status=status,
                          instability=sol.outcome.gap > INSTABILITY_GAP,
                          outcome=sol.outcome)


def solve_optimal_bias(cls: ProblemClass, objective: BiasObjective,
                       opts: SolverOptions | None = None) -> PepCertificate:
    """Best certifiable bias constant: sup rho (a0 = 1) or inf a0 (aT = 1)."""
    if objective is BiasObjective.MAXIMIZE_RHO:
        sdp = _joint_sdp(cls, normalization="a0")
        sdp.set_objective([("rho", 1.0)], "max")
    else:
        sdp = _joint_sdp(cls, normalization="aT")
        sdp.set_objective([("a[0]", 1.0)], "min")
    sol = solve(sdp, opts)
    status = sol.outcome.status
    if status is SolveStatus.INFEASIBLE:
        raise Infeasible("joint bias program infeasible", outcome=sol.outcome)
    if status in (SolveStatus.MAX_ITER, SolveStatus.NUMERICAL_TROUBLE) \
            and not math.isfinite(sol.outcome.primal_objective):
        raise SolverFailure(f"bias solve ended with {status.value}",
                            outcome=sol.outcome)
    name = "rho" if objective is BiasObjective.MAXIMIZE_RHO else "a[0]"
    value = sol.scalar(name)
    return _certificate_from(sol, cls, objective.value, value)


def solve_optimal_variance(cls: ProblemClass, fixed_bias: float,
                           objective: VarianceObjective,
                           opts: SolverOptions | None = None) -> PepCertificate:
    """Smallest variance constant subject to the bias being pinned.

    MINIMIZE_AVG_E pins rho = fixed_bias under a0 = 1 and minimizes the mean
    of the e_t (the convex-case experiment); MINIMIZE_SUM_E pins a0 =
    fixed_bias under aT = 1 and minimizes the total (the strongly convex
    one).  Raises Infeasible when the pinned bias is not certifiable, which
    happens at the singular step-sizes; divergence detection (objective
    beyond the divergence threshold while feasibility stalls) is reported as
    Infeasible as well, with the outcome attached.
    """
    T = cls.T
    if objective is VarianceObjective.MINIMIZE_AVG_E:
        sdp = _joint_sdp(cls, normalization="a0", fix={"rho": fixed_bias})
        terms = [(f"e[{t}]", 1.0 / T) for t in range(T)]
    else:
        sdp = _joint_sdp(cls, normalization="aT", fix={"a[0]": fixed_bias})
        terms = [(f"e[{t}]", 1.0) for t in range(T)]
    sdp.set_objective(terms, "min")
    sol = solve(sdp, opts)
    status = sol.outcome.status
    if status is SolveStatus.INFEASIBLE:
        raise Infeasible("variance program infeasible at the pinned bias",
                         outcome=sol.outcome)
    if status is not SolveStatus.OPTIMAL:
        raise SolverFailure(f"variance solve ended with {status.value}",
                            outcome=sol.outcome)
    value = sum(sol.scalar(f"e[{t}]") for t in range(T))
    if objective is VarianceObjective.MINIMIZE_AVG_E:
        value /= T
    return _certificate_from(sol, cls, objective.value, value)


@dataclass(frozen=True)
class DecreaseProof:
    """Weighted-inequality decomposition of one step's energy decrease.

    The decrease equals  sum_k multiplier_k * (constraint_k value)  minus the
    sum of squares from the factor of Lambda: for any lifted data (G, F),

        E_{t+1} - E_t = sum_k lam_k c_k(G, F) - Tr(Lambda G).

    ``sos_factor`` Q satisfies Lambda ~= Q' Q, so Tr(Lambda G) is the squared
    norm of Q P' rows on realized data.  recipe_alpha / recipe_beta rescale
    the multipliers into the closed-form proofs' units: m lam / (2 (L - mu)).
    """

    terms: tuple[tuple[str, float], ...]
    Lambda: np.ndarray
    sos_factor: np.ndarray
    step_index: int
    recipe_alpha: np.ndarray
    recipe_beta: np.ndarray


def extract_decrease_proof(cert: PepCertificate, step: PepStepProgram,
                           step_index: int = 0) -> DecreaseProof:
    """Turn a dual-feasible certificate into a nonnegative-combination proof."""
    cls = step.cls
    if cert.status is SolveStatus.INFEASIBLE:
        raise NotFeasible("certificate is an infeasibility outcome")
    if not cert.is_valid(cls) and cert.objective != "StepFeasibility":
        raise NotFeasible("certificate fails dual-feasibility re-validation")
    t = step_index if cert.objective != "StepFeasibility" else 0
    m = cls.m
    terms = []
    for i in range(m):
        terms.append((step.A_ts[i].label, float(cert.lam_ts[t, i])))
        terms.append((step.A_st[i].label, float(cert.lam_st[t, i])))
    Lam = _sym(np.asarray(cert.Lambda[t], dtype=float))
    w, V = np.linalg.eigh(Lam)
    w = np.clip(w, 0.0, None)
    Q = (np.sqrt(w)[:, None] * V.T)
    scale = 2.0 * (cls.L - cls.mu)
    return DecreaseProof(terms=tuple(terms), Lambda=Lam, sos_factor=Q,
                         step_index=t,
                         recipe_alpha=cert.lam_st[t] * m / scale,
                         recipe_beta=cert.lam_ts[t] * m / scale)


def verify_decrease_identity(proof: DecreaseProof, step: PepStepProgram,
                             G: np.ndarray, F: np.ndarray) -> float:
    """|direct energy difference - decomposition| at lifted data (G, F)."""
    direct = step.energy_difference(G, F)
    total = 0.0
    constraint_by_label = {c.label: c for c in step.A_ts + step.A_st}
    for label, lam in proof.terms:
        c = constraint_by_label[label]
        total += lam * (float(F @ c.f_part) + float(np.trace(c.matrix @ G)))
    total -= float(np.trace(proof.Lambda @ G))
    return abs(direct - total)


def lift_step(problem, x_t: np.ndarray, x_star: np.ndarray
              ) -> tuple[np.ndarray, np.ndarray]:
    """(G, F) of one iterate against the minimizer, for cross-module checks."""
    m = problem.n
    cols = [c.gradient(x_t) for c in problem.components]
    cols += [c.gradient(x_star) for c in problem.components[:m - 1]]
    cols.append(np.asarray(x_t) - np.asarray(x_star))
    P = np.stack(cols, axis=1)
    G = P.T @ P
    F = np.array([c.value(x_t) for c in problem.components]
                 + [c.value(x_star) for c in problem.components])
    return G, F
