"""Problem regimes, quadratic finite sums, and solution-variance bookkeeping.

Everything downstream (recipes, bounds, PEP programs, simulators) is gated by a
:class:`ProblemClass` describing the (mu, L, gamma, T, m) regime.  Test problems
are finite sums of quadratic pieces, for which minimizers, gradients, proximal
maps and membership checks are all exact.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadBatch, BadDistribution, NoMinimizer, OutOfRegime

EIG_MEMBERSHIP_TOL = 1e-10
WEIGHT_TOL = 1e-12
RANK_CUTOFF = 1e-12


class Assumption(enum.Enum):
    """Variational-inequality class the analysis is allowed to use.

    SMOOTH_CONVEX / SMOOTH_STRONGLY_CONVEX mean every component is L-smooth and
    mu-strongly convex.  EC_STAR is the one-sided expected cocoercivity against
    minimizers; SEC_STAR is its symmetric version.  EC_STAR is only sufficient
    for recipes that never use the symmetric inequality (all beta_t = 0).
    """

    SMOOTH_CONVEX = "SmoothConvex"
    SMOOTH_STRONGLY_CONVEX = "SmoothStronglyConvex"
    EC_STAR = "EC*"
    SEC_STAR = "SEC*"


@dataclass(frozen=True)
class ProblemClass:
    """Regime descriptor: curvatures, step-size, horizon and component count.

    ``gamma * L`` is only required to lie in (0, 2) at formula entry, not at
    construction, so sweep drivers may build out-of-regime points and let each
    operation reject them.
    """

    mu: float
    L: float
    gamma: float
    T: int
    m: int = 2
    assumption: Assumption | None = None

    def __post_init__(self):
        if not (self.L > 0):
            raise ValueError("L must be positive")
        if not (0 <= self.mu <= self.L):
            raise ValueError("need 0 <= mu <= L")
        if not (self.gamma > 0):
            raise ValueError("gamma must be positive")
        if not (isinstance(self.T, (int, np.integer)) and self.T >= 1):
            raise ValueError("T must be a positive integer")
        if not (isinstance(self.m, (int, np.integer)) and self.m >= 1):
            raise ValueError("m must be a positive integer")
        if self.assumption is None:
            default = (Assumption.SMOOTH_CONVEX if self.mu == 0
                       else Assumption.SMOOTH_STRONGLY_CONVEX)
            object.__setattr__(self, "assumption", default)

    @property
    def gamma_L(self) -> float:
        return self.gamma * self.L

    @property
    def gamma_opt(self) -> float:
        """Contraction-optimal step-size 2/(mu+L) of deterministic descent."""
        return 2.0 / (self.mu + self.L)

    def require_step_in_0_2(self):
        if not (0.0 < self.gamma_L < 2.0):
            raise OutOfRegime(f"gamma*L = {self.gamma_L} outside (0, 2)")

    def with_(self, **kw) -> "ProblemClass":
        return replace(self, **kw)


@dataclass(frozen=True)
class QuadraticComponent:
    """One piece f(x) = 0.5 x'Qx + b'x + c with Q symmetric PSD."""

    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if Q.shape[0] != Q.shape[1] or Q.shape[0] != b.shape[0]:
            raise ValueError("inconsistent component dimensions")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.b @ x + self.c)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ np.asarray(x, dtype=float) + self.b

    def curvature_range(self) -> tuple[float, float]:
        """(min, max) eigenvalue of Q: the component's (mu_i, L_i)."""
        w = np.linalg.eigvalsh(self.Q)
        return float(w[0]), float(w[-1])

    def min_value(self) -> float:
        """inf of the component; requires b in range(Q)."""
        x = _pinv_solve(self.Q, -self.b)
        if x is None:
            raise NoMinimizer("component has no finite infimum")
        return self.value(x)


def _pinv_solve(Q: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    """Solve Qx = rhs through a symmetric eigendecomposition pseudo-inverse.

    Returns None when rhs has a component outside range(Q) (relative to the
    RANK_CUTOFF * largest-eigenvalue threshold), i.e. no solution exists.
    """
    w, V = np.linalg.eigh(Q)
    scale = max(abs(w[0]), abs(w[-1]), 1e-300)
    keep = np.abs(w) > RANK_CUTOFF * scale
    coeffs = V.T @ rhs
    if np.any(~keep):
        resid = np.linalg.norm(coeffs[~keep])
        if resid > 1e-9 * (1.0 + np.linalg.norm(rhs)):
            return None
    out = np.zeros_like(rhs)
    out[keep] = coeffs[keep] / w[keep]
    return V @ out


@dataclass(frozen=True)
class FiniteSumProblem:
    """f(x) = sum_i w_i f_i(x) over quadratic components.

    Weights default to uniform.  Components are validated against a declared
    ProblemClass only when :func:`check_membership` is called, so problems can
    be built before choosing a regime.
    """

    components: tuple[QuadraticComponent, ...]
    weights: np.ndarray = None

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("need at least one component")
        d = comps[0].dim
        if any(c.dim != d for c in comps):
            raise ValueError("components disagree on dimension")
        if self.weights is None:
            w = np.full(len(comps), 1.0 / len(comps))
        else:
            w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(comps),) or np.any(w < 0):
            raise BadDistribution("weights must be nonnegative, one per component")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise BadDistribution(f"weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def value(self, x) -> float:
        return float(sum(w * c.value(x) for w, c in zip(self.weights, self.components)))

    def gradient(self, x) -> np.ndarray:
        g = np.zeros(self.dim)
        for w, c in zip(self.weights, self.components):
            g += w * c.gradient(x)
        return g

    def aggregate(self) -> QuadraticComponent:
        Q = sum(w * c.Q for w, c in zip(self.weights, self.components))
        b = sum(w * c.b for w, c in zip(self.weights, self.components))
        c0 = sum(w * c.c for w, c in zip(self.weights, self.components))
        return QuadraticComponent(Q, b, float(c0))

    def smoothness(self) -> float:
        """Lip(grad f) of the averaged objective: exact for quadratics."""
        return float(np.linalg.eigvalsh(self.aggregate().Q)[-1])

    def component_moduli(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-component (mu_i, L_i) from Q eigenvalues."""
        ranges = [c.curvature_range() for c in self.components]
        mus = np.array([r[0] for r in ranges])
        Ls = np.array([r[1] for r in ranges])
        return mus, Ls


def check_membership(problem: FiniteSumProblem, cls: ProblemClass,
                     tol: float = EIG_MEMBERSHIP_TOL) -> bool:
    """Every component's Q-spectrum must lie in [mu, L] of the declared class."""
    mus, Ls = problem.component_moduli()
    return bool(np.all(mus >= cls.mu - tol) and np.all(Ls <= cls.L + tol))


@dataclass(frozen=True)
class SolutionStats:
    """Minimizer, solution variance, and the interpolation gap of a problem.

    sigma_star_sq = sum_i w_i ||grad f_i(x*)||^2 at any minimizer x* of f;
    delta_star    = inf f - sum_i w_i inf f_i  (zero iff interpolation).
    """

    x_star: np.ndarray
    sigma_star_sq: float
    delta_star: float
    f_min: float = 0.0

    def interpolates(self, tol: float = 1e-10) -> bool:
        return self.sigma_star_sq <= tol


def solution_stats(problem: FiniteSumProblem) -> SolutionStats:
    """Solve the averaged quadratic and report sigma*^2 and Delta*.

    Raises NoMinimizer when the aggregate linear part is not in the range of
    the aggregate Q (the averaged objective is unbounded below).
    """
    agg = problem.aggregate()
    x_star = _pinv_solve(agg.Q, -agg.b)
    if x_star is None:
        raise NoMinimizer("aggregate b not in range of aggregate Q")
    grad_norm = np.linalg.norm(problem.gradient(x_star))
    if grad_norm > 1e-10 * (1.0 + np.linalg.norm(x_star)):
        raise NoMinimizer(f"stationarity residual {grad_norm} too large")
    sigma_sq = float(sum(
        w * np.dot(c.gradient(x_star), c.gradient(x_star))
        for w, c in zip(problem.weights, problem.components)))
    f_min = problem.value(x_star)
    inf_mean = float(sum(w * c.min_value()
                         for w, c in zip(problem.weights, problem.components)))
    delta = f_min - inf_mean
    return SolutionStats(x_star=x_star, sigma_star_sq=sigma_sq,
                         delta_star=max(delta, 0.0) if delta > -1e-12 else delta,
                         f_min=f_min)


def two_point_problem(L: float = 1.0, delta: float = 1.0,
                      mu: float | None = None) -> FiniteSumProblem:
    """The 1-D two-piece family 0.5*c_i*(x +/- delta)^2 used everywhere.

    With mu=None both pieces have curvature L (the adversarial family).  With
    mu given, the '+delta' piece gets curvature mu instead, producing a
    genuinely (mu, L) heterogeneous pair.
    """
    c_minus = L
    c_plus = L if mu is None else mu
    comp_minus = QuadraticComponent(np.array([[c_minus]]),
                                    np.array([-c_minus * delta]),
                                    0.5 * c_minus * delta ** 2)
    comp_plus = QuadraticComponent(np.array([[c_plus]]),
                                   np.array([c_plus * delta]),
                                   0.5 * c_plus * delta ** 2)
    return FiniteSumProblem((comp_minus, comp_plus))


def minibatch_constants(problem: FiniteSumProblem, b: int,
                        base: ProblemClass | None = None
                        ) -> tuple[ProblemClass, SolutionStats]:
    """Effective (L, mu, sigma*^2) under which size-b mini-batch SGD is plain SGD.

    Uses the subsample-without-replacement transfer: with r = n(b-1)/(b(n-1)),
    the batch family is cocoercive with L = r*Lip(grad f) + (1-r)*max_i L_i and
    mu = min_i mu_i, while sigma*^2 shrinks to (n-b)/(n b (n-1)) * sum_i
    ||grad f_i(x*)||^2.  b = n recovers deterministic descent (sigma*^2 = 0,
    L = Lip(grad f)); b = 1 recovers the plain family.

    Requires uniform weights (the batch law is uniform over subsets).
    """
    n = problem.n
    if not (isinstance(b, (int, np.integer)) and 1 <= b <= n):
        raise BadBatch(f"batch size {b} outside [1, {n}]")
    if not np.allclose(problem.weights, 1.0 / n, atol=WEIGHT_TOL):
        raise BadDistribution("mini-batch transfer assumes uniform weights")
    stats = solution_stats(problem)
    mus, Ls = problem.component_moduli()
    if n == 1:
        r = 1.0
    else:
        r = n * (b - 1) / (b * (n - 1))
    L_eff = r * problem.smoothness() + (1.0 - r) * float(Ls.max())
    mu_eff = float(mus.min())
    grads = np.array([np.dot(c.gradient(stats.x_star), c.gradient(stats.x_star))
                      for c in problem.components])
    if b == n:
        sigma_sq = 0.0
    else:
        sigma_sq = float((n - b) / (n * b * (n - 1)) * grads.sum())
    tmpl = base if base is not None else ProblemClass(mu=0.0, L=1.0, gamma=1.0, T=1)
    cls = tmpl.with_(mu=mu_eff, L=L_eff)
    return cls, SolutionStats(x_star=stats.x_star, sigma_star_sq=sigma_sq,
                              delta_star=stats.delta_star, f_min=stats.f_min)


def nonuniform_constants(problem: FiniteSumProblem, p: np.ndarray,
                         base: ProblemClass | None = None
                         ) -> tuple[ProblemClass, SolutionStats]:
    """Constants of the reweighted family hat f_i = f_i/(n p_i).

    Sampling i ~ p with the rescaled update leaves f unchanged but transfers
    the constants to L = max_i L_i/(n p_i), mu = min_i mu_i/(n p_i), and
    sigma*^2 = (1/n) sum_i ||grad f_i(x*)||^2 / (n p_i).
    """
    n = problem.n
    p = np.asarray(p, dtype=float)
    if p.shape != (n,) or np.any(p <= 0):
        raise BadDistribution("p must be strictly positive, one entry per component")
    if abs(p.sum() - 1.0) > WEIGHT_TOL:
        raise BadDistribution(f"p sums to {p.sum()}, not 1")
    if not np.allclose(problem.weights, 1.0 / n, atol=WEIGHT_TOL):
        raise BadDistribution("non-uniform transfer starts from the uniform family")
    stats = solution_stats(problem)
    mus, Ls = problem.component_moduli()
    L_eff = float(np.max(Ls / (n * p)))
    mu_eff = float(np.min(mus / (n * p)))
    grads = np.array([np.dot(c.gradient(stats.x_star), c.gradient(stats.x_star))
                      for c in problem.components])
    sigma_sq = float(np.sum(grads / (n * p)) / n)
    tmpl = base if base is not None else ProblemClass(mu=0.0, L=1.0, gamma=1.0, T=1)
    cls = tmpl.with_(mu=mu_eff, L=L_eff)
    return cls, SolutionStats(x_star=stats.x_star, sigma_star_sq=sigma_sq,
                              delta_star=stats.delta_star, f_min=stats.f_min)


def problem_to_json(problem: FiniteSumProblem) -> str:
    """Serialize to the on-disk problem schema (deterministic round-trip)."""
    payload = {
        "dimension": problem.dim,
        "components": [
            {"Q": [float(v) for v in c.Q.ravel(order="C")],
             "b": [float(v) for v in c.b],
             "c": float(c.c)}
            for c in problem.components
        ],
        "weights": [float(w) for w in problem.weights],
    }
    return json.dumps(payload, indent=2)


def problem_from_json(text: str) -> FiniteSumProblem:
    payload = json.loads(text)
    d = int(payload["dimension"])
    comps = tuple(
        QuadraticComponent(np.array(entry["Q"], dtype=float).reshape(d, d),
                           np.array(entry["b"], dtype=float),
                           float(entry.get("c", 0.0)))
        for entry in payload["components"]
    )
    weights = payload.get("weights")
    return FiniteSumProblem(comps, None if weights is None else np.array(weights))
