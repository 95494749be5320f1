"""Lyapunov parameter tuples, closed-form recipes, and the decrease checker.

The energy under study is

    E_t = a_t ||x_t - x*||^2 + rho * sum_{s<t} (f(x_s) - min f) - sum_{s<t} e_s sigma*^2

and a tuple (rho, a, e) together with auxiliary multipliers (alpha, beta) makes
E_t decrease in expectation whenever the six scalar conditions checked by
:func:`check_conditions` hold at every step.  The recipe functions return the
closed-form parameter choices for each step-size regime; every recipe is
certified by the checker itself (see the test suite and the acceptance gate).
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BadEpsilon, Overflow, OutOfRegime, SingularOptimalStep
from .problems import Assumption, ProblemClass

ABS_TOL = 1e-10
REL_TOL = 1e-9
GAMMA_L_ONE_RTOL = 1e-12
OVERFLOW_BUDGET = 1e300
N_CONDITIONS = 6


class Normalization(enum.Enum):
    A0_EQ_1 = "a0"
    AT_EQ_1 = "aT"


@dataclass(frozen=True)
class LyapunovParams:
    """(rho, a_0..a_T, e_0..e_{T-1}, alpha_0.., beta_0..) with a normalization."""

    rho: float
    a: np.ndarray
    e: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    normalization: Normalization

    def __post_init__(self):
        arrays = {}
        for name in ("a", "e", "alpha", "beta"):
            arr = np.asarray(getattr(self, name))
            if arr.dtype != object:
                arr = arr.astype(float)
            arrays[name] = arr
        a = arrays["a"]
        T = a.shape[0] - 1
        if T < 0 or any(arrays[k].shape != (T,) for k in ("e", "alpha", "beta")):
            raise ValueError("need |a| = T+1 and |e| = |alpha| = |beta| = T")
        anchor = a[0] if self.normalization is Normalization.A0_EQ_1 else a[-1]
        if abs(anchor - 1.0) > 1e-12:
            raise ValueError(f"normalized entry is {anchor}, expected 1")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    def as_float(self) -> "LyapunovParams":
        """Collapse exact (Fraction-valued) parameters to float64."""
        if self.a.dtype != object:
            return self
        return LyapunovParams(
            rho=float(self.rho),
            a=self.a.astype(float), e=self.e.astype(float),
            alpha=self.alpha.astype(float), beta=self.beta.astype(float),
            normalization=self.normalization)

    @property
    def T(self) -> int:
        return self.a.shape[0] - 1

    def uses_symmetric_inequality(self, tol: float = 0.0) -> bool:
        """True when some beta_t > tol, which requires the SEC* assumption."""
        return bool(np.any(self.beta > tol))

    def e_bar(self) -> float:
        return float(sum(self.e) / self.T) if self.T > 0 else 0.0

    def e_sum(self) -> float:
        return float(sum(self.e))


def params_to_json(params: LyapunovParams) -> str:
    return json.dumps({
        "rho": float(params.rho),
        "a": [float(v) for v in params.a],
        "e": [float(v) for v in params.e],
        "alpha": [float(v) for v in params.alpha],
        "beta": [float(v) for v in params.beta],
        "normalization": params.normalization.value,
    }, indent=2)


def params_from_json(text: str) -> LyapunovParams:
    d = json.loads(text)
    return LyapunovParams(
        rho=float(d["rho"]),
        a=np.array(d["a"], dtype=float),
        e=np.array(d["e"], dtype=float),
        alpha=np.array(d["alpha"], dtype=float),
        beta=np.array(d["beta"], dtype=float),
        normalization=Normalization(d["normalization"]),
    )


@dataclass(frozen=True)
class ConditionReport:
    """Per-step, per-condition (lhs, rhs, residual) for the six conditions.

    residual = lhs - rhs for the inequality lhs <= rhs; feasible iff every
    residual is below the combined absolute/relative tolerance.
    """

    lhs: np.ndarray          # (T, 6)
    rhs: np.ndarray          # (T, 6)
    residuals: np.ndarray    # (T, 6)
    tolerances: np.ndarray   # (T, 6)
    feasible: bool
    worst_violation: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,condition,lhs,rhs,residual\n")
        T = self.lhs.shape[0]
        for t in range(T):
            for k in range(N_CONDITIONS):
                buf.write(f"{t},{k + 1},{self.lhs[t, k]!r},{self.rhs[t, k]!r},"
                          f"{self.residuals[t, k]!r}\n")
        return buf.getvalue()


def check_conditions(params: LyapunovParams, cls: ProblemClass,
                     abs_tol: float = ABS_TOL, rel_tol: float = REL_TOL
                     ) -> ConditionReport:
    """Machine-check the six sufficient conditions for Lyapunov decrease.

    Conditions, per step t (lhs <= rhs form):
      1. nonnegativity of rho, a_t, a_{t+1}, e_t, alpha_t, beta_t
      2. rho <= 2(L-mu)(alpha_t - beta_t)
      3. a_{t+1} <= mu L (alpha_t + beta_t) + a_t
      4. a_{t+1} gamma^2 <= alpha_t + beta_t
      5. (a_{t+1} gamma - alpha_t L - beta_t mu)^2
           <= (mu L (alpha_t+beta_t) + a_t - a_{t+1}) (alpha_t+beta_t - a_{t+1} gamma^2)
      6. a_{t+1} gamma^2 (alpha_t+beta_t) <= (alpha_t+beta_t - a_{t+1} gamma^2) e_t

    Reports and never raises on numeric inputs.  Feasibility is judged at
    residual <= abs_tol + rel_tol * max(|lhs|, |rhs|) per entry; conditions 5
    and 6 are products of near-zero factors at the tight recipes, which is why
    a purely absolute tolerance is not used.

    When the parameter arrays carry Fraction entries (recipes built with
    exact=True) the conditions are evaluated in exact rational arithmetic; the
    tight recipes then certify with residual exactly zero.  The large-step
    recipe needs this at large T: its condition-5/6 slacks shrink like
    (1-gamma L)^{2(T-t-1)}, far below float64 resolution.
    """
    mu, L, g = cls.mu, cls.L, cls.gamma
    exact = params.a.dtype == object
    if exact:
        mu, L, g = Fraction(mu), Fraction(L), Fraction(g)
    T = params.T
    a, e, al, be = params.a, params.e, params.alpha, params.beta
    rho = params.rho
    lhs = np.zeros((T, N_CONDITIONS), dtype=object)
    rhs = np.zeros((T, N_CONDITIONS), dtype=object)
    feasible = True
    worst = -math.inf
    tolerances = np.zeros((T, N_CONDITIONS))
    for t in range(T):
        at, at1, et, alt, bet = a[t], a[t + 1], e[t], al[t], be[t]
        s = alt + bet
        # 1: most-negative quantity must still be >= 0
        lhs[t, 0] = -min(rho, at, at1, et, alt, bet)
        rhs[t, 0] = 0 * at
        lhs[t, 1] = rho
        rhs[t, 1] = 2 * (L - mu) * (alt - bet)
        lhs[t, 2] = at1
        rhs[t, 2] = mu * L * s + at
        lhs[t, 3] = at1 * g * g
        rhs[t, 3] = s
        lhs[t, 4] = (at1 * g - alt * L - bet * mu) ** 2
        rhs[t, 4] = (mu * L * s + at - at1) * (s - at1 * g * g)
        lhs[t, 5] = at1 * g * g * s
        rhs[t, 5] = (s - at1 * g * g) * et
    residuals = np.zeros((T, N_CONDITIONS))
    for t in range(T):
        for k in range(N_CONDITIONS):
            resid = lhs[t, k] - rhs[t, k]
            tol = abs_tol + rel_tol * max(abs(lhs[t, k]), abs(rhs[t, k]))
            tolerances[t, k] = float(tol)
            residuals[t, k] = float(resid)
            if resid > tol:
                feasible = False
            worst = max(worst, float(resid - tol))
    return ConditionReport(lhs=lhs.astype(float), rhs=rhs.astype(float),
                           residuals=residuals, tolerances=tolerances,
                           feasible=feasible, worst_violation=worst)


def _is_gamma_L_one(cls: ProblemClass) -> bool:
    return abs(cls.gamma_L - 1.0) <= GAMMA_L_ONE_RTOL


def _require_ec_compatible(cls: ProblemClass, symmetric_needed: bool):
    if symmetric_needed and cls.assumption is Assumption.EC_STAR:
        raise OutOfRegime(
            "recipe uses the symmetric cocoercivity inequality (beta > 0); "
            "assumption EC* only supports beta == 0")


def _object_array(values) -> np.ndarray:
    out = np.empty(len(values), dtype=object)
    out[:] = values
    return out


def recipe_convex_short(cls: ProblemClass, exact: bool = False) -> LyapunovParams:
    """Parameters for gamma*L in (0,1), mu = 0; rho = 2 gamma + 2(1-gamma L)/(L T).

    a_t decreases from 1 to 0, beta = 0 (one-sided cocoercivity suffices), and
    e_t is pinned by equality in condition 6, with e_t <= gamma^2/(1-gamma L).
    With exact=True all parameters are Fractions of the binary values of gamma
    and L, so check_conditions certifies them with zero residual.
    """
    cls.require_step_in_0_2()
    if cls.mu != 0:
        raise OutOfRegime("short-step recipe is for the convex case (mu = 0)")
    if _is_gamma_L_one(cls) or cls.gamma_L >= 1.0:
        raise OutOfRegime(f"gamma*L = {cls.gamma_L} not in (0, 1)")
    T = cls.T
    g = Fraction(cls.gamma) if exact else cls.gamma
    L = Fraction(cls.L) if exact else cls.L
    one = Fraction(1) if exact else 1.0
    gL = g * L
    rho = 2 * g + 2 * (one - gL) / (L * T)
    a = [((one * (T - t)) / T) * (one + gL * (T - 1)) / (one + gL * (T - t - 1))
         for t in range(T + 1)]
    e = [(g * g / (one - gL)) * ((one * (T - t - 1)) / T)
         * ((one - gL) + gL * T) / ((one - gL) + gL * (T - t))
         for t in range(T)]
    alpha = [rho / (2 * L)] * T
    beta = [0 * one] * T
    if not exact:
        a, e, alpha, beta = map(np.array, (a, e, alpha, beta))
    else:
        a, e, alpha, beta = map(_object_array, (a, e, alpha, beta))
    return LyapunovParams(rho=rho, a=a, e=e, alpha=alpha, beta=beta,
                          normalization=Normalization.A0_EQ_1)


def recipe_convex_optimal(cls: ProblemClass, eps: float,
                          exact: bool = False) -> LyapunovParams:
    """Parameters for gamma*L = 1 exactly, mu = 0, with slack eps in (0, 2).

    rho = (2 - eps) gamma with constant a = 1, alpha = gamma^2,
    beta = gamma^2 eps / 2 and e = gamma^2 (2 + eps)/eps.  eps = 0 would force
    an infinite variance term, so it is rejected.  beta > 0 means the
    symmetric cocoercivity inequality is required.
    """
    cls.require_step_in_0_2()
    if cls.mu != 0:
        raise OutOfRegime("optimal-step recipe is for the convex case (mu = 0)")
    if not _is_gamma_L_one(cls):
        raise OutOfRegime(f"gamma*L = {cls.gamma_L} is not 1 (within 1e-12)")
    if not (0.0 < eps < 2.0):
        raise BadEpsilon(f"eps = {eps} outside (0, 2)")
    _require_ec_compatible(cls, symmetric_needed=True)
    T = cls.T
    g = Fraction(cls.gamma) if exact else cls.gamma
    eps_n = Fraction(eps) if exact else eps
    rho = (2 - eps_n) * g
    one = Fraction(1) if exact else 1.0
    a = [one] * (T + 1)
    alpha = [g * g] * T
    beta = [g * g * eps_n / 2] * T
    e = [g * g * (2 + eps_n) / eps_n] * T
    pack = _object_array if exact else np.array
    return LyapunovParams(rho=rho, a=pack(a), e=pack(e), alpha=pack(alpha),
                          beta=pack(beta), normalization=Normalization.A0_EQ_1)


def recipe_convex_large(cls: ProblemClass, exact: bool = False) -> LyapunovParams:
    """Parameters for gamma*L in (1,2), mu = 0, with theta = (1-gamma L)^2.

    rho = 2 gamma (2-gamma L)/(1-theta^T); the e_t sequence carries the
    theta^{-k} growth responsible for the exponential variance term.  Raises
    Overflow when theta^{-T} exceeds the float budget.  Conditions 5 and 6
    hold with equality at slack scale theta^{2(T-t-1)}; for T beyond a few
    steps that is below float64 resolution, so use exact=True whenever the
    parameters are to be re-certified by check_conditions.
    """
    cls.require_step_in_0_2()
    if cls.mu != 0:
        raise OutOfRegime("large-step recipe is for the convex case (mu = 0)")
    if _is_gamma_L_one(cls) or cls.gamma_L <= 1.0:
        raise OutOfRegime(f"gamma*L = {cls.gamma_L} not in (1, 2)")
    _require_ec_compatible(cls, symmetric_needed=True)
    T = cls.T
    theta_f = (1.0 - cls.gamma_L) ** 2
    if T * math.log(1.0 / theta_f) > math.log(OVERFLOW_BUDGET):
        raise Overflow(f"theta^-T = {theta_f}^-{T} exceeds the float budget")
    g = Fraction(cls.gamma) if exact else cls.gamma
    L = Fraction(cls.L) if exact else cls.L
    one = Fraction(1) if exact else 1.0
    gL = g * L
    theta = (one - gL) ** 2
    powers = [one]
    for _ in range(T):
        powers.append(powers[-1] * theta)       # powers[k] = theta^k
    denom = one - powers[T]
    rho = 2 * g * (2 - gL) / denom
    a = [(one - powers[T - t]) / denom for t in range(T + 1)]
    alpha, beta, e = [], [], []
    for t in range(T):
        k = T - t - 1
        th_k = powers[k]
        beta.append(g * (gL - 1) * (one - th_k) / (L * denom))
        alpha.append(g * ((2 - gL) + (gL - 1) * (one - th_k)) / (L * denom))
        e.append((g * g / (2 - gL)) * ((one - th_k) / denom)
                 * (gL / th_k - 2 * (gL - 1)))
    pack = _object_array if exact else np.array
    return LyapunovParams(rho=rho, a=pack(a), e=pack(e), alpha=pack(alpha),
                          beta=pack(beta), normalization=Normalization.A0_EQ_1)


def strongly_convex_rate(cls: ProblemClass, eps: float = 0.0) -> float:
    """phi^2 = eps + max{1 - gamma mu, gamma L - 1}^2, the per-step contraction."""
    phi_opt = max(1.0 - cls.gamma * cls.mu, cls.gamma_L - 1.0)
    return eps + phi_opt ** 2


def recipe_strongly_convex(cls: ProblemClass, eps: float = 0.0) -> LyapunovParams:
    """Parameters for mu > 0, gamma*L in (0,2); rho = 0, a_t = phi^{2(T-t)}.

    With L > mu, alpha_t = beta_t = (omega + omega_eps) a_{t+1} where omega is
    pinned by the contraction factor and omega_eps absorbs the bias slack eps;
    e_t = e a_{t+1}.  eps = 0 gives the sharp contraction but is singular at
    gamma = 2/(mu+L).  The L = mu branch picks alpha exactly at the larger of
    its two lower bounds (smallest admissible e) and needs eps > 0.
    """
    cls.require_step_in_0_2()
    if cls.mu <= 0:
        raise OutOfRegime("strongly convex recipe needs mu > 0")
    if eps < 0:
        raise BadEpsilon(f"eps = {eps} must be nonnegative")
    _require_ec_compatible(cls, symmetric_needed=True)
    mu, L, g, T = cls.mu, cls.L, cls.gamma, cls.T
    phi_opt = max(1.0 - g * mu, g * L - 1.0)
    phi_sq = phi_opt ** 2 + eps
    if phi_sq >= 1.0:
        raise BadEpsilon(f"eps = {eps} pushes phi^2 = {phi_sq} out of [0, 1)")
    delta = abs(g - cls.gamma_opt)
    if L > mu:
        if eps == 0.0 and delta == 0.0:
            raise SingularOptimalStep(
                "eps = 0 at gamma = 2/(mu+L): the variance coefficient diverges")
        omega = g * phi_opt / (L - mu)
        omega_eps = (eps + math.sqrt(eps * eps + eps * g * (L - mu) * (L + mu) * delta)) \
            / (L - mu) ** 2
        alpha_ratio = omega + omega_eps
        e_ratio = g * g * (1.0 + g * g * (L - mu)
                           / (2.0 * omega_eps * (L - mu) + (L + mu) * g * delta))
    else:
        if eps == 0.0:
            if delta == 0.0:
                raise SingularOptimalStep(
                    "L = mu, eps = 0 at gamma = 1/L: the variance coefficient diverges")
            raise OutOfRegime("L = mu requires eps > 0 away from gamma = 1/L")
        alpha_ratio = max(0.5 * g * g * (1.0 + phi_opt ** 2 / eps),
                          (1.0 - phi_opt ** 2 - eps) / (2.0 * L * L))
        if 2.0 * alpha_ratio <= g * g:
            raise SingularOptimalStep("L = mu: 2 alpha - gamma^2 <= 0, e diverges")
        e_ratio = 2.0 * g * g * alpha_ratio / (2.0 * alpha_ratio - g * g)
    t_idx = np.arange(T + 1, dtype=float)
    a = phi_sq ** (T - t_idx)
    a_next = a[1:]
    alpha = alpha_ratio * a_next
    beta = alpha.copy()
    e = e_ratio * a_next
    return LyapunovParams(rho=0.0, a=a, e=e, alpha=alpha, beta=beta,
                          normalization=Normalization.AT_EQ_1)


def recipe_for(cls: ProblemClass, eps: float | None = None,
               exact: bool = False) -> LyapunovParams:
    """Dispatch to the regime-appropriate recipe."""
    cls.require_step_in_0_2()
    if cls.mu > 0:
        return recipe_strongly_convex(cls, 0.0 if eps is None else eps)
    if _is_gamma_L_one(cls):
        if eps is None:
            raise SingularOptimalStep("gamma*L = 1 requires an explicit eps")
        return recipe_convex_optimal(cls, eps, exact=exact)
    if cls.gamma_L < 1.0:
        return recipe_convex_short(cls, exact=exact)
    return recipe_convex_large(cls, exact=exact)
