"""Closed-form bias/variance bounds, reference constants, and adversarial certificates.

Every bound is reported as a pair of coefficients: ``bias_coeff`` multiplies
the squared initial distance and ``variance_coeff`` multiplies the solution
variance (or the case-specific constant for the proximal corollaries).  The
module also exposes the reference constants rho_theory / e_bar_theory that the
PEP solves are compared against, and the two-quadratic infeasibility
certificates that rule out any larger bias constant.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Overflow, OutOfRegime, SingularOptimalStep
from .lyapunov import (OVERFLOW_BUDGET, recipe_convex_large, recipe_convex_short,
                       strongly_convex_rate)
from .problems import ProblemClass

OVERFLOW_FLAG_THRESHOLD = 1e12
GAMMA_L_ONE_RTOL = 1e-12


class Metric(enum.Enum):
    AVG_FUNCTION_GAP = "avg_function_gap"          # E f(cesaro avg) - min f
    LAST_ITERATE_SQDIST = "last_iterate_sqdist"    # E ||x_T - x*||^2
    MOREAU_GAP = "moreau_gap"                      # E F^gamma(avg) - inf F^gamma
    MEAN_SQDIST_SETS = "mean_sqdist_sets"          # E dist^2(avg; C_i)
    FUNCTION_GAP = "function_gap"                  # E f(avg) - inf f


@dataclass(frozen=True)
class BoundResult:
    """bias_coeff * ||x0 - x*||^2 + variance_coeff * sigma*^2 bounds the metric.

    For the proximal special cases the two slots keep the same roles but the
    multiplied quantities change (documented per regime tag): the projection
    case's bias multiplies dist(x0; C)^2, the Lipschitz case's variance slot is
    the constant 4 gamma G^2, the smooth case's variance slot multiplies the
    interpolation gap Delta*.
    """

    bias_coeff: float
    variance_coeff: float
    metric: Metric
    regime: str
    overflow_flag: bool = False
    bias_coeff_simplified: float | None = None

    def value(self, dist0_sq: float, sigma_sq: float) -> float:
        return self.bias_coeff * dist0_sq + self.variance_coeff * sigma_sq


def _is_one(gamma_L: float) -> bool:
    return abs(gamma_L - 1.0) <= GAMMA_L_ONE_RTOL


def bound(cls: ProblemClass, eps: float | None = None) -> BoundResult:
    """Closed-form worst-case bound for SGD in the class's regime.

    mu = 0 uses the averaged-function-gap theorems (short / optimal / large
    step-sizes); mu > 0 uses the squared-distance theorems (sharp bias when
    eps is None or 0 and gamma != 2/(mu+L), eps-suboptimal bias otherwise).
    At the singular points (gamma L = 1 with mu = 0, or gamma = 2/(mu+L) with
    mu > 0) an explicit eps is required; eps = 0 there returns the
    interpolation-only limit with an infinite variance coefficient.
    """
    cls.require_step_in_0_2()
    g, L, mu, T = cls.gamma, cls.L, cls.mu, cls.T
    gL = cls.gamma_L
    if mu == 0:
        if _is_one(gL):
            if eps is None:
                raise SingularOptimalStep(
                    "gamma*L = 1: pass eps in (0,2), or eps=0 for the "
                    "interpolation-only limit")
            if not (0.0 <= eps < 2.0):
                raise OutOfRegime(f"eps = {eps} outside [0, 2)")
            if eps == 0.0:
                return BoundResult(bias_coeff=1.0 / (2.0 * g * T),
                                   variance_coeff=math.inf,
                                   metric=Metric.AVG_FUNCTION_GAP,
                                   regime="convex-optimal-interpolation")
            return BoundResult(
                bias_coeff=1.0 / ((2.0 - eps) * g * T),
                variance_coeff=(2.0 + eps) * g / (eps * (2.0 - eps)),
                metric=Metric.AVG_FUNCTION_GAP,
                regime="convex-optimal")
        if gL < 1.0:
            return BoundResult(
                bias_coeff=L / (2.0 * gL * T + 2.0 * (1.0 - gL)),
                variance_coeff=g / (2.0 * (1.0 - gL)),
                metric=Metric.AVG_FUNCTION_GAP,
                regime="convex-short",
                bias_coeff_simplified=1.0 / (2.0 * g * T))
        theta = (1.0 - gL) ** 2
        if T * math.log(1.0 / theta) > math.log(OVERFLOW_BUDGET):
            raise Overflow(f"theta^-T = {theta}^-{T} exceeds the float budget")
        delta = 1.0 - (1.0 - gL) ** (2 * T)
        ebar_prime = e_bar_prime_large(cls)
        return BoundResult(
            bias_coeff=delta / (2.0 * g * (2.0 - gL) * T),
            variance_coeff=g * ebar_prime / (2.0 * (2.0 - gL) ** 3),
            metric=Metric.AVG_FUNCTION_GAP,
            regime="convex-large",
            overflow_flag=theta ** (-T) > OVERFLOW_FLAG_THRESHOLD)
    # strongly convex
    gamma_opt = cls.gamma_opt
    at_opt = abs(g - gamma_opt) == 0.0
    if eps is None or eps == 0.0:
        if at_opt:
            raise SingularOptimalStep(
                "gamma = 2/(mu+L): the sharp-bias variance diverges; pass eps > 0")
        phi = max(1.0 - g * mu, gL - 1.0)
        e = g * g * (1.0 + g * (L - mu) / (abs(g - gamma_opt) * (L + mu)))
        phi_sq = phi * phi
        variance = e * _geometric_sum(phi_sq, T)
        return BoundResult(bias_coeff=phi_sq ** T, variance_coeff=variance,
                           metric=Metric.LAST_ITERATE_SQDIST,
                           regime="strongly-convex-sharp")
    if eps < 0:
        raise OutOfRegime(f"eps = {eps} must be nonnegative")
    phi_sq = strongly_convex_rate(cls, eps)
    if phi_sq >= 1.0:
        raise OutOfRegime(f"eps = {eps} pushes phi^2 = {phi_sq} out of [0,1)")
    e = g * g * (1.0 + (g * (L - mu)) ** 2 / (4.0 * eps))
    return BoundResult(bias_coeff=phi_sq ** T,
                       variance_coeff=e * _geometric_sum(phi_sq, T),
                       metric=Metric.LAST_ITERATE_SQDIST,
                       regime="strongly-convex-suboptimal")


def _geometric_sum(q: float, T: int) -> float:
    """(1 - q^T)/(1 - q), continuous at q = 1."""
    if abs(1.0 - q) < 1e-15:
        return float(T)
    return (1.0 - q ** T) / (1.0 - q)


def rho_theory(cls: ProblemClass) -> float:
    """Reference bias constant: the conjectured-optimal rho per step-size regime.

    2 gamma + 2(1-gamma L)/(T L) below gamma L = 1, exactly 2 gamma at 1, and
    2 gamma (2-gamma L)/(1-(1-gamma L)^{2T}) above.
    """
    cls.require_step_in_0_2()
    if cls.mu != 0:
        raise OutOfRegime("rho_theory is a convex-case (mu = 0) quantity")
    g, L, T = cls.gamma, cls.L, cls.T
    gL = cls.gamma_L
    if _is_one(gL):
        return 2.0 * g
    if gL < 1.0:
        return 2.0 * g + 2.0 * (1.0 - gL) / (T * L)
    return 2.0 * g * (2.0 - gL) / (1.0 - (1.0 - gL) ** (2 * T))


def e_bar_theory(cls: ProblemClass) -> float:
    """Average of the recipe's e_t: the reference optimum of the variance solve."""
    cls.require_step_in_0_2()
    if cls.mu != 0:
        raise OutOfRegime("e_bar_theory is a convex-case (mu = 0) quantity")
    if _is_one(cls.gamma_L):
        raise SingularOptimalStep("no finite e_bar with rho = 2 gamma at gamma*L = 1")
    if cls.gamma_L < 1.0:
        return recipe_convex_short(cls).e_bar()
    return recipe_convex_large(cls).e_bar()


def e_sum_theory(cls: ProblemClass, eps: float = 0.0) -> float:
    """Total variance constant e * (1-phi^{2T})/(1-phi^2) of the mu > 0 recipes."""
    cls.require_step_in_0_2()
    if cls.mu <= 0:
        raise OutOfRegime("e_sum_theory is a strongly convex (mu > 0) quantity")
    from .lyapunov import recipe_strongly_convex
    return recipe_strongly_convex(cls, eps).e_sum()


def e_bar_prime_large(cls: ProblemClass) -> float:
    """The displayed normalized sum (1/T) sum e_t' in the large-step regime.

    e_bar' = (theta/T)(theta^{-T} - 1) - (2-gamma L)(3 gamma L - 2)
             + 2(gamma L - 1)(1 - theta^T)/(gamma L T),  theta = (1-gamma L)^2.
    """
    gL = cls.gamma_L
    if not (1.0 < gL < 2.0):
        raise OutOfRegime(f"gamma*L = {gL} not in (1, 2)")
    theta = (1.0 - gL) ** 2
    T = cls.T
    if T * math.log(1.0 / theta) > math.log(OVERFLOW_BUDGET):
        raise Overflow(f"theta^-T = {theta}^-{T} exceeds the float budget")
    return (theta / T) * (theta ** (-T) - 1.0) \
        - (2.0 - gL) * (3.0 * gL - 2.0) \
        + 2.0 * (gL - 1.0) * (1.0 - theta ** T) / (gL * T)


def e_bar_prime_asymptotic(cls: ProblemClass) -> float:
    """Large-T equivalent 1/(T theta^{T-1}) of e_bar', exposed for plots."""
    gL = cls.gamma_L
    if not (1.0 < gL < 2.0):
        raise OutOfRegime(f"gamma*L = {gL} not in (1, 2)")
    theta = (1.0 - gL) ** 2
    return 1.0 / (cls.T * theta ** (cls.T - 1))


class ViolationKind(enum.Enum):
    RHO_TOO_LARGE = "RhoTooLarge"
    A_TRAPPED_ABOVE_ONE = "ATrappedAboveOne"


@dataclass(frozen=True)
class InfeasibilityCertificate:
    """Adversarial witness from the 1-D two-point quadratic family.

    The family f_+-(x) = L/2 (x +- delta)^2 makes any admissible parameters
    satisfy, at every step and for every (x_t, delta),

        (a_{t+1}(1-gL)^2 - a_t + rho L / 2) x_t^2 <= (2 e_t - a_{t+1}(gL)^2) delta^2.

    Evaluating at (x_t, delta) = (1, 0) forces the recursion
    a_{t+1} <= (a_t - rho L/2) / (1-gL)^2.  RHO_TOO_LARGE exhibits the chain of
    forced upper bounds a_bar_t ending with a_bar_T < 0 (contradiction with
    a_T >= 0).  A_TRAPPED_ABOVE_ONE covers gamma L = 1, rho = 2 gamma, where
    the same witness forces a_t >= 1 for all t, which together with a_0 = 1
    pins a_t = 1 and then alpha = 1/L^2, beta = 0, making the variance
    condition read gamma^4 <= 0.
    """

    kind: ViolationKind
    L: float
    gamma: float
    T: int
    rho: float
    x_witness: float
    delta_witness: float
    forced_a: np.ndarray          # a_bar_0 .. a_bar_T (upper bounds), or lower bounds
    witness_values: np.ndarray    # per-step forced-recursion values
    contradiction: float          # the strictly positive quantity that must be <= 0

    def describe(self) -> str:
        if self.kind is ViolationKind.RHO_TOO_LARGE:
            return (f"rho = {self.rho} forces a_T <= {self.forced_a[-1]} < 0 "
                    f"on the two-point family with (x, delta) = "
                    f"({self.x_witness}, {self.delta_witness})")
        return (f"rho = 2*gamma at gamma*L = 1 forces a_t >= 1 for all t; with "
                f"a_0 = 1 the variance condition becomes "
                f"{self.contradiction} <= 0, impossible")


def certify_rho_upper_bound(cls: ProblemClass, rho: float
                            ) -> InfeasibilityCertificate | None:
    """Certificate that no a_0-normalized parameters exist with the given rho.

    Only meaningful for gamma L in [1, 2).  Returns None when rho is at or
    below the regime's reference value (the boundary itself is feasible by the
    large-step recipe).
    """
    cls.require_step_in_0_2()
    if cls.mu != 0:
        raise OutOfRegime("certificates target the convex case (mu = 0)")
    gL = cls.gamma_L
    if gL < 1.0 - GAMMA_L_ONE_RTOL:
        raise OutOfRegime(f"gamma*L = {gL} below 1: no upper-bound certificate")
    L, g, T = cls.L, cls.gamma, cls.T
    if _is_one(gL):
        if rho > 2.0 * g * (1.0 + 1e-12):
            # immediate contradiction: a_0 >= rho L / 2 > 1
            forced = np.array([rho * L / 2.0] + [math.nan] * T)
            return InfeasibilityCertificate(
                kind=ViolationKind.RHO_TOO_LARGE, L=L, gamma=g, T=T, rho=rho,
                x_witness=1.0, delta_witness=0.0, forced_a=forced,
                witness_values=forced[:-1],
                contradiction=rho * L / 2.0 - 1.0)
        if abs(rho - 2.0 * g) <= 1e-12 * 2.0 * g:
            lower = np.full(T + 1, rho * L / 2.0)   # a_t >= 1 for t = 0..T-1
            lower[-1] = math.nan                     # last step never constrained
            return InfeasibilityCertificate(
                kind=ViolationKind.A_TRAPPED_ABOVE_ONE, L=L, gamma=g, T=T,
                rho=rho, x_witness=1.0, delta_witness=0.0, forced_a=lower,
                witness_values=lower[:-1],
                contradiction=g ** 4)
        return None
    tau = (1.0 - gL) ** 2
    a_bar = np.zeros(T + 1)
    a_bar[0] = 1.0
    for t in range(T):
        a_bar[t + 1] = (a_bar[t] - rho * L / 2.0) / tau
    if a_bar[-1] < -1e-9 * max(1.0, tau ** (-T)):
        return InfeasibilityCertificate(
            kind=ViolationKind.RHO_TOO_LARGE, L=L, gamma=g, T=T, rho=rho,
            x_witness=1.0, delta_witness=0.0, forced_a=a_bar,
            witness_values=a_bar[1:],
            contradiction=-a_bar[-1])
    return None


def validate_certificate(cert: InfeasibilityCertificate) -> bool:
    """Re-validate by direct arithmetic on the exhibited instance.

    Recomputes the forced recursion from the two-point witness inequality and
    confirms the contradiction quantity is strictly positive.
    """
    L, g, rho, T = cert.L, cert.gamma, cert.rho, cert.T
    gL = g * L
    tau = (1.0 - gL) ** 2
    x2, d2 = cert.x_witness ** 2, cert.delta_witness ** 2
    if cert.kind is ViolationKind.RHO_TOO_LARGE and not _is_one(gL):
        a = 1.0
        for t in range(T):
            # witness (x,delta)=(1,0): a_{t+1} tau - a_t + rho L/2 <= 0
            a_next = (a - rho * L / 2.0) / tau
            lhs = (a_next * tau - a + rho * L / 2.0) * x2
            rhs = (2.0 * cert.forced_a[t] - a_next * gL ** 2) * d2 if d2 else 0.0
            if d2 == 0.0 and lhs > 1e-9 * max(1.0, abs(a)):
                return False
            a = a_next
        return a < 0.0 and abs(a - cert.forced_a[-1]) <= 1e-9 * max(1.0, abs(a))
    if cert.kind is ViolationKind.RHO_TOO_LARGE:
        # gamma L = 1 with rho > 2 gamma: forced a_0 >= rho L/2 > 1 = a_0
        return rho * L / 2.0 > 1.0 and cert.contradiction > 0
    # trap at gamma L = 1, rho = 2 gamma: a_t >= rho L / 2 = 1 forced each step,
    # a_t <= a_0 = 1 by monotonicity, hence a = 1, alpha = 1/L^2, beta = 0, and
    # the variance condition needs a gamma^2 alpha <= 0.
    forced_floor = rho * L / 2.0
    if abs(forced_floor - 1.0) > 1e-12:
        return False
    alpha = 1.0 / L ** 2
    lhs = 1.0 * g ** 2 * alpha        # a_{t+1} gamma^2 (alpha + beta), beta = 0
    rhs_factor = alpha - 1.0 * g ** 2  # alpha + beta - a_{t+1} gamma^2 = 0
    return abs(rhs_factor) <= 1e-15 and lhs > 0 \
        and abs(lhs - cert.contradiction) <= 1e-12 * max(1.0, lhs)


class SproxCase(enum.Enum):
    GENERAL = "general"
    INTERPOLATION = "interpolation"
    PROJECTION = "projection"
    LIPSCHITZ = "lipschitz"
    SMOOTH = "smooth"


def sprox_bounds(cls: ProblemClass, case: SproxCase, eps: float = 1.0,
                 G: float | None = None, L_f: float | None = None) -> BoundResult:
    """Bounds for the stochastic proximal algorithm, one corollary per case.

    The algorithm is SGD at the singular unit normalized step on the
    Moreau-envelope family, so the general bound inherits the eps slack.  The
    constants multiply case-specific quantities:

      GENERAL        bias * ||x0-x*^g||^2 + var * sigma*^2(gamma)   [Moreau gap]
      INTERPOLATION  bias * ||x0-x*||^2                             [Moreau gap]
      PROJECTION     (1/T) * dist(x0; C)^2                          [E dist^2]
      LIPSCHITZ      bias * ||x0-x*^g||^2 + 4 gamma G^2             [f gap]
      SMOOTH         bias * ||x0-x*^g||^2 + var * Delta*            [f gap]

    For mu > 0 classes the GENERAL/INTERPOLATION cases instead bound the
    last-iterate squared distance with contraction (1/(1+gamma mu))^{2T}.
    """
    g, T, mu = cls.gamma, cls.T, cls.mu
    if g <= 0:
        raise OutOfRegime("gamma must be positive")
    if case is SproxCase.GENERAL:
        if mu > 0:
            mu_g = mu / (1.0 + g * mu)
            bias = (1.0 / (1.0 + g * mu)) ** (2 * T)
            var = 2.0 * g / (mu_g * (2.0 - g * mu_g))
            return BoundResult(bias_coeff=bias, variance_coeff=var,
                               metric=Metric.LAST_ITERATE_SQDIST,
                               regime="sprox-general-strongly-convex")
        if not (0.0 < eps < 2.0):
            raise OutOfRegime(f"eps = {eps} outside (0, 2)")
        return BoundResult(bias_coeff=1.0 / ((2.0 - eps) * g * T),
                           variance_coeff=(2.0 + eps) * g / (eps * (2.0 - eps)),
                           metric=Metric.MOREAU_GAP, regime="sprox-general")
    if case is SproxCase.INTERPOLATION:
        if mu > 0:
            mu_g = mu / (1.0 + g * mu)
            return BoundResult(bias_coeff=(1.0 / (1.0 + g * mu)) ** (2 * T),
                               variance_coeff=0.0,
                               metric=Metric.LAST_ITERATE_SQDIST,
                               regime="sprox-interpolation-strongly-convex")
        return BoundResult(bias_coeff=1.0 / (2.0 * g * T), variance_coeff=0.0,
                           metric=Metric.MOREAU_GAP,
                           regime="sprox-interpolation")
    if case is SproxCase.PROJECTION:
        return BoundResult(bias_coeff=1.0 / T, variance_coeff=0.0,
                           metric=Metric.MEAN_SQDIST_SETS,
                           regime="sprox-projection")
    if case is SproxCase.LIPSCHITZ:
        if G is None:
            raise OutOfRegime("Lipschitz case needs the modulus G")
        return BoundResult(bias_coeff=1.0 / (g * T),
                           variance_coeff=4.0 * g * G * G,
                           metric=Metric.FUNCTION_GAP, regime="sprox-lipschitz")
    if case is SproxCase.SMOOTH:
        if L_f is None:
            raise OutOfRegime("smooth case needs the modulus L_f")
        if not g * L_f < 1.0:
            raise OutOfRegime(f"gamma*L_f = {g * L_f} must be below 1")
        return BoundResult(bias_coeff=1.0 / ((1.0 - g * L_f) * g * T),
                           variance_coeff=g * (6.0 * L_f + 1.0) / (1.0 - g * L_f),
                           metric=Metric.FUNCTION_GAP, regime="sprox-smooth")
    raise ValueError(f"unknown case {case}")


def bounds_table_csv(rows: list[tuple[ProblemClass, float | None, BoundResult]]) -> str:
    """CSV with one row per (class, eps, bound): the documented export schema."""
    buf = io.StringIO()
    buf.write("gamma,mu,L,T,eps,metric,bias_coeff,variance_coeff,regime,overflow_flag\n")
    for cls, eps, res in rows:
        buf.write(f"{cls.gamma!r},{cls.mu!r},{cls.L!r},{cls.T},"
                  f"{'' if eps is None else repr(eps)},{res.metric.value},"
                  f"{res.bias_coeff!r},{res.variance_coeff!r},{res.regime},"
                  f"{int(res.overflow_flag)}\n")
    return buf.getvalue()
