"""Exception types shared across the toolkit."""


class SgdCertError(Exception):
    """Base class for all toolkit errors."""


class OutOfRegime(SgdCertError):
    """Parameters fall outside the step-size/curvature regime of a formula."""


class BadEpsilon(SgdCertError):
    """Slack parameter outside its admissible interval."""


class SingularOptimalStep(SgdCertError):
    """The requested quantity diverges at the singular (optimal) step-size."""


class Overflow(SgdCertError):
    """A geometric factor exceeds the floating-point budget."""


class NoMinimizer(SgdCertError):
    """The averaged quadratic has no minimizer (inconsistent linear part)."""


class BadBatch(SgdCertError):
    """Mini-batch size outside [1, n]."""


class BadDistribution(SgdCertError):
    """Sampling probabilities are not a valid distribution."""


class DegenerateClass(SgdCertError):
    """mu == L: the interpolation constraint denominator vanishes."""


class TooLarge(SgdCertError):
    """Exact enumeration would exceed the path budget."""


class NoProx(SgdCertError):
    """Component kind has no closed-form proximal map."""


class SolverFailure(SgdCertError):
    """The SDP solver stopped without a usable status."""

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class Infeasible(SgdCertError):
    """The assembled program admits no feasible point."""

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class NotFeasible(SgdCertError):
    """A certificate marked infeasible cannot be turned into a proof."""
