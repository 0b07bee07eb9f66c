"""Exception hierarchy shared by all myriadkit modules."""


class MyriadkitError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(MyriadkitError):
    """A matrix required to be symmetric positive definite is not."""


class InvalidNu(MyriadkitError):
    """Degrees-of-freedom parameter outside the supported range."""


class NotUnitVector(MyriadkitError):
    """Input expected on the unit sphere has non-unit Euclidean norm."""


class DegenerateRho(MyriadkitError):
    """Concentration rho = 0 requested where a finite Cauchy scale is needed."""


class ZeroSample(MyriadkitError):
    """A sample vector is exactly zero where a direction is required."""


class NotConverged(MyriadkitError):
    """Fixed-point iteration exhausted its iteration budget."""


class AssumptionViolation(MyriadkitError):
    """Sample/weight configuration fails the estimator feasibility checks."""


class DegenerateData(MyriadkitError):
    """Data concentrated on too few directions for the estimator."""


class InsufficientCandidates(MyriadkitError):
    """Requested more similar patches than the search window contains."""


class ShapeMismatch(MyriadkitError):
    """Two images or arrays that must share a shape do not."""


class TooSmall(MyriadkitError):
    """Image smaller than the metric's minimum window size."""


class MalformedHeader(MyriadkitError):
    """Image file header or payload cannot be parsed."""


class IoFailure(MyriadkitError):
    """Underlying file I/O failed."""


class KindMismatch(MyriadkitError):
    """File stores the other image kind (real vs circular)."""


class ConfigError(MyriadkitError):
    """Invalid or infeasible configuration."""
