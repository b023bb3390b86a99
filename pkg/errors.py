# errors.py
# Exception hierarchy shared by the estimation modules.


class EstimationError(ValueError):
    """Base class for every error raised by the estimation toolkit."""


class InvalidBandwidthError(EstimationError):
    """Bandwidth is non-positive or not finite."""


class SampleTooSmallError(EstimationError):
    """Sample has fewer than two observations or non-finite values."""


class GridInfeasibleError(EstimationError):
    """The bandwidth grid cannot be built for the requested n and parameters."""


class DivergenceError(EstimationError):
    """An integral that must be finite does not converge."""


class QuadratureError(EstimationError):
    """Numerical quadrature failed to reach the requested tolerance."""


class DegenerateRateFitError(EstimationError):
    """A log-log slope fit has no usable points."""


class InvalidLevelError(EstimationError):
    """Confidence level outside (0, 1)."""


class InvalidParameterError(EstimationError):
    """A kernel, density or configuration parameter is out of range."""


class MalformedInputError(EstimationError):
    """A sample or configuration file could not be parsed."""
