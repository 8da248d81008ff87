"""Exception types shared across the package."""


class CoilsimError(Exception):
    """Base class for all structured errors raised by this package."""


class DimensionError(CoilsimError):
    """Matrix or vector dimensions do not conform."""


class SingularMatrixError(CoilsimError):
    """A matrix that must be invertible is singular (e.g. innovation covariance)."""


class ConvergenceError(CoilsimError):
    """An iterative solver did not reach its tolerance within the iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotStabilizableError(CoilsimError):
    """DARE solution does not yield a stabilizing feedback gain."""


class DegeneratePriorityError(CoilsimError):
    """A priority value that must be strictly positive is zero or negative."""


class AllocationError(CoilsimError):
    """A subsystem/channel allocation violates the access constraints."""


class InstanceTooLargeError(CoilsimError):
    """An enumeration-based solver was given an instance beyond its guard."""


class ConfigError(CoilsimError):
    """Invalid simulation configuration; ``field`` holds the offending path."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
