"""Exception types shared across the package."""


class FbmkError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FbmkError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ParameterError(FbmkError, ValueError):
    """A configuration parameter is invalid or inconsistent."""


class DimensionError(FbmkError, ValueError):
    """An array argument has the wrong length or shape."""


class UnsupportedMeasureError(FbmkError, TypeError):
    """The operation is not defined for this measure variant."""


class NotSquareIntegrableError(FbmkError):
    """The kernel induced by the measure is not in L2 of the half line."""


class CapacityError(FbmkError):
    """A requested construction exceeds a configured size cap."""


class NumericalError(FbmkError):
    """A numerical routine failed to converge or produced an invalid result."""


class StabilityError(FbmkError):
    """A discretization step violates its stability condition."""
