"""Exception types raised across the package."""


class EntropyDGError(Exception):
    """Base class for all package errors."""


class InvalidArgument(EntropyDGError, ValueError):
    pass


class UnsupportedDegree(EntropyDGError, ValueError):
    pass


class IllConditionedBasis(EntropyDGError):
    pass


class InvalidMesh(EntropyDGError, ValueError):
    pass


class NonconformingMesh(InvalidMesh):
    pass


class InvalidState(EntropyDGError, ValueError):
    """A state outside the admissible set (rho <= 0 or internal energy <= 0)."""


class BlowUpError(InvalidState):
    """Raised when a solution becomes inadmissible during a run.

    Carries enough context to locate the failure: simulation time, element
    index, point index within the element and the offending values.
    """

    def __init__(self, message, *, time=None, element=None, point=None, values=None):
        super().__init__(message)
        self.time = time
        self.element = element
        self.point = point
        self.values = values


class OracleFailure(EntropyDGError):
    pass


class ConfigError(EntropyDGError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class PlotError(EntropyDGError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column
