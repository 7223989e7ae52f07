"""Exception types shared across the package."""


class SetConvError(Exception):
    """Base class for all package errors."""


class ValidationError(SetConvError, ValueError):
    """Malformed input: bad shapes, unknown names, violated preconditions."""


class DimensionMismatch(ValidationError):
    """Operands live in spaces of different dimension."""


class NumericalFailure(SetConvError, RuntimeError):
    """An iterative method failed to converge.

    ``stage`` and ``iterate`` carry the continuation stage index and the
    last iterate when the failure happened inside a staged solver.
    """

    def __init__(self, message, stage=None, iterate=None):
        super().__init__(message)
        self.stage = stage
        self.iterate = iterate
