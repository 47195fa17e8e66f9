"""Exception types raised across the library.

Data/validation errors subclass ValueError so callers that do not care about
the fine-grained type can still catch the usual builtin.
"""


class PoissonCpError(Exception):
    """Base class for all library-specific errors."""


class IndexOutOfBoundsError(PoissonCpError, ValueError):
    pass


class DuplicateCoordinateError(PoissonCpError, ValueError):
    pass


class NonPositiveValueError(PoissonCpError, ValueError):
    pass


class LengthMismatchError(PoissonCpError, ValueError):
    pass


class ShapeMismatchError(PoissonCpError, ValueError):
    pass


class RankMismatchError(PoissonCpError, ValueError):
    pass


class DimensionMismatchError(PoissonCpError, ValueError):
    pass


class NonFiniteError(PoissonCpError, ArithmeticError):
    """A solver produced a non-finite value (usually an eps misconfiguration)."""


class EmptySampleError(PoissonCpError, ValueError):
    pass


class DegenerateTensorError(PoissonCpError, ValueError):
    """The tensor cannot supply the requested sampling stratum."""


class UnknownMethodError(PoissonCpError, ValueError):
    pass


class OptionsTypeMismatchError(PoissonCpError, TypeError):
    pass


class BudgetOutOfRangeError(PoissonCpError, ValueError):
    pass


class EmptySetError(PoissonCpError, ValueError):
    pass


class DensityUnachievableError(PoissonCpError, ValueError):
    pass


class ParseError(PoissonCpError, ValueError):
    """Malformed text input; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonIntegerValueError(ParseError):
    pass
