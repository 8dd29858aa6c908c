"""Exception types raised across the package."""


class SpinnerError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SpinnerError, ValueError):
    """Shapes or lengths are incompatible, or a size constraint is violated."""


class NonFiniteError(SpinnerError, ValueError):
    """Input contains NaN or infinity."""


class DomainError(SpinnerError, ValueError):
    """Input lies outside the domain of the operation (e.g. a zero vector)."""


class SingularSystemError(SpinnerError, ArithmeticError):
    """A linear system is rank deficient beyond what the solver accepts."""


class StepFailure(SpinnerError, ArithmeticError):
    """A sketched Newton system could not be solved, even with a ridge."""
