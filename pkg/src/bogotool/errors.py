class BogotoolError(Exception):
    """Base class for errors raised by this package."""


class DomainError(BogotoolError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(BogotoolError, ArithmeticError):
    """A pointwise value is unbounded at the requested argument."""


class ConvergenceError(BogotoolError, ArithmeticError):
    """An iterative routine stopped before reaching its tolerance."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class PreconditionError(BogotoolError, ValueError):
    """Input data violate a documented precondition."""
