"""Exception hierarchy shared by every module of the package."""


class NsemError(Exception):
    """Base class for all errors raised by nsem."""


class ArgumentError(NsemError, ValueError):
    """An argument failed a precondition (shape, sign, finiteness)."""


class DomainError(ArgumentError):
    """A numeric argument lies outside the mathematical domain of a function."""


class UnsupportedError(NsemError, NotImplementedError):
    """The requested combination of model and scheme is not implemented."""


class RootNotFoundError(NsemError, RuntimeError):
    """A bracketed root search found no sign change on its bracket."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class NumericError(NsemError, ArithmeticError):
    """A non-finite value appeared during time stepping.

    ``step`` is the index k of the step whose output X_{k+1} was non-finite,
    or None when the failure happened outside a trajectory loop.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
