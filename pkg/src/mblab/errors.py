"""Exception hierarchy shared by all mblab modules."""


class MBLabError(Exception):
    """Base class for every error raised by mblab."""


class ConfigurationError(MBLabError, ValueError):
    """Invalid parameters, geometry or configuration file contents."""


class RangeError(MBLabError, IndexError):
    """A tile index or translation lies outside the strip."""


class ShapeError(MBLabError, ValueError):
    """Fields live on incompatible grids."""


class NumericalError(MBLabError, ArithmeticError):
    """A non-finite value appeared during evaluation."""


class ConvergenceError(MBLabError, RuntimeError):
    """An iterative solve stopped before meeting its tolerance.

    The best iterate seen so far is kept on ``best`` (solver specific type)
    together with its objective value.
    """

    def __init__(self, message, best=None, value=None, state=None):
        super().__init__(message)
        self.best = best
        self.value = value
        self.state = state


class InfeasibleError(ConvergenceError):
    """Penalty rounds could not drive the constraint violation to tolerance."""


class Interrupted(MBLabError):
    """Raised when an iteration budget set for checkpoint testing runs out."""
