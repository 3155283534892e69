class BBISError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(BBISError, ValueError):
    """Malformed, out-of-range or non-finite input."""


class NumericalError(BBISError, ArithmeticError):
    """A numerical procedure failed (degenerate covariance, blow-up, ...)."""
