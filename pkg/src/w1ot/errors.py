"""Exception hierarchy.

The CLI maps :class:`NumericalError` to exit code 1 and every other
:class:`W1OTError` to exit code 2.
"""


class W1OTError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(W1OTError, ValueError):
    """Operand shapes are incompatible."""


class ConfigError(W1OTError, ValueError):
    """A configuration value violates its documented constraints."""


class UsageError(W1OTError, ValueError):
    """An API was called in a way its contract forbids."""


class DataError(W1OTError, ValueError):
    """Input data is malformed, empty, or too small for the request."""


class NumericalError(W1OTError, ArithmeticError):
    """A computation produced NaN/Inf or hit a singular pivot."""
