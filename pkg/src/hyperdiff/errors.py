"""Exception types shared across the package.

The CLI maps ``DataError`` to exit code 2 and ``NumericalError`` to 3.
"""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(ArithmeticError):
    """A numerical routine produced an invalid result."""
