"""Exception hierarchy.

The CLI maps :class:`DataError` to exit code 3 and :class:`NumericalError`
to exit code 4.
"""


class GfeError(Exception):
    """Base class for all package errors."""


class DataError(GfeError, ValueError):
    """Bad input data: malformed CSV, unknown column, empty group, etc."""

    def __init__(self, message, *, line=None, column=None, row=None):
        self.line = line
        self.column = column
        self.row = row
        where = []
        if line is not None:
            where.append(f"line {line}")
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ShapeError(GfeError, ValueError):
    """Operands with incompatible dimensions."""

    def __init__(self, message, *, expected=None, got=None):
        self.expected = expected
        self.got = got
        if expected is not None or got is not None:
            message = f"{message}: expected {expected}, got {got}"
        super().__init__(message)


class NumericalError(GfeError, ArithmeticError):
    """Non-finite input or a failed factorization."""


class SmallGroupWarning(UserWarning):
    """A group is too small for its empirical distribution to be trusted."""
