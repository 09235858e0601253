"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class FinslerError(Exception):
    """Base class for all errors raised by :mod:`finsler`."""


class ParseError(FinslerError):
    """Malformed metric expression.  Carries a 1-based line/column position."""

    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset(),
                 source: str = "", origin: str = ""):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        self.source = source
        self.origin = origin
        loc = f"line {line}, column {column}"
        if origin:
            loc = f"{origin}: {loc}"
        text = f"{loc}: {message}"
        if expected:
            text += " (expected " + ", ".join(sorted(expected)) + ")"
        super().__init__(text)


class SpecError(FinslerError):
    """Invalid metric or vector-field spec document."""


class DimensionError(FinslerError):
    """Input vectors do not match the declared chart dimension."""


class DomainError(FinslerError, ArithmeticError):
    """An elementary function was evaluated outside its smooth domain."""

    def __init__(self, message: str, subexpression: str = ""):
        self.subexpression = subexpression
        if subexpression:
            message = f"{message} in subexpression '{subexpression}'"
        super().__init__(message)


class StepUnderflowError(FinslerError):
    """Finite-difference stencil would cross the zero section y = 0."""


class DegenerateError(FinslerError):
    """A construction is undefined because a tensor vanishes (e.g. C_i = 0)."""


class NotPositiveDefiniteError(FinslerError):
    """The fundamental tensor g_ij is singular or indefinite at a support element."""

    def __init__(self, message: str, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"{message} (min eigenvalue {min_eigenvalue:.3e})")


class EmptyRegionError(FinslerError):
    """Every sampled support element was rejected."""


class MissingFieldError(FinslerError):
    """A theorem run needs a vector field or conformal gradient that was not supplied."""
