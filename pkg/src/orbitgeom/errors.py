"""Exception hierarchy.

Input problems derive from :class:`ValidationError` (also a ``ValueError``);
numerical breakdowns derive from :class:`NumericalError`.
"""


class OrbitGeomError(Exception):
    """Base class for all library errors."""


class ValidationError(OrbitGeomError, ValueError):
    """An input violates a documented invariant."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class DimensionMismatch(ValidationError):
    pass


class NegativeEigenvalue(ValidationError):
    pass


class TraceNotOne(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class NotSkewHermitian(ValidationError):
    pass


class NonNegligibleImaginaryPart(ValidationError):
    pass


class NotTangent(ValidationError):
    pass


class BasePointMismatch(ValidationError):
    pass


class NotIsospectral(ValidationError):
    pass


class FiberMismatch(ValidationError):
    pass


class MissingFrames(ValidationError):
    pass


class NotALoop(ValidationError):
    pass


class NonIncreasingGrid(ValidationError):
    pass


class NumericalError(OrbitGeomError, ArithmeticError):
    """A computation failed to meet its numerical contract."""


class NegativeRadicand(NumericalError):
    pass


class ZeroDispersion(NumericalError):
    pass


class NoConvergence(NumericalError):
    """Optimization did not converge; ``best`` holds the best value found."""

    def __init__(self, message: str, best: float | None = None):
        super().__init__(message)
        self.best = best


class ParseError(OrbitGeomError, ValueError):
    """Malformed configuration text; ``line``/``column`` locate the problem."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column


class UnknownKey(ParseError):
    """A configuration key that the schema does not define."""

    def __init__(self, key: str, path: str):
        super().__init__(f"unknown key {key!r} in {path}")
        self.key = key
        self.path = path


class IoError(OrbitGeomError, OSError):
    pass
