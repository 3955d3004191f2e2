"""Exception hierarchy shared by all radarcctp modules."""


class RadarError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RadarError, ValueError):
    """A numeric argument lies outside its admissible domain."""


class IndexOutOfGrid(RadarError, IndexError):
    pass


class DuplicateCell(RadarError, ValueError):
    pass


class GridMismatch(RadarError, ValueError):
    pass


class FormatError(RadarError, ValueError):
    """Base class for on-disk format problems."""


class BadMagic(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class DimMismatch(FormatError):
    pass


class ShapeMismatch(RadarError, ValueError):
    pass


class NonFiniteInput(RadarError, ValueError):
    pass


class NonFiniteGradient(RadarError, ArithmeticError):
    pass


class DivisibilityError(RadarError, ValueError):
    pass


class SpecParseError(RadarError, ValueError):
    """Scene-spec text could not be parsed; ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
