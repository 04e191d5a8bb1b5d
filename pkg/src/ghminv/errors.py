"""Exception hierarchy shared by all ghminv modules."""


class GhminvError(Exception):
    """Base class for all errors raised by this package."""


class BadParamError(GhminvError, ValueError):
    """A numeric parameter is outside its allowed range."""


class BadRangeError(GhminvError, ValueError):
    """A sampling interval is empty (low > high)."""


class SingularMatrixError(GhminvError, ValueError):
    """A channel-space matrix is singular (|det| below threshold)."""


class NotRotationError(GhminvError, ValueError):
    """A spatial matrix is not a proper rotation."""


class DimMismatchError(GhminvError, ValueError):
    """Coordinate/channel dimensions of two objects do not agree."""


class ParseError(GhminvError, ValueError):
    """A file could not be parsed; carries a byte offset or line number."""

    def __init__(self, message, *, offset=None, line=None):
        loc = ""
        if offset is not None:
            loc = f" (byte offset {offset})"
        elif line is not None:
            loc = f" (line {line})"
        super().__init__(message + loc)
        self.offset = offset
        self.line = line


class PointMismatchError(GhminvError, ValueError):
    """Operator and primitive products are built over different point sets."""


class MissingMomentError(GhminvError, KeyError):
    """A polynomial references a moment beyond the tensor's max order."""


class DegenerateNormalizationError(GhminvError, ArithmeticError):
    """The invariant sum used for normalization is numerically zero."""


class LengthMismatchError(GhminvError, ValueError):
    """Two feature vectors have different lengths."""


class EmptyTrainError(GhminvError, ValueError):
    """Classification was requested with an empty training set."""


class WindowTooLargeError(GhminvError, ValueError):
    """A scan window exceeds the field extent."""


class KTooLargeError(GhminvError, ValueError):
    """More ranked matches requested than scanned centers."""
