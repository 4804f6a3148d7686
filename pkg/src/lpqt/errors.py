"""Exception hierarchy shared by all lpqt modules."""


class LpqtError(Exception):
    """Base class for all lpqt errors."""


class InvalidInput(LpqtError):
    """Non-finite or otherwise unusable numeric input."""


class InvalidScheme(LpqtError):
    """Quantization scheme parameters are inconsistent."""


class InvalidCode(LpqtError):
    """Code value does not fit the format's bit width."""


class PayloadMismatch(LpqtError):
    """Packed payload is inconsistent with the declared code count."""


class ShapeError(LpqtError):
    """Matrix dimensions do not agree."""


class ScaleOverflow(LpqtError):
    """Folded scale would exceed the binary16 range."""


class PathUnavailable(LpqtError):
    """Requested dequantization path needs data the tensor does not carry."""


class BadMagic(LpqtError):
    """Container stream does not start with the LPQT magic."""


class UnsupportedVersion(LpqtError):
    """Container version is not understood by this reader."""


class TruncatedPayload(LpqtError):
    """Container stream ends before the declared sections do."""


class InvariantViolation(LpqtError):
    """Decoded container contents break a structural invariant."""


class LengthMismatch(LpqtError):
    """Raw tensor byte length does not match the declared shape/dtype."""
