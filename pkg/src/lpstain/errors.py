"""Exception hierarchy shared across the toolkit.

Data errors (bad inputs, degenerate statistics) and format errors (corrupt
files) are kept distinct so the CLI can map them to stable exit codes.
"""


class LPStainError(Exception):
    """Base class for all toolkit errors."""


# --- data errors ---

class DimsTooSmall(LPStainError):
    """Image too small for the requested pyramid depth."""


class DimMismatch(LPStainError):
    """Pyramid levels are not mutually dimension-consistent."""


class LevelOutOfRange(LPStainError):
    """Requested pyramid level outside [0, K]."""


class EmptyDataset(LPStainError):
    """Statistics requested over an empty image list."""


class UnreadableImage(LPStainError):
    """An image path could not be decoded."""


class DegenerateScale(LPStainError):
    """Band-pass scale statistic collapsed to zero."""


class DegenerateChannel(LPStainError):
    """Channel too small to normalize (spatial size < 2)."""


class NonpositiveBeta(LPStainError):
    """AdaIN target std must be strictly positive."""


class ShapeMismatch(LPStainError):
    """Tensor shapes inconsistent with the declared contract."""


class RangeError(LPStainError):
    """Scalar argument outside its documented range."""


class InsufficientTissue(LPStainError):
    """Too few pixels above the optical-density cutoff."""


class DegenerateCloud(LPStainError):
    """Optical-density cloud is rank-deficient (e.g. grayscale input)."""


# --- format errors ---

class FormatError(LPStainError):
    """Base class for file-format errors."""


class BadMagic(FormatError):
    """Weight container does not start with the GSW1 magic."""


class TruncatedPayload(FormatError):
    """Weight container payload shorter than the tensor table promises."""


class UnknownModelKind(FormatError):
    """Weight container declares an unrecognized model kind."""


class BadSidecar(FormatError):
    """Pyramid sidecar JSON missing or inconsistent."""
