"""8-bit RGB PNG I/O and value-range conversions.

Decoding maps [0, 255] -> [0, 1]; encoding clamps to [0, 1] and rounds
half-to-even. Writes are atomic (temp file + rename).
"""

import os
import tempfile
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .errors import RangeError, UnreadableImage

UNIT = "unit"
SYMMETRIC = "symmetric"

_RANGE_SLACK = 1e-6


@dataclass(frozen=True)
class Image:
    """Dense H x W x 3 float32 raster with a declared value range."""

    data: np.ndarray
    range_tag: str = UNIT

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise RangeError(f"image must be HxWx3, got {self.data.shape}")
        if self.range_tag not in (UNIT, SYMMETRIC):
            raise RangeError(f"unknown range tag {self.range_tag!r}")
        if not np.isfinite(self.data).all():
            raise RangeError("image contains non-finite values")

    @property
    def shape(self):
        return self.data.shape

    def check_range(self):
        lo = 0.0 if self.range_tag == UNIT else -1.0
        if self.data.min() < lo - _RANGE_SLACK or self.data.max() > 1.0 + _RANGE_SLACK:
            raise RangeError(
                f"values [{self.data.min():.4g}, {self.data.max():.4g}] "
                f"outside declared {self.range_tag} range"
            )
        return self


def to_symmetric(img: Image) -> Image:
    if img.range_tag == SYMMETRIC:
        return img
    return Image(img.data * np.float32(2.0) - np.float32(1.0), SYMMETRIC)


def to_unit(img: Image, clamp: bool = True) -> Image:
    if img.range_tag == UNIT:
        return img
    data = (img.data + np.float32(1.0)) * np.float32(0.5)
    if clamp:
        data = np.clip(data, 0.0, 1.0)
    return Image(data, UNIT)


def load_image(path) -> Image:
    """Decode an 8-bit RGB PNG into a unit-range Image."""
    try:
        with PILImage.open(path) as im:
            rgb = im.convert("RGB")
            data = np.asarray(rgb, dtype=np.float32) / np.float32(255.0)
    except Exception as exc:
        raise UnreadableImage(f"{path}: {exc}") from exc
    return Image(data, UNIT)


def encode_u8(data: np.ndarray) -> np.ndarray:
    """Clamp unit-range floats and round half-to-even to uint8."""
    return np.rint(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(img: Image, path) -> None:
    """Write an Image as 8-bit RGB PNG, atomically."""
    u8 = encode_u8(to_unit(img).data)
    atomic_write(path, lambda f: PILImage.fromarray(u8, mode="RGB").save(f, format="PNG"))


def atomic_write(path, write_fn) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            write_fn(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, payload: bytes) -> None:
    atomic_write(path, lambda f: f.write(payload))
