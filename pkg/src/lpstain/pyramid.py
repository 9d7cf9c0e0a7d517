"""Gaussian/Laplacian pyramid construction, scaling statistics and exact inversion.

The decomposition is lossless by construction: each band-pass image is the
difference between a Gaussian level and the upsampled next level, and the
backward recurrence re-adds exactly the same upsampled terms.

Conventions (fixed for the whole toolkit):
  * low-pass filter: 5-tap binomial [1, 4, 6, 4, 1] / 16, applied separably
  * downsample: blur, then keep even-indexed rows/columns (ceil halving)
  * upsample: zero-insertion to the recorded parent dims, then blur with
    the doubled kernel
  * borders: whole-sample reflection ("mirror"), which preserves constants
    through both blur and zero-insertion upsampling
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .errors import (
    DegenerateScale,
    DimMismatch,
    DimsTooSmall,
    EmptyDataset,
    LevelOutOfRange,
)
from .imageio import Image, load_image, to_symmetric

BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0], dtype=np.float32) / np.float32(16.0)


@dataclass(frozen=True)
class PyramidConfig:
    """Max level K plus the separable low-pass kernel."""

    K: int = 3
    kernel: np.ndarray = field(default_factory=lambda: BINOMIAL5.copy())
    border_mode: str = "reflect"

    def __post_init__(self):
        if self.K < 1:
            raise LevelOutOfRange(f"K must be >= 1, got {self.K}")
        k = np.asarray(self.kernel, dtype=np.float32)
        if abs(float(k.sum()) - 1.0) > 1e-7:
            raise DimMismatch("kernel taps must sum to 1")
        if not np.allclose(k, k[::-1]):
            raise DimMismatch("kernel must be symmetric")


@dataclass(frozen=True)
class GaussianPyramid:
    levels: list  # I_0 .. I_K, float32 HxWx3
    range_tag: str


@dataclass(frozen=True)
class LaplacianPyramid:
    bandpass: list  # h_0 .. h_{K-1}, float32 HxWx3
    residual: np.ndarray  # I_K
    range_tag: str

    @property
    def K(self) -> int:
        return len(self.bandpass)


@dataclass(frozen=True)
class BPScales:
    """Per-level band-pass scale sigma_k with its reciprocal rho_k."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.ndim != 1 or (s <= 0).any():
            raise DegenerateScale(f"sigma must be positive, got {s}")
        object.__setattr__(self, "sigma", s)

    @property
    def rho(self) -> np.ndarray:
        return 1.0 / self.sigma


def _blur(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = correlate1d(data, kernel, axis=0, mode="mirror")
    return correlate1d(out, kernel, axis=1, mode="mirror")


def _downsample(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(_blur(data, kernel)[::2, ::2])


def _upsample(data: np.ndarray, target_hw, kernel: np.ndarray) -> np.ndarray:
    th, tw = target_hw
    h, w = data.shape[:2]
    if h != -(-th // 2) or w != -(-tw // 2):
        raise DimMismatch(f"cannot upsample {(h, w)} to {(th, tw)}")
    up = np.zeros((th, tw) + data.shape[2:], dtype=data.dtype)
    up[::2, ::2] = data
    return _blur(up, (kernel * np.float32(2.0)).astype(np.float32))


def _check_dims(img: Image, cfg: PyramidConfig) -> None:
    h, w = img.data.shape[:2]
    if h < 2 ** cfg.K or w < 2 ** cfg.K:
        raise DimsTooSmall(f"{h}x{w} image cannot carry a K={cfg.K} pyramid")


def build_gaussian(img: Image, cfg: PyramidConfig) -> GaussianPyramid:
    """Iteratively blur and downsample: levels I_0 .. I_K."""
    _check_dims(img, cfg)
    kernel = np.asarray(cfg.kernel, dtype=np.float32)
    levels = [np.ascontiguousarray(img.data, dtype=np.float32)]
    for _ in range(cfg.K):
        levels.append(_downsample(levels[-1], kernel))
    return GaussianPyramid(levels, img.range_tag)


def build_laplacian(img: Image, cfg: PyramidConfig) -> LaplacianPyramid:
    """Band-pass images h_k = I_k - up(I_{k+1}) plus the residual I_K."""
    gp = build_gaussian(img, cfg)
    kernel = np.asarray(cfg.kernel, dtype=np.float32)
    bandpass = [
        gp.levels[k] - _upsample(gp.levels[k + 1], gp.levels[k].shape[:2], kernel)
        for k in range(cfg.K)
    ]
    return LaplacianPyramid(bandpass, gp.levels[cfg.K], gp.range_tag)


def reconstruct_at_level(lp: LaplacianPyramid, level: int, cfg: PyramidConfig) -> Image:
    """Run the backward recurrence down to `level`, returning I_level."""
    if not 0 <= level <= lp.K:
        raise LevelOutOfRange(f"level {level} outside [0, {lp.K}]")
    kernel = np.asarray(cfg.kernel, dtype=np.float32)
    cur = lp.residual
    for k in range(lp.K - 1, level - 1, -1):
        h = lp.bandpass[k]
        cur = h + _upsample(cur, h.shape[:2], kernel)
    return Image(cur, lp.range_tag)


def reconstruct(lp: LaplacianPyramid, cfg: PyramidConfig) -> Image:
    """Exact inverse of build_laplacian (level-0 reconstruction)."""
    return reconstruct_at_level(lp, 0, cfg)


def compute_bp_scales(image_paths, cfg: PyramidConfig) -> BPScales:
    """sigma_k = mean over images of max |h_k|, on symmetric-range pixels.

    Raises DegenerateScale when a level's statistic collapses to zero
    (e.g. a dataset of constant images).
    """
    paths = list(image_paths)
    if not paths:
        raise EmptyDataset("no images supplied for band-pass statistics")
    acc = np.zeros(cfg.K, dtype=np.float64)
    for path in paths:
        lp = build_laplacian(to_symmetric(load_image(path)), cfg)
        for k in range(cfg.K):
            acc[k] += float(np.abs(lp.bandpass[k]).max())
    sigma = acc / len(paths)
    if (sigma <= 0).any():
        raise DegenerateScale(
            f"zero band-pass statistic at levels {np.nonzero(sigma <= 0)[0].tolist()}"
        )
    return BPScales(sigma)
