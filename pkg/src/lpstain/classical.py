"""Non-learned stain baselines: HED color-deconvolution jitter and Macenko
stain-vector separation.

Color mixing is linear in optical density (Beer-Lambert): OD = -log10 of
transmitted intensity, floored at delta = 1/255 so black pixels stay finite.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCloud, InsufficientTissue, RangeError, ShapeMismatch
from .imageio import Image, to_unit

OD_FLOOR = 1.0 / 255.0
DEFAULT_IO_CUTOFF = 0.15
DEFAULT_ALPHA_PERCENTILE = 1.0
_MIN_TISSUE_FRACTION = 1e-3

# Ruifrok/Johnston optical-density stain vectors (H, E, DAB), rows normalized.
_RAW_HED = np.array([
    [0.65, 0.70, 0.29],
    [0.07, 0.99, 0.11],
    [0.27, 0.57, 0.78],
])


@dataclass(frozen=True)
class StainMatrix:
    """3x3 matrix of unit-norm optical-density stain vectors (rows)."""

    rows: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.rows, dtype=np.float64)
        if m.shape != (3, 3):
            raise ShapeMismatch(f"stain matrix must be 3x3, got {m.shape}")
        norms = np.linalg.norm(m, axis=1)
        if np.abs(norms - 1.0).max() > 1e-6:
            raise ShapeMismatch(f"stain rows must be unit norm, got norms {norms}")
        if (m < 0).any():
            raise ShapeMismatch("stain rows must be nonnegative")
        object.__setattr__(self, "rows", m)

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.rows)

    def to_json(self) -> str:
        return json.dumps({
            "H": self.rows[0].tolist(),
            "E": self.rows[1].tolist(),
            "residual": self.rows[2].tolist(),
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StainMatrix":
        obj = json.loads(text)
        try:
            rows = np.array([obj["H"], obj["E"], obj["residual"]], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ShapeMismatch(f"bad stain-matrix JSON: {exc}") from None
        return cls(rows)


def _normalized(rows) -> StainMatrix:
    m = np.asarray(rows, dtype=np.float64)
    return StainMatrix(m / np.linalg.norm(m, axis=1, keepdims=True))


DEFAULT_STAIN_MATRIX = _normalized(_RAW_HED)


@dataclass(frozen=True)
class JitterConfig:
    """Uniform multiplicative/additive HED channel noise bounds."""

    alpha_range: tuple = (0.95, 1.05)
    beta_range: tuple = (-0.05, 0.05)
    seed: int = 0

    def __post_init__(self):
        if not self.alpha_range[0] <= 1.0 <= self.alpha_range[1]:
            raise RangeError(f"alpha_range {self.alpha_range} must contain 1")
        if not self.beta_range[0] <= 0.0 <= self.beta_range[1]:
            raise RangeError(f"beta_range {self.beta_range} must contain 0")


def rgb_to_od(rgb: np.ndarray) -> np.ndarray:
    return -np.log10(np.maximum(rgb, OD_FLOOR))


def od_to_rgb(od: np.ndarray) -> np.ndarray:
    return np.power(10.0, -od)


def rgb_to_hed(img: Image, m: StainMatrix = DEFAULT_STAIN_MATRIX) -> np.ndarray:
    """Project unit-range RGB into stain concentrations (H, E, residual)."""
    rgb = to_unit(img).data.astype(np.float64)
    return rgb_to_od(rgb) @ m.inverse


def hed_to_rgb(hed: np.ndarray, m: StainMatrix = DEFAULT_STAIN_MATRIX) -> Image:
    """Compose stain concentrations back to a clamped unit-range image."""
    rgb = od_to_rgb(hed @ m.rows)
    return Image(np.clip(rgb, 0.0, 1.0).astype(np.float32), "unit")


def hed_jitter(img: Image, cfg: JitterConfig,
               m: StainMatrix = DEFAULT_STAIN_MATRIX) -> Image:
    """Channel-wise multiplicative and additive noise in HED space."""
    rng = np.random.default_rng(cfg.seed)
    alpha = rng.uniform(*cfg.alpha_range, size=3)
    beta = rng.uniform(*cfg.beta_range, size=3)
    hed = rgb_to_hed(img, m)
    return hed_to_rgb(hed * alpha + beta, m)


def macenko_separate(img: Image, io_cutoff: float = DEFAULT_IO_CUTOFF,
                     alpha_percentile: float = DEFAULT_ALPHA_PERCENTILE,
                     od_floor: float = OD_FLOOR) -> StainMatrix:
    """Estimate the H/E stain vectors from the optical-density point cloud.

    Fits the dominant OD plane via the top two principal directions and takes
    the stain vectors at the extreme angular percentiles. Rows are ordered
    H first using the heuristic that hematoxylin carries the larger
    blue-channel optical density.
    """
    rgb = to_unit(img).data.astype(np.float64).reshape(-1, 3)
    od = -np.log10(np.maximum(rgb, od_floor))
    tissue = od[(od > io_cutoff).any(axis=1)]
    if tissue.shape[0] < max(10, _MIN_TISSUE_FRACTION * od.shape[0]):
        raise InsufficientTissue(
            f"{tissue.shape[0]}/{od.shape[0]} pixels above OD cutoff {io_cutoff}"
        )

    # canonical pixel order: the estimate is a set statistic, so shuffling the
    # input pixels must not change it even at the last floating-point bit
    tissue = tissue[np.lexsort((tissue[:, 2], tissue[:, 1], tissue[:, 0]))]

    cov = np.cov(tissue, rowvar=False)
    evals, evecs = np.linalg.eigh(cov)
    if evals[1] <= 1e-10 * max(evals[2], 1e-30) or evals[1] <= 1e-12:
        raise DegenerateCloud("optical-density cloud is effectively rank-1")
    basis = evecs[:, [2, 1]]  # top two principal directions, columns
    # orient so projections land in the right half-plane
    if (tissue @ basis[:, 0]).sum() < 0:
        basis[:, 0] = -basis[:, 0]

    proj = tissue @ basis
    phi = np.arctan2(proj[:, 1], proj[:, 0])
    lo = np.percentile(phi, alpha_percentile)
    hi = np.percentile(phi, 100.0 - alpha_percentile)

    def stain_vec(angle):
        v = basis @ np.array([np.cos(angle), np.sin(angle)])
        if v.sum() < 0:
            v = -v
        v = np.maximum(v, 0.0)
        return v / np.linalg.norm(v)

    v1, v2 = stain_vec(lo), stain_vec(hi)
    h, e = (v1, v2) if v1[2] > v2[2] else (v2, v1)
    res = np.abs(np.cross(h, e))
    res /= np.linalg.norm(res)
    return StainMatrix(np.stack([h, e, res]))
