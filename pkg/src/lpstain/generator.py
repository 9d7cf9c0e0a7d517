"""Multi-pathway stain-transfer generator over the Laplacian pyramid.

One heavy encoder/generator pair translates the low-resolution residual,
light two-conv pathways fine-tune each band-pass level, and an MLP style
mapping network encodes the stain as a Gaussian latent and decodes it into
per-pathway AdaIN (mean, std) targets. Band-pass inputs/outputs are scaled
by the non-learnable reciprocal pair rho_k = 1/sigma_k so every pathway sees
a roughly (-1, 1) dynamic range.

All functions are pure; weights are immutable and shareable across threads.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import arch
from .errors import RangeError, ShapeMismatch
from .imageio import SYMMETRIC, Image, to_symmetric, to_unit
from .nnkernels import (
    AdaINParams,
    ConvSpec,
    adain,
    conv2d,
    leaky_relu,
    mlp,
    resblock,
    softplus,
)
from .pyramid import LaplacianPyramid, PyramidConfig, build_laplacian, _upsample

BETA_FLOOR = 1e-3  # added after softplus so decoded stds stay strictly positive


@dataclass(frozen=True)
class GeneratorWeights:
    """Named tensors plus the pyramid configuration they were trained for."""

    K: int
    d_s: int
    tensors: dict
    cfg: PyramidConfig = None

    def __post_init__(self):
        if self.cfg is None:
            object.__setattr__(self, "cfg", PyramidConfig(K=self.K))

    @classmethod
    def from_store(cls, ws) -> "GeneratorWeights":
        if ws.kind != arch.KIND_GENERATOR:
            raise ShapeMismatch(f"expected generator store, got {ws.kind}")
        return cls(K=ws.K, d_s=ws.d_s, tensors=dict(ws.tensors))

    @property
    def sigma(self) -> np.ndarray:
        return self.tensors["bp.sigma"]


@dataclass(frozen=True)
class StainVector:
    """Latent stain code: posterior (mu, logvar) and, when drawn, a sample."""

    mu: np.ndarray
    logvar: Optional[np.ndarray] = None
    sample: Optional[np.ndarray] = None


@dataclass(frozen=True)
class StainParamSet:
    """AdaIN targets per band-pass pathway plus the residual pathway."""

    bp: list  # AdaINParams for k = 0 .. K-1
    residual: AdaINParams


def _conv(w: GeneratorWeights, name: str, x: np.ndarray, stride: int = 1) -> np.ndarray:
    wt = w.tensors[f"{name}.w"]
    return conv2d(x, ConvSpec(wt.shape[1], wt.shape[0], stride), wt,
                  w.tensors[f"{name}.b"])


def _res(w: GeneratorWeights, prefix: str, x: np.ndarray) -> np.ndarray:
    keys = ("conv1.w", "conv1.b", "conv2.w", "conv2.b", "skip.w", "skip.b")
    sub = {k: w.tensors[f"{prefix}.{k}"] for k in keys if f"{prefix}.{k}" in w.tensors}
    return resblock(x, sub)


def _chw(img_data: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(img_data, 2, 0))


def _hwc(t: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(t, 0, 2))


def _residual_encoder(w: GeneratorWeights, x: np.ndarray) -> np.ndarray:
    K = w.K
    y = leaky_relu(_conv(w, f"enc.L{K}.conv1", x))
    y = leaky_relu(_conv(w, f"enc.L{K}.conv2", y))
    y = _res(w, f"enc.L{K}.res1", y)
    y = _res(w, f"enc.L{K}.res2", y)
    return _conv(w, f"enc.L{K}.conv3", y)


def _residual_generator(w: GeneratorWeights, z: np.ndarray) -> np.ndarray:
    K = w.K
    y = _res(w, f"gen.L{K}.res1", leaky_relu(z))
    y = _res(w, f"gen.L{K}.res2", y)
    y = leaky_relu(_conv(w, f"gen.L{K}.conv1", y))
    return _conv(w, f"gen.L{K}.conv2", y)


def _bp_encoder(w: GeneratorWeights, k: int, h_scaled: np.ndarray) -> np.ndarray:
    y = leaky_relu(_conv(w, f"enc.L{k}.conv1", h_scaled))
    return _conv(w, f"enc.L{k}.conv2", y)


def _bp_core(w: GeneratorWeights, k: int, encoding: np.ndarray,
             params: AdaINParams) -> np.ndarray:
    """AdaIN restyling plus the light generator convs of band-pass level k."""
    y = leaky_relu(adain(encoding, params))
    y = leaky_relu(_conv(w, f"gen.L{k}.conv1", y))
    return _conv(w, f"gen.L{k}.conv2", y)


def _smn_encode(w: GeneratorWeights, z_K: np.ndarray) -> StainVector:
    pooled = z_K.mean(axis=(1, 2))
    out = mlp(pooled, [
        (w.tensors["smn.enc.fc1.w"], w.tensors["smn.enc.fc1.b"]),
        (w.tensors["smn.enc.fc2.w"], w.tensors["smn.enc.fc2.b"]),
    ])
    return StainVector(mu=out[: w.d_s].copy(), logvar=out[w.d_s :].copy())


def style_decode(stain_sample: np.ndarray, w: GeneratorWeights) -> StainParamSet:
    """Map a stain sample to per-pathway AdaIN (alpha, beta) targets."""
    s = np.asarray(stain_sample, dtype=np.float32).ravel()
    if s.shape[0] != w.d_s:
        raise ShapeMismatch(f"stain sample length {s.shape[0]}, expected {w.d_s}")
    trunk = leaky_relu(mlp(s, [
        (w.tensors["smn.dec.fc1.w"], w.tensors["smn.dec.fc1.b"]),
        (w.tensors["smn.dec.fc2.w"], w.tensors["smn.dec.fc2.b"]),
    ]))

    def head(k):
        out = w.tensors[f"smn.dec.head{k}.w"] @ trunk + w.tensors[f"smn.dec.head{k}.b"]
        c = out.shape[0] // 2
        return AdaINParams(out[:c], softplus(out[c:]) + np.float32(BETA_FLOOR))

    return StainParamSet(bp=[head(k) for k in range(w.K)], residual=head(w.K))


def encode_lp(lp: LaplacianPyramid, w: GeneratorWeights):
    """Deep encodings of a symmetric-range pyramid: (z_K, bp encodings, stain)."""
    sigma = w.sigma.astype(np.float32)
    z_K = _residual_encoder(w, _chw(lp.residual))
    bp_encodings = [
        _bp_encoder(w, k, _chw(lp.bandpass[k]) * (np.float32(1.0) / sigma[k]))
        for k in range(w.K)
    ]
    return z_K, bp_encodings, _smn_encode(w, z_K)


def encode(img: Image, w: GeneratorWeights):
    """Build the pyramid and encode: (lp, z_K, bp encodings, stain vector)."""
    lp = build_laplacian(to_symmetric(img), w.cfg)
    z_K, bp_encodings, stain = encode_lp(lp, w)
    return lp, z_K, bp_encodings, stain


def decode_pyramid(z_K: np.ndarray, bp_encodings, params: StainParamSet,
                   w: GeneratorWeights, out_level: int = 0) -> LaplacianPyramid:
    """Restyle encodings into an output pyramid (band-pass levels >= out_level)."""
    residual = _hwc(_residual_generator(w, adain(z_K, params.residual)))
    bandpass = [None] * w.K
    sigma = w.sigma.astype(np.float32)
    for k in range(out_level, w.K):
        bandpass[k] = _hwc(_bp_core(w, k, bp_encodings[k], params.bp[k])) * sigma[k]
    return LaplacianPyramid(bandpass, residual, SYMMETRIC)


def _collapse(lp: LaplacianPyramid, out_level: int, cfg: PyramidConfig) -> np.ndarray:
    kernel = np.asarray(cfg.kernel, dtype=np.float32)
    cur = lp.residual
    for k in range(lp.K - 1, out_level - 1, -1):
        cur = lp.bandpass[k] + _upsample(cur, lp.bandpass[k].shape[:2], kernel)
    return cur


def transfer_pyramid(img: Image, stain_sample: np.ndarray,
                     w: GeneratorWeights) -> LaplacianPyramid:
    """Full output pyramid of a stain transfer (all band-pass levels)."""
    _, z_K, bp_encodings, _ = encode(img, w)
    return decode_pyramid(z_K, bp_encodings, style_decode(stain_sample, w), w)


def transfer(img: Image, stain_sample: np.ndarray, w: GeneratorWeights,
             out_level: int = 0) -> Image:
    """Restyle `img` with the given stain sample; output at 1/2^out_level scale.

    Band-pass pathways below out_level are skipped entirely, which is what
    makes lower-resolution operation cheaper than full-resolution transfer.
    """
    if not 0 <= out_level <= w.K - 1:
        raise RangeError(f"out_level {out_level} outside [0, {w.K - 1}]")
    _, z_K, bp_encodings, _ = encode(img, w)
    out_lp = decode_pyramid(z_K, bp_encodings, style_decode(stain_sample, w), w,
                            out_level=out_level)
    return to_unit(Image(_collapse(out_lp, out_level, w.cfg), SYMMETRIC))


def extract_stain_lp(lp: LaplacianPyramid, w: GeneratorWeights) -> StainVector:
    """Stain code of a symmetric-range pyramid; reads only the residual level."""
    return _smn_encode(w, _residual_encoder(w, _chw(lp.residual)))


def extract_stain(img: Image, w: GeneratorWeights) -> StainVector:
    return extract_stain_lp(build_laplacian(to_symmetric(img), w.cfg), w)


def reparameterize(stain: StainVector, rng: np.random.Generator) -> np.ndarray:
    """VAE draw: mu + exp(logvar / 2) * n with n standard normal."""
    n = rng.standard_normal(stain.mu.shape[0]).astype(np.float32)
    return stain.mu + np.exp(stain.logvar * np.float32(0.5)) * n


def augment_random(img: Image, seed: int, w: GeneratorWeights,
                   out_level: int = 0):
    """Seeded random stain augmentation: (output image, drawn stain vector)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(w.d_s).astype(np.float32)
    out = transfer(img, z, w, out_level=out_level)
    return out, StainVector(mu=z, sample=z)


def interpolate_stain(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Linear interpolation (1-t) a + t b between stain vectors."""
    a = np.asarray(a, dtype=np.float32).ravel()
    b = np.asarray(b, dtype=np.float32).ravel()
    if a.shape != b.shape:
        raise ShapeMismatch(f"stain lengths differ: {a.shape} vs {b.shape}")
    if not 0.0 <= t <= 1.0:
        raise RangeError(f"t must be in [0, 1], got {t}")
    return (1.0 - np.float32(t)) * a + np.float32(t) * b
