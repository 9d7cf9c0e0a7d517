"""Dense inference kernels: conv2d, activations, normalizations, AdaIN, ResBlock, MLP.

All kernels are pure functions over float32 CHW tensors and are deterministic:
identical inputs and weights give bit-identical outputs across runs. The
convolution is an exact cross-correlation (no kernel flip) with reflect
padding 1, evaluated as chunked im2col + sgemm so BLAS does the heavy lifting.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannel, NonpositiveBeta, ShapeMismatch

EPS_DEFAULT = 1e-5
LEAKY_SLOPE = 0.2

# im2col scratch budget per conv call
_COL_BYTES = 64 << 20


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    stride: int = 1

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeMismatch("channel counts must be >= 1")
        if self.stride not in (1, 2):
            raise ShapeMismatch(f"stride must be 1 or 2, got {self.stride}")


@dataclass(frozen=True)
class AdaINParams:
    """Per-channel target mean alpha and target std beta."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float32).ravel()
        b = np.asarray(self.beta, dtype=np.float32).ravel()
        if a.shape != b.shape:
            raise ShapeMismatch("alpha/beta length mismatch")
        if (b <= 0).any():
            raise NonpositiveBeta("beta must be strictly positive per channel")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)


def _pad_reflect(x: np.ndarray) -> np.ndarray:
    # whole-sample reflection; 1x1 maps degenerate to edge replication
    mode = "reflect" if min(x.shape[1], x.shape[2]) >= 2 else "edge"
    return np.pad(x, ((0, 0), (1, 1), (1, 1)), mode=mode)


def conv2d(x: np.ndarray, spec: ConvSpec, weights: np.ndarray, bias=None) -> np.ndarray:
    """3x3 cross-correlation, reflect padding 1, stride 1 (same size) or 2 (ceil-halved).

    x: (Cin, H, W); weights: (Cout, Cin, 3, 3); bias: (Cout,) or None.
    """
    cin, H, W = x.shape
    if cin != spec.in_channels or weights.shape != (spec.out_channels, cin, 3, 3):
        raise ShapeMismatch(
            f"conv2d: input {x.shape}, weights {weights.shape} vs spec {spec}"
        )
    s = spec.stride
    Ho, Wo = -(-H // s), -(-W // s)
    cout = spec.out_channels
    xp = _pad_reflect(np.ascontiguousarray(x, dtype=np.float32))
    w2 = np.ascontiguousarray(weights, dtype=np.float32).reshape(cout, cin * 9)

    chunk = max(1, _COL_BYTES // (cin * 9 * Wo * 4))
    out = np.empty((cout, Ho, Wo), dtype=np.float32)
    col = np.empty((cin, 3, 3, min(chunk, Ho), Wo), dtype=np.float32)
    for r0 in range(0, Ho, chunk):
        r1 = min(r0 + chunk, Ho)
        n = r1 - r0
        for dy in range(3):
            for dx in range(3):
                col[:, dy, dx, :n] = xp[
                    :,
                    r0 * s + dy : (r1 - 1) * s + dy + 1 : s,
                    dx : dx + (Wo - 1) * s + 1 : s,
                ]
        block = np.matmul(w2, col[:, :, :, :n].reshape(cin * 9, n * Wo))
        out[:, r0:r1] = block.reshape(cout, n, Wo)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float32)[:, None, None]
    return out


def conv1x1(x: np.ndarray, weights: np.ndarray, bias=None) -> np.ndarray:
    """Pointwise channel projection; weights (Cout, Cin) or (Cout, Cin, 1, 1)."""
    w = np.asarray(weights, dtype=np.float32).reshape(weights.shape[0], -1)
    if w.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"conv1x1: {w.shape} vs input {x.shape}")
    out = np.matmul(w, x.reshape(x.shape[0], -1)).reshape(w.shape[0], *x.shape[1:])
    if bias is not None:
        out += np.asarray(bias, dtype=np.float32)[:, None, None]
    return out


def leaky_relu(x: np.ndarray, slope: float = LEAKY_SLOPE) -> np.ndarray:
    return np.maximum(x, np.float32(slope) * x)


def instance_norm(x: np.ndarray, eps: float = EPS_DEFAULT) -> np.ndarray:
    """Standardize each channel over its spatial extent (population statistics)."""
    if x.ndim != 3:
        raise ShapeMismatch(f"instance_norm expects CHW, got {x.shape}")
    if x.shape[1] * x.shape[2] < 2:
        raise DegenerateChannel(f"spatial size {x.shape[1:]} < 2")
    mean = x.mean(axis=(1, 2), keepdims=True)
    var = x.var(axis=(1, 2), keepdims=True)
    return (x - mean) / np.sqrt(var + np.float32(eps))


def adain(x: np.ndarray, p: AdaINParams, eps: float = EPS_DEFAULT) -> np.ndarray:
    """Impose target per-channel mean/std: IN(x) * beta + alpha."""
    if p.alpha.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"adain: {p.alpha.shape[0]} params vs {x.shape[0]} channels")
    return instance_norm(x, eps) * p.beta[:, None, None] + p.alpha[:, None, None]


def layer_norm(x: np.ndarray, eps: float = EPS_DEFAULT) -> np.ndarray:
    """Standardize over all channel and spatial elements of the instance."""
    mean = x.mean()
    var = x.var()
    return (x - mean) / np.sqrt(var + np.float32(eps))


def resblock(x: np.ndarray, weights: dict, eps: float = EPS_DEFAULT,
             slope: float = LEAKY_SLOPE) -> np.ndarray:
    """Two pre-norm stages (LayerNorm -> LeakyReLU -> conv3x3) plus a skip path.

    weights keys: conv1.w/.b (Cout,Cin,3,3), conv2.w/.b (Cout,Cout,3,3) and,
    when Cin != Cout, skip.w/.b (Cout,Cin,1,1).
    """
    cout = weights["conv1.w"].shape[0]
    cin = weights["conv1.w"].shape[1]
    y = conv2d(leaky_relu(layer_norm(x, eps), slope), ConvSpec(cin, cout),
               weights["conv1.w"], weights.get("conv1.b"))
    y = conv2d(leaky_relu(layer_norm(y, eps), slope), ConvSpec(cout, cout),
               weights["conv2.w"], weights.get("conv2.b"))
    if cin == cout:
        skip = x
    else:
        skip = conv1x1(x, weights["skip.w"], weights.get("skip.b"))
    return y + skip


def mlp(v: np.ndarray, layers, slope: float = LEAKY_SLOPE) -> np.ndarray:
    """Affine layers with LeakyReLU between them; the final layer stays linear.

    layers: sequence of (W, b) with W shaped (out, in).
    """
    out = np.asarray(v, dtype=np.float32).ravel()
    for i, (w, b) in enumerate(layers):
        if w.shape[1] != out.shape[0]:
            raise ShapeMismatch(f"mlp layer {i}: {w.shape} applied to {out.shape}")
        out = w @ out + b
        if i < len(layers) - 1:
            out = leaky_relu(out, slope)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(np.float32(0.0), x).astype(np.float32)
