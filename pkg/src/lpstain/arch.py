"""Channel plans and analytic cost model for every network in the toolkit.

The single source of truth for tensor names and shapes; the weight store
validates against these plans and the benchmark derives its FLOP table from
them. Band-pass level k uses the (k+1) channel multiplier: 16(k+1) then
32(k+1) filters, mirrored in the generator half.
"""

import numpy as np

from .errors import UnknownModelKind

KIND_GENERATOR = "generator"
KIND_DISCRIMINATOR = "discriminator"
KIND_FEATURE_EXTRACTOR = "feature-extractor"

KIND_CODES = {KIND_GENERATOR: 1, KIND_DISCRIMINATOR: 2, KIND_FEATURE_EXTRACTOR: 3}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

# residual-pathway widths (encoder direction)
RES_ENC = [(3, 16), (16, 64)]          # plain convs
RES_ENC_BLOCKS = [(64, 128), (128, 256)]
RES_ENC_TAIL = (256, 256)
RES_GEN_BLOCKS = [(256, 128), (128, 64)]
RES_GEN = [(64, 16), (16, 3)]
RES_WIDTH = 256                        # deep-encoding channels at level K

DISC_CHANNELS = [64, 128, 256, 512]    # stride-2 stages, then a 1-channel head
FE_CHANNELS = [16, 32, 64, 128]        # stride-2 feature-extractor stages

SMN_ENC_HIDDEN = 64
SMN_DEC_HIDDEN = (64, 128)
DEFAULT_DS = 8
DEFAULT_K = 3


def bp_widths(k: int):
    """(narrow, wide) channel widths of band-pass pathway k."""
    return 16 * (k + 1), 32 * (k + 1)


def _conv(plan, name, cout, cin, ksize=3):
    plan[f"{name}.w"] = (cout, cin, ksize, ksize)
    plan[f"{name}.b"] = (cout,)


def _fc(plan, name, dout, din):
    plan[f"{name}.w"] = (dout, din)
    plan[f"{name}.b"] = (dout,)


def _resblock(plan, prefix, cin, cout):
    _conv(plan, f"{prefix}.conv1", cout, cin)
    _conv(plan, f"{prefix}.conv2", cout, cout)
    if cin != cout:
        _conv(plan, f"{prefix}.skip", cout, cin, ksize=1)


def generator_plan(K: int = DEFAULT_K, d_s: int = DEFAULT_DS) -> dict:
    plan = {}
    for k in range(K):
        c1, c2 = bp_widths(k)
        _conv(plan, f"enc.L{k}.conv1", c1, 3)
        _conv(plan, f"enc.L{k}.conv2", c2, c1)
        _conv(plan, f"gen.L{k}.conv1", c1, c2)
        _conv(plan, f"gen.L{k}.conv2", 3, c1)
    _conv(plan, f"enc.L{K}.conv1", 16, 3)
    _conv(plan, f"enc.L{K}.conv2", 64, 16)
    _resblock(plan, f"enc.L{K}.res1", *RES_ENC_BLOCKS[0])
    _resblock(plan, f"enc.L{K}.res2", *RES_ENC_BLOCKS[1])
    _conv(plan, f"enc.L{K}.conv3", *RES_ENC_TAIL)
    _resblock(plan, f"gen.L{K}.res1", *RES_GEN_BLOCKS[0])
    _resblock(plan, f"gen.L{K}.res2", *RES_GEN_BLOCKS[1])
    _conv(plan, f"gen.L{K}.conv1", 16, 64)
    _conv(plan, f"gen.L{K}.conv2", 3, 16)
    _fc(plan, "smn.enc.fc1", SMN_ENC_HIDDEN, RES_WIDTH)
    _fc(plan, "smn.enc.fc2", 2 * d_s, SMN_ENC_HIDDEN)
    _fc(plan, "smn.dec.fc1", SMN_DEC_HIDDEN[0], d_s)
    _fc(plan, "smn.dec.fc2", SMN_DEC_HIDDEN[1], SMN_DEC_HIDDEN[0])
    for k in range(K):
        _fc(plan, f"smn.dec.head{k}", 2 * bp_widths(k)[1], SMN_DEC_HIDDEN[1])
    _fc(plan, f"smn.dec.head{K}", 2 * RES_WIDTH, SMN_DEC_HIDDEN[1])
    plan["bp.sigma"] = (K,)
    return plan


def discriminator_plan(K: int = DEFAULT_K, d_s: int = DEFAULT_DS) -> dict:
    plan = {}
    for k in range(K + 1):
        cin = 3
        for i, cout in enumerate(DISC_CHANNELS, start=1):
            _conv(plan, f"disc.L{k}.conv{i}", cout, cin)
            cin = cout
        _conv(plan, f"disc.L{k}.conv{len(DISC_CHANNELS) + 1}", 1, cin)
    return plan


def feature_extractor_plan(K: int = DEFAULT_K, d_s: int = DEFAULT_DS) -> dict:
    plan = {}
    cin = 3
    for i, cout in enumerate(FE_CHANNELS, start=1):
        _conv(plan, f"fe.stage{i}", cout, cin)
        cin = cout
    return plan


_PLANS = {
    KIND_GENERATOR: generator_plan,
    KIND_DISCRIMINATOR: discriminator_plan,
    KIND_FEATURE_EXTRACTOR: feature_extractor_plan,
}


def plan_for(kind: str, K: int, d_s: int) -> dict:
    try:
        return _PLANS[kind](K, d_s)
    except KeyError:
        raise UnknownModelKind(f"unknown model kind {kind!r}") from None


# --- analytic cost model (convolution multiply-accumulates) ---

def _ceil_half(n, times=1):
    for _ in range(times):
        n = -(-n // 2)
    return n


def conv_macs(cin, cout, h, w, ksize=3):
    return cin * cout * ksize * ksize * h * w


def generator_pathway_macs(size: int, K: int = DEFAULT_K) -> dict:
    """MACs per pathway for one stain transfer of a size x size tile."""
    out = {}
    for k in range(K):
        c1, c2 = bp_widths(k)
        n = _ceil_half(size, k)
        out[f"bp{k}"] = (
            conv_macs(3, c1, n, n) + conv_macs(c1, c2, n, n)
            + conv_macs(c2, c1, n, n) + conv_macs(c1, 3, n, n)
        )
    n = _ceil_half(size, K)
    macs = conv_macs(3, 16, n, n) + conv_macs(16, 64, n, n)
    for cin, cout in RES_ENC_BLOCKS + RES_GEN_BLOCKS:
        macs += conv_macs(cin, cout, n, n) + conv_macs(cout, cout, n, n)
        macs += conv_macs(cin, cout, n, n, ksize=1)
    macs += conv_macs(*RES_ENC_TAIL, n, n)
    macs += conv_macs(64, 16, n, n) + conv_macs(16, 3, n, n)
    out["residual"] = macs
    return out


def generator_macs(size: int, K: int = DEFAULT_K, out_level: int = 0) -> int:
    per = generator_pathway_macs(size, K)
    return per["residual"] + sum(per[f"bp{k}"] for k in range(out_level, K))


def generator_flops(size: int, K: int = DEFAULT_K, out_level: int = 0) -> int:
    """Analytic FLOPs (2 per MAC) of the convolutional stack."""
    return 2 * generator_macs(size, K, out_level)


def hed_jitter_flops(size: int) -> int:
    # per pixel: OD transform, two 3x3 projections, jitter, inverse transform
    return size * size * 3 * (2 + 6 + 6 + 2 + 2)


def macenko_flops(size: int) -> int:
    # per pixel: OD transform, 3x3 covariance update, plane projection
    return size * size * 3 * (2 + 6 + 4)


def he_init(shape, rng: np.random.Generator) -> np.ndarray:
    """Seeded He-style fan-in normal initialization (zero for biases)."""
    if len(shape) == 1:
        return np.zeros(shape, dtype=np.float32)
    fan_in = int(np.prod(shape[1:]))
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(np.float32)
