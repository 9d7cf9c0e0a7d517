"""Training objectives as pure evaluators: seven losses, a multi-resolution
patch discriminator, and the identity / cyclic composite passes.

No gradients, no optimizer; everything here exists so the losses can be
oracle-tested and so a training front-end can be bolted on later.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import arch, generator
from .errors import ShapeMismatch
from .generator import GeneratorWeights, StainVector
from .imageio import Image, to_symmetric
from .nnkernels import ConvSpec, conv2d, instance_norm, leaky_relu
from .pyramid import (
    LaplacianPyramid,
    PyramidConfig,
    reconstruct,
    reconstruct_at_level,
)


@dataclass(frozen=True)
class LossWeights:
    """Per-term weights of the combined objective plus per-level m_k."""

    lambda_id: float = 1.0
    lambda_vae: float = 0.01
    lambda_cc: float = 10.0
    lambda_sp: float = 0.5
    lambda_lr: float = 10.0
    lambda_ms: float = 0.02
    m: tuple = None  # per-level reconstruction weights, default all ones
    eps_ms: float = 1e-8

    def __post_init__(self):
        for name in ("lambda_id", "lambda_vae", "lambda_cc", "lambda_sp",
                     "lambda_lr", "lambda_ms"):
            if getattr(self, name) < 0:
                raise ShapeMismatch(f"{name} must be >= 0")
        if self.eps_ms <= 0:
            raise ShapeMismatch("eps_ms must be > 0")


def _level_weights(m, n_levels):
    if m is None:
        return np.ones(n_levels)
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (n_levels,):
        raise ShapeMismatch(f"expected {n_levels} level weights, got {m.shape}")
    if (m < 0).any():
        raise ShapeMismatch("level weights must be >= 0")
    return m


def _pyramid_l1(lp_a: LaplacianPyramid, lp_b: LaplacianPyramid, m) -> float:
    if lp_a.K != lp_b.K:
        raise ShapeMismatch(f"pyramid depths differ: {lp_a.K} vs {lp_b.K}")
    levels_a = list(lp_a.bandpass) + [lp_a.residual]
    levels_b = list(lp_b.bandpass) + [lp_b.residual]
    m = _level_weights(m, len(levels_a))
    total = 0.0
    for k, (a, b) in enumerate(zip(levels_a, levels_b)):
        if a.shape != b.shape:
            raise ShapeMismatch(f"level {k}: {a.shape} vs {b.shape}")
        total += m[k] * float(np.abs(a.astype(np.float64) - b).mean())
    return total


def loss_identity(lp_in: LaplacianPyramid, lp_rec: LaplacianPyramid, m=None) -> float:
    """Weighted per-level mean-L1 between input and identity reconstruction."""
    return _pyramid_l1(lp_in, lp_rec, m)


def loss_cross_cycle(lp_in: LaplacianPyramid, lp_cyc: LaplacianPyramid, m=None) -> float:
    """Same functional form as the identity loss, on the cyclic reconstruction."""
    return _pyramid_l1(lp_in, lp_cyc, m)


def loss_vae(stain: StainVector) -> float:
    """Closed-form KL divergence to the standard normal prior."""
    mu = stain.mu.astype(np.float64)
    logvar = stain.logvar.astype(np.float64)
    return 0.5 * float(np.sum(mu * mu + np.exp(logvar) - logvar - 1.0))


def loss_latent_regression(z_r: np.ndarray, z_out: np.ndarray) -> float:
    """Mean-L1 between the drawn stain vector and the re-extracted one."""
    a = np.asarray(z_r, dtype=np.float64).ravel()
    b = np.asarray(z_out, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeMismatch(f"stain lengths differ: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def loss_mode_seeking(z_r1, z_r2, img_r1: Image, img_r2: Image,
                      eps: float = 1e-8) -> float:
    """Diversity ratio: latent distance over image distance (plus stabilizer)."""
    if img_r1.data.shape != img_r2.data.shape:
        raise ShapeMismatch("mode-seeking images must share dims")
    z_gap = float(np.abs(np.asarray(z_r1, np.float64) - np.asarray(z_r2, np.float64)).mean())
    img_gap = float(np.abs(img_r1.data.astype(np.float64) - img_r2.data).mean())
    return z_gap / (img_gap + eps)


# --- structure-preserving (perceptual) loss ---

@dataclass(frozen=True)
class FeatureExtractor:
    """Strictly downsampling conv stages; slope 1.0 makes the stages linear."""

    stages: tuple  # ((w, b), ...)
    slope: float = 0.2

    @classmethod
    def from_store(cls, ws) -> "FeatureExtractor":
        if ws.kind != arch.KIND_FEATURE_EXTRACTOR:
            raise ShapeMismatch(f"expected feature-extractor store, got {ws.kind}")
        stages = []
        for i in range(1, len(arch.FE_CHANNELS) + 1):
            stages.append((ws.tensors[f"fe.stage{i}.w"], ws.tensors[f"fe.stage{i}.b"]))
        return cls(stages=tuple(stages))

    def forward(self, x: np.ndarray):
        """Feature maps after each stride-2 stage, for a CHW input."""
        feats = []
        for w, b in self.stages:
            x = leaky_relu(conv2d(x, ConvSpec(w.shape[1], w.shape[0], stride=2), w, b),
                           self.slope)
            feats.append(x)
        return feats


def loss_structure(img_in: Image, img_out: Image, fe: FeatureExtractor) -> float:
    """Instance-normalized perceptual distance, averaged per feature element."""
    if img_in.data.shape != img_out.data.shape:
        raise ShapeMismatch("structure loss requires equal image dims")
    a = generator._chw(to_symmetric(img_in).data)
    b = generator._chw(to_symmetric(img_out).data)
    total = 0.0
    for fa, fb in zip(fe.forward(a), fe.forward(b)):
        diff = instance_norm(fa) - instance_norm(fb)
        total += float(np.mean(diff.astype(np.float64) ** 2))
    return total


# --- multi-resolution discriminator ---

@dataclass(frozen=True)
class DiscriminatorWeights:
    K: int
    tensors: dict

    @classmethod
    def from_store(cls, ws) -> "DiscriminatorWeights":
        if ws.kind != arch.KIND_DISCRIMINATOR:
            raise ShapeMismatch(f"expected discriminator store, got {ws.kind}")
        return cls(K=ws.K, tensors=dict(ws.tensors))


def discriminate(lp: LaplacianPyramid, dw: DiscriminatorWeights,
                 cfg: PyramidConfig = None):
    """Patch score maps, one per pyramid level.

    Each level's image is the multi-resolution reconstruction at that level,
    scored by that level's (identical-architecture) conv stack.
    """
    if lp.K != dw.K:
        raise ShapeMismatch(f"pyramid K={lp.K} vs discriminator K={dw.K}")
    cfg = cfg or PyramidConfig(K=lp.K)
    n_stages = len(arch.DISC_CHANNELS)
    scores = []
    for k in range(lp.K + 1):
        x = generator._chw(reconstruct_at_level(lp, k, cfg).data)
        for i in range(1, n_stages + 1):
            w = dw.tensors[f"disc.L{k}.conv{i}.w"]
            x = leaky_relu(conv2d(x, ConvSpec(w.shape[1], w.shape[0], stride=2),
                                  w, dw.tensors[f"disc.L{k}.conv{i}.b"]))
        w = dw.tensors[f"disc.L{k}.conv{n_stages + 1}.w"]
        x = conv2d(x, ConvSpec(w.shape[1], 1), w,
                   dw.tensors[f"disc.L{k}.conv{n_stages + 1}.b"])
        scores.append(x[0])
    return scores


def loss_adversarial(real_scores, fake_scores):
    """Least-squares GAN terms over per-level score maps.

    d_loss = 1/2 sum_k mean(fake_k^2) + 1/2 sum_k mean((1 - real_k)^2)
    g_loss = sum_k mean((1 - fake_k)^2)
    """
    if len(real_scores) != len(fake_scores):
        raise ShapeMismatch("score lists must have equal level counts")
    d_loss = 0.0
    g_loss = 0.0
    for real, fake in zip(real_scores, fake_scores):
        real = np.asarray(real, dtype=np.float64)
        fake = np.asarray(fake, dtype=np.float64)
        d_loss += 0.5 * float((fake ** 2).mean()) + 0.5 * float(((1.0 - real) ** 2).mean())
        g_loss += float(((1.0 - fake) ** 2).mean())
    return d_loss, g_loss


def total_objective(g_adv: float, losses: dict, lw: LossWeights) -> float:
    """Lambda-weighted sum of the generator-side objective."""
    return math.fsum([
        g_adv,
        lw.lambda_id * losses["id"],
        lw.lambda_vae * losses["vae"],
        lw.lambda_cc * losses["cc"],
        lw.lambda_sp * losses["sp"],
        lw.lambda_lr * losses["lr"],
        lw.lambda_ms * losses["ms"],
    ])


# --- composite passes ---

def mode_a_pass(img: Image, w: GeneratorWeights, seed: int, m=None) -> dict:
    """Identity reconstruction with a reparameterized draw of the own stain."""
    sym = to_symmetric(img)
    lp_in, z_K, bp_enc, stain = generator.encode(sym, w)
    rng = np.random.default_rng(seed)
    sample = generator.reparameterize(stain, rng)
    lp_rec = generator.decode_pyramid(z_K, bp_enc, generator.style_decode(sample, w), w)
    return {
        "reconstruction": reconstruct(lp_rec, w.cfg),
        "loss_id": loss_identity(lp_in, lp_rec, m),
        "loss_vae": loss_vae(stain),
    }


def mode_b_pass(img: Image, w: GeneratorWeights, dw: DiscriminatorWeights,
                fe: FeatureExtractor, lw: LossWeights, seed: int) -> dict:
    """Cyclic reconstruction pass evaluating all seven losses and the total.

    RNG draw order (fixed for reproducibility): first random stain, second
    random stain, then the reparameterization noise of the identity branch.
    """
    sym = to_symmetric(img)
    lp_in, z_K, bp_enc, stain = generator.encode(sym, w)
    rng = np.random.default_rng(seed)
    z_r1 = rng.standard_normal(w.d_s).astype(np.float32)
    z_r2 = rng.standard_normal(w.d_s).astype(np.float32)

    lp_out1 = generator.decode_pyramid(z_K, bp_enc, generator.style_decode(z_r1, w), w)
    lp_out2 = generator.decode_pyramid(z_K, bp_enc, generator.style_decode(z_r2, w), w)
    img_out1 = reconstruct(lp_out1, w.cfg)
    img_out2 = reconstruct(lp_out2, w.cfg)

    # reverse direction: re-encode the augmentation, restyle with the original stain
    _, z_K_out, bp_enc_out, stain_out = generator.encode(img_out1, w)
    lp_cyc = generator.decode_pyramid(z_K_out, bp_enc_out,
                                      generator.style_decode(stain.mu, w), w)

    # identity branch (Mode A with the shared rng stream)
    sample = generator.reparameterize(stain, rng)
    lp_rec = generator.decode_pyramid(z_K, bp_enc, generator.style_decode(sample, w), w)

    real = discriminate(lp_in, dw, w.cfg)
    fake = discriminate(lp_out1, dw, w.cfg)
    d_loss, g_loss = loss_adversarial(real, fake)

    losses = {
        "id": loss_identity(lp_in, lp_rec, lw.m),
        "vae": loss_vae(stain),
        "cc": loss_cross_cycle(lp_in, lp_cyc, lw.m),
        "sp": loss_structure(sym, img_out1, fe),
        "lr": loss_latent_regression(z_r1, stain_out.mu),
        "ms": loss_mode_seeking(z_r1, z_r2, img_out1, img_out2, lw.eps_ms),
        "adv_d": d_loss,
        "adv_g": g_loss,
    }
    return {
        "augmented": img_out1,
        "cyclic": reconstruct(lp_cyc, w.cfg),
        "losses": losses,
        "total": total_objective(g_loss, losses, lw),
    }
