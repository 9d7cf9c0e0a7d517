import numpy as np
import pytest

from lpstain import GeneratorWeights, Image
from lpstain import store
from lpstain.bench import synthetic_tile
from lpstain.objective import DiscriminatorWeights, FeatureExtractor


def tissue_tile(size: int, seed: int = 0) -> Image:
    """Smooth, tissue-like unit-range tile."""
    return synthetic_tile(size, seed)


def random_tile(size: int, seed: int = 0) -> Image:
    rng = np.random.default_rng(seed)
    return Image(rng.random((size, size, 3), dtype=np.float32), "unit")


def constant_tile(size: int, value: float) -> Image:
    return Image(np.full((size, size, 3), value, dtype=np.float32), "unit")


def naive_conv2d(x, w, b=None, stride=1):
    """Brute-force cross-correlation oracle: reflect pad 1, explicit loops."""
    cout, cin, kh, kw = w.shape
    H, W = x.shape[1], x.shape[2]
    mode = "reflect" if min(H, W) >= 2 else "edge"
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)), mode=mode)
    Ho, Wo = -(-H // stride), -(-W // stride)
    out = np.zeros((cout, Ho, Wo), dtype=np.float64)
    for co in range(cout):
        for i in range(Ho):
            for j in range(Wo):
                acc = 0.0
                for ci in range(cin):
                    for dy in range(kh):
                        for dx in range(kw):
                            acc += w[co, ci, dy, dx] * xp[ci, i * stride + dy, j * stride + dx]
                out[co, i, j] = acc + (b[co] if b is not None else 0.0)
    return out


@pytest.fixture(scope="session")
def gen_weights() -> GeneratorWeights:
    return GeneratorWeights.from_store(store.init_random("generator", seed=0))


@pytest.fixture(scope="session")
def disc_weights() -> DiscriminatorWeights:
    return DiscriminatorWeights.from_store(store.init_random("discriminator", seed=1))


@pytest.fixture(scope="session")
def feat_extractor() -> FeatureExtractor:
    return FeatureExtractor.from_store(store.init_random("feature-extractor", seed=2))
