"""Timing harness over the augmentation methods, with an analytic FLOP table.

Timings are medians of wall-clock repetitions on synthetic tissue-like tiles;
FLOP figures are closed-form counts from the channel plans (independent of
any measurement). CSV rows use the fixed header: method,size,median_s,flops.
"""

import io
import statistics
import time

import numpy as np
from scipy.ndimage import gaussian_filter

from . import arch, classical, generator
from .imageio import Image

CSV_HEADER = "method,size,median_s,flops"
DEFAULT_SIZES = (256, 512, 1024, 2048)
METHODS = ("gsan@k0", "gsan@k1", "hed-jitter", "macenko")


def synthetic_tile(size: int, seed: int = 0) -> Image:
    """Tissue-like tile: smooth stain concentration fields composed in OD space."""
    rng = np.random.default_rng(seed)
    sigma = max(2.0, size / 32.0)
    conc_h = gaussian_filter(rng.random((size, size)), sigma)
    conc_e = gaussian_filter(rng.random((size, size)), sigma)
    for c in (conc_h, conc_e):
        c -= c.min()
        peak = c.max()
        if peak > 0:
            c /= peak
    m = classical.DEFAULT_STAIN_MATRIX.rows
    od = np.multiply.outer(conc_h * 1.2, m[0]) + np.multiply.outer(conc_e * 0.9, m[1])
    rgb = np.power(10.0, -od).astype(np.float32)
    return Image(np.clip(rgb, 0.0, 1.0), "unit")


def _make_runner(method: str, tile: Image, weights, seed: int):
    if method == "gsan@k0":
        z = np.random.default_rng(seed).standard_normal(weights.d_s).astype(np.float32)
        return lambda: generator.transfer(tile, z, weights, out_level=0)
    if method == "gsan@k1":
        z = np.random.default_rng(seed).standard_normal(weights.d_s).astype(np.float32)
        return lambda: generator.transfer(tile, z, weights, out_level=1)
    if method == "hed-jitter":
        cfg = classical.JitterConfig(seed=seed)
        return lambda: classical.hed_jitter(tile, cfg)
    if method == "macenko":
        return lambda: classical.macenko_separate(tile)
    raise ValueError(f"unknown bench method {method!r}")


def method_flops(method: str, size: int, K: int = arch.DEFAULT_K) -> int:
    if method == "gsan@k0":
        return arch.generator_flops(size, K, out_level=0)
    if method == "gsan@k1":
        return arch.generator_flops(size, K, out_level=1)
    if method == "hed-jitter":
        return arch.hed_jitter_flops(size)
    if method == "macenko":
        return arch.macenko_flops(size)
    raise ValueError(f"unknown bench method {method!r}")


def run_bench(weights, sizes=DEFAULT_SIZES, reps: int = 3, seed: int = 0,
              methods=METHODS, log=None):
    """Measure median seconds/image per (method, size); returns result rows."""
    rows = []
    for size in sizes:
        tile = synthetic_tile(size, seed)
        for method in methods:
            runner = _make_runner(method, tile, weights, seed)
            times = []
            for _ in range(reps):
                t0 = time.perf_counter()
                runner()
                times.append(time.perf_counter() - t0)
            median_s = statistics.median(times)
            rows.append({
                "method": method,
                "size": size,
                "median_s": median_s,
                "flops": method_flops(method, size, weights.K),
            })
            if log is not None:
                log(f"{method} @ {size}^2: {median_s:.4f} s/image")
    return rows


def to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r['method']},{r['size']},{r['median_s']:.6f},{r['flops']}\n")
    return buf.getvalue()
