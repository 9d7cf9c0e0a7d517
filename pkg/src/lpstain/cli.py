"""Batch command-line front end.

Machine output is CSV/JSON only; progress goes to stderr. Exit codes are a
stable contract: 0 success, 2 usage, 3 data error, 4 format error. With
--keep-going a failing input is logged and the remaining files still run.
"""

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import arch, bench, classical, generator, pyramid, store
from .errors import (
    BadSidecar,
    DimMismatch,
    FormatError,
    LPStainError,
    RangeError,
)
from .imageio import (
    Image,
    atomic_write_bytes,
    load_image,
    save_image,
    to_symmetric,
    to_unit,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_FORMAT = 4

log = logging.getLogger("lpstain")


def _exit_code_for(exc: Exception) -> int:
    if isinstance(exc, FormatError):
        return EXIT_FORMAT
    if isinstance(exc, RangeError):
        return EXIT_USAGE
    if isinstance(exc, LPStainError):
        return EXIT_DATA
    return EXIT_DATA


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("LPSTAIN_THREADS")
    return max(1, int(env)) if env else 1


def _for_each(paths, fn, args) -> int:
    """Run fn(index, path) per input over the work pool; returns an exit code."""
    failures = []

    def run(item):
        idx, path = item
        try:
            fn(idx, path)
            return None
        except Exception as exc:  # noqa: BLE001 - reported per file
            return (path, exc)

    items = list(enumerate(paths))
    n = _threads(args)
    if n == 1:
        results = map(run, items)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(run, items))
    for res in results:
        if res is None:
            continue
        path, exc = res
        log.error("%s: %s", path, exc)
        failures.append(exc)
        if not args.keep_going:
            return _exit_code_for(exc)
    if failures:
        return max(_exit_code_for(e) for e in failures)
    return EXIT_OK


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj) -> None:
    atomic_write_bytes(path, (json.dumps(obj, indent=2) + "\n").encode())


def _load_weights(args) -> generator.GeneratorWeights:
    if not args.weights:
        raise RangeError("--weights is required for this subcommand")
    return generator.GeneratorWeights.from_store(store.load_file(args.weights))


def _read_stain_json(path) -> np.ndarray:
    try:
        obj = json.loads(Path(path).read_text())
        vec = obj.get("sample", obj.get("mu"))
        return np.asarray(vec, dtype=np.float32)
    except Exception as exc:
        raise BadSidecar(f"{path}: {exc}") from None


# --- pyramid subcommands ---

def cmd_decompose(args) -> int:
    out = _out_dir(args)
    cfg = pyramid.PyramidConfig(K=args.k)

    def run(idx, path):
        img = to_symmetric(load_image(path))
        lp = pyramid.build_laplacian(img, cfg)
        stem = Path(path).stem
        levels = []
        for k, data in enumerate(list(lp.bandpass) + [lp.residual]):
            lo = float(data.min())
            hi = float(data.max())
            if hi - lo < 1e-12:
                hi = lo + 1.0
            name = f"{stem}.L{k}.png"
            norm = (data - np.float32(lo)) / np.float32(hi - lo)
            save_image(Image(norm.astype(np.float32), "unit"), out / name)
            levels.append({"file": name, "h": data.shape[0], "w": data.shape[1],
                           "lo": lo, "hi": hi})
        _write_json(out / f"{stem}.lp.json",
                    {"K": cfg.K, "range_tag": lp.range_tag, "levels": levels})

    return _for_each(args.inputs, run, args)


def cmd_reconstruct(args) -> int:
    out = _out_dir(args)

    def run(idx, path):
        sidecar = Path(path)
        try:
            meta = json.loads(sidecar.read_text())
            K = int(meta["K"])
            levels = meta["levels"]
            range_tag = meta["range_tag"]
            if len(levels) != K + 1:
                raise KeyError(f"expected {K + 1} levels, found {len(levels)}")
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise BadSidecar(f"{sidecar}: {exc}") from None
        planes = []
        for lvl in levels:
            img = load_image(sidecar.parent / lvl["file"])
            if img.data.shape[:2] != (lvl["h"], lvl["w"]):
                raise DimMismatch(f"{lvl['file']}: sidecar dims disagree with PNG")
            lo, hi = float(lvl["lo"]), float(lvl["hi"])
            planes.append(img.data * np.float32(hi - lo) + np.float32(lo))
        lp = pyramid.LaplacianPyramid(planes[:-1], planes[-1], range_tag)
        rec = pyramid.reconstruct(lp, pyramid.PyramidConfig(K=K))
        stem = sidecar.name.replace(".lp.json", "")
        save_image(to_unit(rec), out / f"{stem}.rec.png")

    return _for_each(args.inputs, run, args)


# --- generator subcommands ---

def cmd_augment(args) -> int:
    out = _out_dir(args)
    w = _load_weights(args)

    def run(idx, path):
        img = load_image(path)
        result, stain = generator.augment_random(img, [args.seed, idx], w,
                                                 out_level=args.level)
        stem = Path(path).stem
        save_image(result, out / f"{stem}.aug.png")
        _write_json(out / f"{stem}.stain.json", {"sample": stain.sample.tolist()})

    return _for_each(args.inputs, run, args)


def cmd_transfer(args) -> int:
    out = _out_dir(args)
    w = _load_weights(args)
    if (args.ref is None) == (args.stain is None):
        raise RangeError("transfer needs exactly one of --ref / --stain")
    if args.ref is not None:
        vec = generator.extract_stain(load_image(args.ref), w).mu
    else:
        vec = _read_stain_json(args.stain)

    def run(idx, path):
        result = generator.transfer(load_image(path), vec, w, out_level=args.level)
        save_image(result, out / f"{Path(path).stem}.transfer.png")

    return _for_each(args.inputs, run, args)


def cmd_extract(args) -> int:
    out = _out_dir(args)
    w = _load_weights(args)

    def run(idx, path):
        stain = generator.extract_stain(load_image(path), w)
        _write_json(out / f"{Path(path).stem}.stain.json",
                    {"mu": stain.mu.tolist(), "logvar": stain.logvar.tolist()})

    return _for_each(args.inputs, run, args)


def cmd_interpolate(args) -> int:
    out = _out_dir(args)
    w = _load_weights(args)
    try:
        grid = [float(t) for t in args.t_grid.split(",")]
    except ValueError as exc:
        raise RangeError(f"bad --t-grid: {exc}") from None
    stain_a = generator.extract_stain(load_image(args.ref_a), w).mu
    stain_b = generator.extract_stain(load_image(args.ref_b), w).mu
    morph = load_image(args.morph)
    stem = Path(args.morph).stem
    for i, t in enumerate(grid):
        vec = generator.interpolate_stain(stain_a, stain_b, t)
        result = generator.transfer(morph, vec, w, out_level=args.level)
        save_image(result, out / f"{stem}.interp{i:02d}_t{t:g}.png")
    return EXIT_OK


# --- classical subcommands ---

def cmd_jitter(args) -> int:
    out = _out_dir(args)
    cfg_base = dict(alpha_range=(1.0 - args.alpha, 1.0 + args.alpha),
                    beta_range=(-args.beta, args.beta))

    def run(idx, path):
        cfg = classical.JitterConfig(seed=[args.seed, idx], **cfg_base)
        result = classical.hed_jitter(load_image(path), cfg)
        save_image(result, out / f"{Path(path).stem}.jitter.png")

    return _for_each(args.inputs, run, args)


def cmd_separate(args) -> int:
    def run(idx, path):
        m = classical.macenko_separate(load_image(path), io_cutoff=args.io_cutoff,
                                       alpha_percentile=args.alpha_percentile)
        record = json.loads(m.to_json())
        record["file"] = str(path)
        sys.stdout.write(json.dumps(record) + "\n")

    return _for_each(args.inputs, run, args)


# --- bench / weights / stats ---

def cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",")]
    except ValueError as exc:
        raise RangeError(f"bad --sizes: {exc}") from None
    for s in sizes:
        if s & (s - 1) or not 256 <= s <= 4096:
            raise RangeError(f"bench sizes must be powers of two in [256, 4096], got {s}")
    if args.weights:
        w = _load_weights(args)
    else:
        log.info("no --weights given; using seeded random generator weights")
        w = generator.GeneratorWeights.from_store(
            store.init_random(arch.KIND_GENERATOR, seed=args.seed))
    rows = bench.run_bench(w, sizes=sizes, reps=args.reps, seed=args.seed,
                           log=log.info)
    csv = bench.to_csv(rows)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(out, csv.encode())
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def cmd_init_weights(args) -> int:
    ws = store.init_random(args.kind, K=args.k, d_s=args.d_s, seed=args.seed)
    store.save_file(ws, args.out_file)
    return EXIT_OK


def cmd_inspect(args) -> int:
    ws = store.load_file(args.store)
    sys.stdout.write(store.inspect(ws) + "\n")
    return EXIT_OK


def cmd_stats(args) -> int:
    paths = []
    for item in args.inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.png")))
        else:
            paths.append(p)
    scales = pyramid.compute_bp_scales(paths, pyramid.PyramidConfig(K=args.k))
    payload = {"K": args.k, "sigma": scales.sigma.tolist()}
    if args.out:
        out = _out_dir(args)
        _write_json(out / "bp_scales.json", payload)
    else:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    if args.patch_weights:
        ws = store.load_file(args.patch_weights)
        if "bp.sigma" not in ws.tensors or ws.K != args.k:
            raise DimMismatch(
                f"weights file K={ws.K} incompatible with stats K={args.k}")
        ws.tensors["bp.sigma"] = scales.sigma.astype(np.float32)
        store.save_file(ws, args.patch_weights)
    return EXIT_OK


# --- parser ---

def _add_common(p, inputs=True):
    if inputs:
        p.add_argument("inputs", nargs="+", help="input files")
    p.add_argument("--weights", help="GSW1 weights file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (fallback: LPSTAIN_THREADS, default 1)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--keep-going", action="store_true",
                   help="continue past per-file failures")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpstain",
                                 description="Laplacian-pyramid stain augmentation toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("decompose", help="write per-level PNGs + JSON sidecar")
    _add_common(p)
    p.add_argument("--k", type=int, default=arch.DEFAULT_K)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("reconstruct", help="invert a decompose sidecar")
    _add_common(p)
    p.set_defaults(fn=cmd_reconstruct)

    p = sub.add_parser("augment", help="seeded random stain augmentation")
    _add_common(p)
    p.add_argument("--level", type=int, default=0)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("transfer", help="restyle with a reference stain")
    _add_common(p)
    p.add_argument("--ref", help="stain reference image")
    p.add_argument("--stain", help="stain JSON file")
    p.add_argument("--level", type=int, default=0)
    p.set_defaults(fn=cmd_transfer)

    p = sub.add_parser("extract", help="write stain codes as JSON")
    _add_common(p)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("interpolate", help="stain interpolation sequence")
    _add_common(p, inputs=False)
    p.add_argument("--morph", required=True, help="morphology source image")
    p.add_argument("--ref-a", required=True)
    p.add_argument("--ref-b", required=True)
    p.add_argument("--t-grid", default="0,0.5,1")
    p.add_argument("--level", type=int, default=0)
    p.set_defaults(fn=cmd_interpolate)

    p = sub.add_parser("jitter", help="HED channel jitter")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=0.05,
                   help="multiplicative half-range")
    p.add_argument("--beta", type=float, default=0.05, help="additive half-range")
    p.set_defaults(fn=cmd_jitter)

    p = sub.add_parser("separate", help="Macenko stain-matrix estimation")
    _add_common(p)
    p.add_argument("--io-cutoff", type=float, default=classical.DEFAULT_IO_CUTOFF)
    p.add_argument("--alpha-percentile", type=float,
                   default=classical.DEFAULT_ALPHA_PERCENTILE)
    p.set_defaults(fn=cmd_separate)

    p = sub.add_parser("bench", help="timing + analytic FLOP table (CSV)")
    _add_common(p, inputs=False)
    p.add_argument("--sizes", default=",".join(map(str, bench.DEFAULT_SIZES)))
    p.add_argument("--reps", type=int, default=3)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("init-weights", help="seeded GSW1 generation")
    _add_common(p, inputs=False)
    p.add_argument("--kind", choices=sorted(arch.KIND_CODES), default=arch.KIND_GENERATOR)
    p.add_argument("--k", type=int, default=arch.DEFAULT_K)
    p.add_argument("--d-s", type=int, default=arch.DEFAULT_DS)
    p.add_argument("--out-file", required=True)
    p.set_defaults(fn=cmd_init_weights)

    p = sub.add_parser("inspect", help="print a GSW1 manifest")
    p.add_argument("store", help="GSW1 weights file")
    p.set_defaults(fn=cmd_inspect, threads=None, keep_going=False)

    p = sub.add_parser("stats", help="band-pass scale statistics over a dataset")
    _add_common(p)
    p.add_argument("--k", type=int, default=arch.DEFAULT_K)
    p.add_argument("--patch-weights", help="GSW1 file whose bp.sigma gets updated")
    p.set_defaults(fn=cmd_stats)

    return ap


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except LPStainError as exc:
        log.error("%s", exc)
        return _exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
