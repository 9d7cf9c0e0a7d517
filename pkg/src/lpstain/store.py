"""GSW1 named-tensor weight container: bit-exact save/load/init/inspect.

Layout (all integers little-endian):
  bytes 0-3   magic "GSW1"
  u32         version (1)
  u8          model kind {1=generator, 2=discriminator, 3=feature-extractor}
  u8          K
  u16         d_s
  u32         tensor count
  per tensor  u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
              u64 absolute payload offset
  payload     float32 little-endian values, each tensor 16-byte aligned

Tensors are serialized in sorted-name order so save/load round trips are
byte-identical. Loading validates name inventory and shapes against the
channel plan declared by (kind, K, d_s).
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import arch
from .errors import BadMagic, ShapeMismatch, TruncatedPayload, UnknownModelKind
from .imageio import atomic_write_bytes

MAGIC = b"GSW1"
VERSION = 1
_HEADER = struct.Struct("<4sIBBHI")


@dataclass
class WeightStore:
    kind: str
    K: int
    d_s: int
    tensors: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in arch.KIND_CODES:
            raise UnknownModelKind(f"unknown model kind {self.kind!r}")

    def names(self):
        return sorted(self.tensors)


def _validate_plan(ws: WeightStore) -> None:
    plan = arch.plan_for(ws.kind, ws.K, ws.d_s)
    for name in ws.names():
        if name not in plan:
            raise ShapeMismatch(f"tensor {name!r} not in the {ws.kind} plan")
        got = tuple(ws.tensors[name].shape)
        if got != plan[name]:
            raise ShapeMismatch(f"tensor {name!r}: shape {got}, expected {plan[name]}")
    missing = sorted(set(plan) - set(ws.tensors))
    if missing:
        raise ShapeMismatch(f"missing tensors: {missing}")


def save(ws: WeightStore) -> bytes:
    """Serialize to GSW1 bytes; validates the store against its plan first."""
    _validate_plan(ws)
    names = ws.names()
    table_size = sum(2 + len(n.encode()) + 1 + 4 * ws.tensors[n].ndim + 8 for n in names)
    offset = _HEADER.size + table_size
    table = bytearray()
    payloads = []
    for name in names:
        arr = np.ascontiguousarray(ws.tensors[name], dtype="<f4")
        offset += (-offset) % 16
        enc = name.encode()
        table += struct.pack("<H", len(enc)) + enc
        table += struct.pack("<B", arr.ndim)
        table += struct.pack(f"<{arr.ndim}I", *arr.shape)
        table += struct.pack("<Q", offset)
        payloads.append((offset, arr.tobytes()))
        offset += arr.nbytes
    out = bytearray(offset)
    out[: _HEADER.size] = _HEADER.pack(
        MAGIC, VERSION, arch.KIND_CODES[ws.kind], ws.K, ws.d_s, len(names)
    )
    out[_HEADER.size : _HEADER.size + table_size] = table
    for off, payload in payloads:
        out[off : off + len(payload)] = payload
    return bytes(out)


def load(data: bytes) -> WeightStore:
    """Parse and validate GSW1 bytes."""
    if len(data) < _HEADER.size or data[:4] != MAGIC:
        raise BadMagic("not a GSW1 container")
    magic, version, kind_code, K, d_s, count = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise BadMagic(f"unsupported GSW1 version {version}")
    if kind_code not in arch.CODE_KINDS:
        raise UnknownModelKind(f"unknown model kind code {kind_code}")
    kind = arch.CODE_KINDS[kind_code]

    pos = _HEADER.size
    entries = []
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + name_len].decode()
            pos += name_len
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            (offset,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            entries.append((name, dims, offset))
    except struct.error as exc:
        raise TruncatedPayload(f"tensor table truncated: {exc}") from None

    spans = []
    tensors = {}
    for name, dims, offset in entries:
        if name in tensors:
            raise ShapeMismatch(f"duplicate tensor name {name!r}")
        nbytes = 4 * int(np.prod(dims, dtype=np.int64))
        if offset < pos or offset + nbytes > len(data):
            raise TruncatedPayload(f"tensor {name!r} payload out of bounds")
        spans.append((offset, offset + nbytes, name))
        arr = np.frombuffer(data, dtype="<f4", count=int(np.prod(dims, dtype=np.int64)),
                            offset=offset)
        tensors[name] = arr.reshape(dims).copy()
    spans.sort()
    for (_, end_a, name_a), (start_b, _, name_b) in zip(spans, spans[1:]):
        if start_b < end_a:
            raise ShapeMismatch(f"tensors {name_a!r} and {name_b!r} overlap")

    ws = WeightStore(kind=kind, K=K, d_s=d_s, tensors=tensors)
    _validate_plan(ws)
    return ws


def save_file(ws: WeightStore, path) -> None:
    atomic_write_bytes(path, save(ws))


def load_file(path) -> WeightStore:
    with open(path, "rb") as f:
        return load(f.read())


def init_random(kind: str, K: int = arch.DEFAULT_K, d_s: int = arch.DEFAULT_DS,
                seed: int = 0) -> WeightStore:
    """Seeded He-style initialization following the kind's channel plan.

    bp.sigma starts at 1.0; patch it from dataset statistics (cli `stats`)
    before relying on the band-pass dynamic range.
    """
    plan = arch.plan_for(kind, K, d_s)
    rng = np.random.default_rng(seed)
    tensors = {}
    for name in sorted(plan):
        if name == "bp.sigma":
            tensors[name] = np.ones(plan[name], dtype=np.float32)
        else:
            tensors[name] = arch.he_init(plan[name], rng)
    return WeightStore(kind=kind, K=K, d_s=d_s, tensors=tensors)


def inspect(ws: WeightStore) -> str:
    """Human-readable manifest in deterministic name order."""
    lines = [f"GSW1 kind={ws.kind} K={ws.K} d_s={ws.d_s} tensors={len(ws.tensors)}"]
    for name in ws.names():
        t = ws.tensors[name]
        shape = "x".join(map(str, t.shape))
        lines.append(
            f"  {name:<24s} {shape:>14s} "
            f"min={t.min():+.5f} max={t.max():+.5f} mean={t.mean():+.5f}"
        )
    return "\n".join(lines)
