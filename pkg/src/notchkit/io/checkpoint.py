"""Binary model checkpoints.

Layout (all integers little-endian):

    magic     4 bytes   b"NFCK"
    version   u16       currently 1
    kind      u8        1 = kpn, 2 = detector
    meta_len  u16       UTF-8 "key=value" lines joined by '\\n'
    n_params  u32
    table     n times:  name_len u16, name UTF-8, ndim u8, ndim x u32 dims
    payload   raw float32 little-endian arrays, in table order

The format is bit-exact: float32 payloads round-trip unchanged, and files
written for the same model bytes are identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"NFCK"
VERSION = 1
_KIND_TAGS = {"kpn": 1, "detector": 2}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


@dataclass
class ModelCheckpoint:
    """Named float32 parameter tensors plus architecture metadata."""
    kind: str
    meta: dict[str, str] = field(default_factory=dict)
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in _KIND_TAGS:
            raise DataError(f"unknown checkpoint kind {self.kind!r}")
        for name, arr in self.params.items():
            a = np.asarray(arr)
            if a.dtype != np.float32:
                raise DataError(f"parameter {name!r} must be float32, got {a.dtype}")
            self.params[name] = a


def save_checkpoint(ckpt, path: str | Path) -> None:
    """Write a checkpoint (or any object with ``to_checkpoint()``)."""
    if not isinstance(ckpt, ModelCheckpoint):
        to = getattr(ckpt, "to_checkpoint", None)
        if to is None:
            raise DataError(f"cannot checkpoint object of type {type(ckpt).__name__}")
        ckpt = to()
    meta_bytes = "\n".join(f"{k}={v}" for k, v in ckpt.meta.items()).encode("utf-8")
    if len(meta_bytes) > 0xFFFF:
        raise DataError("checkpoint metadata too large")
    head = bytearray()
    head += MAGIC
    head += struct.pack("<H", VERSION)
    head += struct.pack("<B", _KIND_TAGS[ckpt.kind])
    head += struct.pack("<H", len(meta_bytes))
    head += meta_bytes
    head += struct.pack("<I", len(ckpt.params))
    for name, arr in ckpt.params.items():
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF:
            raise DataError(f"parameter name too long: {name!r}")
        if arr.ndim > 0xFF:
            raise DataError(f"parameter {name!r} has too many dims")
        head += struct.pack("<H", len(nb)) + nb
        head += struct.pack("<B", arr.ndim)
        head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(bytes(head))
        for arr in ckpt.params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise DataError(f"{self.path}: truncated checkpoint while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    """Read and validate an NFCK checkpoint file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        raise DataError(f"checkpoint file not found: {path}") from e
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e

    r = _Reader(data, path)
    if r.take(4, "magic") != MAGIC:
        raise DataError(f"{path}: not a model checkpoint (bad magic)")
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    (tag,) = r.unpack("<B", "kind")
    kind = _TAG_KINDS.get(tag)
    if kind is None:
        raise DataError(f"{path}: unknown model kind tag {tag}")
    (meta_len,) = r.unpack("<H", "metadata length")
    meta_raw = r.take(meta_len, "metadata").decode("utf-8")
    meta: dict[str, str] = {}
    for line in meta_raw.splitlines():
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}: malformed metadata line {line!r}")
        k, v = line.split("=", 1)
        meta[k] = v

    (n_params,) = r.unpack("<I", "parameter count")
    table: list[tuple[str, tuple[int, ...]]] = []
    for i in range(n_params):
        (name_len,) = r.unpack("<H", f"name length of parameter {i}")
        name = r.take(name_len, f"name of parameter {i}").decode("utf-8")
        (ndim,) = r.unpack("<B", f"rank of {name!r}")
        shape = r.unpack(f"<{ndim}I", f"shape of {name!r}") if ndim else ()
        table.append((name, tuple(shape)))

    params: dict[str, np.ndarray] = {}
    for name, shape in table:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = r.take(4 * count, f"payload of {name!r}")
        params[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
    if r.pos != len(data):
        raise DataError(f"{path}: {len(data) - r.pos} trailing bytes after payload")
    return ModelCheckpoint(kind=kind, meta=meta, params=params)
