"""Binary checkpoint container.

Layout (little-endian)::

    b"DPCK" | version:u32 | meta_len:u64 | meta JSON (utf-8)
    then, repeated until EOF:
    name_len:u32 | name bytes | rank:u32 | dims:u64 * rank | f32 data
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DPCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<IQ", VERSION, len(blob)), blob]
    for name, arr in tensors.items():
        nb = name.encode("utf-8")
        a = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<I", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}Q", *a.shape))
        parts.append(a.tobytes())
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {buf[:4]!r}")
    try:
        version, mlen = struct.unpack_from("<IQ", buf, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        off = 16
        meta = json.loads(buf[off:off + mlen].decode("utf-8"))
        off += mlen
        tensors: dict[str, np.ndarray] = {}
        while off < len(buf):
            (nlen,) = struct.unpack_from("<I", buf, off)
            off += 4
            name = buf[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", buf, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}Q", buf, off)
            off += 8 * rank
            count = int(np.prod(dims, dtype=np.int64))
            if off + 4 * count > len(buf):
                raise CheckpointError(f"{path}: tensor {name!r} truncated")
            tensors[name] = np.frombuffer(buf, dtype="<f4", count=count, offset=off).reshape(dims).copy()
            off += 4 * count
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint") from exc
    return meta, tensors
