"""Binary parameter snapshots.

Layout (all little-endian):

    magic   8 bytes  b"DMSNAP\\x00\\x01"   (format version 1)
    u32     number of metadata entries
    per entry: u16 key length, key utf-8, u32 value length, value utf-8
    u32     number of parameter blocks
    per block:
        i32  layer index
        u16  name length, name utf-8
        u8   dtype code (0 = float32, 1 = float64)
        u8   ndim
        u32* dims
        raw  values, little-endian
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .graph import ModelGraph

__all__ = ["save_snapshot", "load_snapshot", "load_into"]

_MAGIC = b"DMSNAP\x00\x01"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def save_snapshot(path, graph: ModelGraph, metadata: dict[str, str] | None = None) -> None:
    """Write every parameter of ``graph`` plus string metadata."""
    metadata = metadata or {}
    blocks = list(graph.parameters())
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(metadata)))
        for key in sorted(metadata):
            kb = key.encode()
            vb = str(metadata[key]).encode()
            fh.write(struct.pack("<H", len(kb)) + kb)
            fh.write(struct.pack("<I", len(vb)) + vb)
        fh.write(struct.pack("<I", len(blocks)))
        for idx, name, arr in blocks:
            nb = name.encode()
            fh.write(struct.pack("<iH", idx, len(nb)) + nb)
            fh.write(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def load_snapshot(path) -> tuple[dict[tuple[int, str], np.ndarray], dict[str, str]]:
    """Read a snapshot; returns ({(layer index, name): array}, metadata)."""
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError(f"{path}: not a parameter snapshot (bad magic)")
    off = 8

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, data, off)
        off += size
        return vals

    metadata = {}
    (n_meta,) = take("<I")
    for _ in range(n_meta):
        (klen,) = take("<H")
        key = data[off:off + klen].decode(); off += klen
        (vlen,) = take("<I")
        metadata[key] = data[off:off + vlen].decode(); off += vlen

    params: dict[tuple[int, str], np.ndarray] = {}
    (n_blocks,) = take("<I")
    for _ in range(n_blocks):
        idx, nlen = take("<iH")
        name = data[off:off + nlen].decode(); off += nlen
        code, ndim = take("<BB")
        shape = take(f"<{ndim}I")
        dt = _DTYPES[code]
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(shape)
        off += arr.nbytes
        params[(idx, name)] = arr.copy()
    return params, metadata


def load_into(path, graph: ModelGraph) -> dict[str, str]:
    """Restore a snapshot into ``graph`` (shapes must match); returns metadata."""
    params, metadata = load_snapshot(path)
    for idx, name, arr in graph.parameters():
        saved = params[(idx, name)]
        if saved.shape != arr.shape:
            raise ValueError(
                f"snapshot block ({idx}, {name}) has shape {saved.shape}, "
                f"graph expects {arr.shape}")
        arr[...] = saved.astype(arr.dtype)
    return metadata
