"""Embedding-store binary format (independent implementation).

Little-endian: magic ``XLEL``, version u32=1, dim u32, count u64, then per
record key_len u16, UTF-8 key, dim float32 values; keys sorted ascending
by byte order, no padding.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"XLEL"
VERSION = 1


class StoreFormatError(ValueError):
    pass


def write_store(records: dict[str, np.ndarray], dim: int, path: str) -> None:
    keys = sorted(records, key=lambda k: k.encode("utf-8"))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIQ", VERSION, dim, len(keys)))
        for key in keys:
            vec = np.asarray(records[key], dtype="<f4")
            if vec.shape != (dim,):
                raise StoreFormatError(f"vector for {key!r} has shape {vec.shape}")
            if not np.all(np.isfinite(vec)):
                raise StoreFormatError(f"vector for {key!r} contains NaN/Inf")
            kb = key.encode("utf-8")
            f.write(struct.pack("<H", len(kb)))
            f.write(kb)
            f.write(vec.tobytes())


def read_store(path: str) -> tuple[int, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise StoreFormatError(f"{path}: bad magic")
        version, dim, count = struct.unpack("<IIQ", f.read(16))
        if version != VERSION:
            raise StoreFormatError(f"{path}: unsupported version {version}")
        records: dict[str, np.ndarray] = {}
        for _ in range(count):
            (klen,) = struct.unpack("<H", f.read(2))
            key = f.read(klen).decode("utf-8")
            payload = f.read(4 * dim)
            if len(payload) != 4 * dim:
                raise StoreFormatError(f"{path}: truncated vector for {key!r}")
            records[key] = np.frombuffer(payload, dtype="<f4").copy()
        if f.read(1):
            raise StoreFormatError(f"{path}: trailing bytes")
    return dim, records
