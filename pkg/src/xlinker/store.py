"""Binary embedding store.

Little-endian layout: magic ``XLEL``, version u32=1, dim u32, count u64,
then per record: key_len u16, UTF-8 key bytes, dim IEEE-754 binary32 values.
No padding; keys sorted ascending by byte order.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import DataError, NumericError

MAGIC = b"XLEL"
VERSION = 1


class EmbeddingStore:
    """Immutable key -> float32 vector map with a fixed dimension."""

    def __init__(self, dim: int, records: dict[str, np.ndarray]):
        if dim < 1:
            raise NumericError(f"store dim must be >= 1, got {dim}")
        self.dim = dim
        self.records: dict[str, np.ndarray] = {}
        for key, vec in records.items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (dim,):
                raise NumericError(f"vector for {key!r} has shape {arr.shape}, want ({dim},)")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"vector for {key!r} contains NaN/Inf")
            self.records[key] = arr

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, key: str) -> bool:
        return key in self.records

    def get(self, key: str) -> np.ndarray | None:
        return self.records.get(key)

    def require(self, key: str) -> np.ndarray:
        vec = self.records.get(key)
        if vec is None:
            raise DataError(f"embedding store is missing key {key!r}")
        return vec


def store_write(store: EmbeddingStore, path: str) -> None:
    keys = sorted(store.records, key=lambda k: k.encode("utf-8"))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIQ", VERSION, store.dim, len(keys)))
        for key in keys:
            kb = key.encode("utf-8")
            if len(kb) > 0xFFFF:
                raise DataError(f"store key too long ({len(kb)} bytes)")
            f.write(struct.pack("<H", len(kb)))
            f.write(kb)
            f.write(store.records[key].astype("<f4").tobytes())


def store_read(path: str) -> EmbeddingStore:
    with open(path, "rb") as f:
        head = f.read(4)
        if head != MAGIC:
            raise DataError(f"{path}: bad magic {head!r}, expected {MAGIC!r}")
        meta = f.read(16)
        if len(meta) != 16:
            raise DataError(f"{path}: truncated header")
        version, dim, count = struct.unpack("<IIQ", meta)
        if version != VERSION:
            raise DataError(f"{path}: unsupported store version {version}")
        records: dict[str, np.ndarray] = {}
        vec_bytes = 4 * dim
        for _ in range(count):
            lb = f.read(2)
            if len(lb) != 2:
                raise DataError(f"{path}: truncated record header")
            (klen,) = struct.unpack("<H", lb)
            kb = f.read(klen)
            if len(kb) != klen:
                raise DataError(f"{path}: truncated key")
            key = kb.decode("utf-8")
            if key in records:
                raise DataError(f"{path}: duplicate key {key!r}")
            payload = f.read(vec_bytes)
            if len(payload) != vec_bytes:
                raise DataError(f"{path}: truncated vector for {key!r}")
            records[key] = np.frombuffer(payload, dtype="<f4").copy()
        if f.read(1):
            raise DataError(f"{path}: trailing bytes after {count} records")
    return EmbeddingStore(dim, records)
