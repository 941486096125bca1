"""EMBV binary vector files.

Layout (all little-endian, bit-exact):
  magic   4 bytes  0x45 0x4D 0x42 0x56 ("EMBV")
  version u16      currently 1
  dim     u32
  count   u64
  then count records of [id_len: u32][id: id_len UTF-8 bytes][dim x f32]
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

MAGIC = b"EMBV"
VERSION = 1

_HEADER = struct.Struct("<4sHIQ")
_ID_LEN = struct.Struct("<I")


def write_embv(path: str | Path, ids: Sequence[str], vectors: np.ndarray) -> None:
    """Write ids and their float32 row vectors in file order."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise ValueError("vectors must be a 2-d array of shape (count, dim)")
    if len(ids) != vectors.shape[0]:
        raise ValueError(f"{len(ids)} ids for {vectors.shape[0]} vectors")
    dim = vectors.shape[1]
    with open(path, "wb") as handle:
        handle.write(_HEADER.pack(MAGIC, VERSION, dim, len(ids)))
        for i, entity_id in enumerate(ids):
            raw = entity_id.encode("utf-8")
            handle.write(_ID_LEN.pack(len(raw)))
            handle.write(raw)
            handle.write(vectors[i].tobytes())


def read_embv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read an EMBV file, returning ids and an (count, dim) float32 matrix."""
    path = Path(path)
    with open(path, "rb") as handle:
        header = handle.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, version, dim, count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic bytes {magic!r}")
        if version != VERSION:
            raise DataError(f"{path}: unsupported version {version}")

        ids: list[str] = []
        row_bytes = dim * 4
        vectors = np.empty((count, dim), dtype=np.float32)
        for i in range(count):
            len_raw = handle.read(_ID_LEN.size)
            if len(len_raw) < _ID_LEN.size:
                raise DataError(f"{path}: truncated at record {i}")
            (id_len,) = _ID_LEN.unpack(len_raw)
            id_raw = handle.read(id_len)
            payload = handle.read(row_bytes)
            if len(id_raw) < id_len or len(payload) < row_bytes:
                raise DataError(f"{path}: truncated at record {i}")
            ids.append(id_raw.decode("utf-8"))
            vectors[i] = np.frombuffer(payload, dtype="<f4")
        if handle.read(1):
            raise DataError(f"{path}: trailing bytes after {count} records")
    return ids, vectors
