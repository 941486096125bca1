"""Streaming writer for EMBV binary vector files.

Layout (all little-endian, bit-exact):
  magic   4 bytes  0x45 0x4D 0x42 0x56 ("EMBV")
  version u16      currently 1
  dim     u32
  count   u64
  then count records of [id_len: u32][id: id_len UTF-8 bytes][dim x f32]

The writer targets a temporary file in the destination directory and renames
it into place only after every record landed, so a reader can never observe
a torn file.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from types import TracebackType

import numpy as np

from .errors import ExportDataError

MAGIC = b"EMBV"
VERSION = 1

_HEADER = struct.Struct("<4sHIQ")
_ID_LEN = struct.Struct("<I")


class EmbvWriter:
    """Context manager that streams batches and commits on clean exit."""

    def __init__(self, path: str | Path, dim: int, count: int):
        if dim < 1:
            raise ExportDataError(f"vector dim must be positive, got {dim}")
        if count < 0:
            raise ExportDataError(f"record count must be non-negative, got {count}")
        self.path = Path(path)
        self.dim = dim
        self.count = count
        self.written = 0
        handle = tempfile.NamedTemporaryFile(
            mode="wb", dir=self.path.parent, prefix=self.path.name + ".", delete=False
        )
        self._tmp_path = Path(handle.name)
        self._handle = handle
        self._handle.write(_HEADER.pack(MAGIC, VERSION, dim, count))

    def write_batch(self, ids: list[str], vectors: np.ndarray) -> None:
        vectors = np.asarray(vectors)
        if vectors.ndim != 2 or vectors.shape[1] != self.dim:
            raise ExportDataError(
                f"provider returned shape {vectors.shape}, expected (*, {self.dim})"
            )
        if len(ids) != vectors.shape[0]:
            raise ExportDataError(f"{len(ids)} ids for {vectors.shape[0]} vectors")
        if self.written + len(ids) > self.count:
            raise ExportDataError("more records than the declared count")
        rows = np.ascontiguousarray(vectors, dtype="<f4")
        for i, entity_id in enumerate(ids):
            raw = entity_id.encode("utf-8")
            self._handle.write(_ID_LEN.pack(len(raw)))
            self._handle.write(raw)
            self._handle.write(rows[i].tobytes())
        self.written += len(ids)

    def __enter__(self) -> "EmbvWriter":
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self._handle.close()
        if exc_type is not None:
            self._tmp_path.unlink(missing_ok=True)
            return
        if self.written != self.count:
            self._tmp_path.unlink(missing_ok=True)
            raise ExportDataError(
                f"wrote {self.written} of {self.count} declared records"
            )
        os.replace(self._tmp_path, self.path)
