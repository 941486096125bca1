"""Candidate-pair generation via k-NN queries, plus candidate quality scores.

Clean-Clean tasks query the smaller collection against an index over the
larger one; single-source tasks index everything and query every entity,
dropping self-matches and counting mirrored neighbor pairs once. Recall over
candidates is also known as pairs completeness.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .embedding import EmbeddedCollection
from .errors import ConfigError, DataError, DimensionError
from .model import GroundTruth, normalize_pair
from .nn import ExactNearestNeighbors, HnswNearestNeighbors, Neighbor

EXACT = "exact"
HNSW = "hnsw"


@dataclass(frozen=True)
class CandidateSet:
    """Unordered candidate pairs plus the blocking settings that produced them."""

    pairs: frozenset[tuple[str, str]]
    k: int
    index_kind: str
    query_side: str | None
    embedder_tag: str

    def __len__(self) -> int:
        return len(self.pairs)

    def normalized(self) -> frozenset[tuple[str, str]]:
        return frozenset(normalize_pair(*pair) for pair in self.pairs)


def _build_index(vectors, ids, index_kind: str, index_options: dict | None):
    options = dict(index_options or {})
    if index_kind == EXACT:
        if options:
            raise ConfigError(f"exact index takes no options, got {sorted(options)}")
        return ExactNearestNeighbors().fit(vectors, ids)
    if index_kind == HNSW:
        return HnswNearestNeighbors(**options).fit(vectors, ids)
    raise ConfigError(f"unknown index kind {index_kind!r}")


def _batched_neighbors(index, queries, k: int, threads: int) -> list[list[Neighbor]]:
    if threads > 1 and len(queries) > 1:
        chunk = (len(queries) + threads - 1) // threads
        pieces = [queries[i : i + chunk] for i in range(0, len(queries), chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(lambda block: index.kneighbors(block, k), pieces)
            return [row for part in parts for row in part]
    return index.kneighbors(queries, k)


def block_clean_clean(
    embA: EmbeddedCollection,
    embB: EmbeddedCollection,
    k: int,
    index_kind: str = EXACT,
    index_options: dict | None = None,
    threads: int = 1,
) -> CandidateSet:
    """k-NN blocking across two collections.

    The smaller collection supplies the queries (ties go to the first) and
    the larger one is indexed; every query contributes its k neighbors, so
    |pairs| <= k * |smaller|. Pairs are oriented (first-collection id,
    second-collection id) regardless of which side was queried.
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    if embA.dim != embB.dim:
        raise DimensionError(f"dim mismatch: {embA.dim} vs {embB.dim}")
    query_side = "A" if len(embA) <= len(embB) else "B"
    queries, corpus = (embA, embB) if query_side == "A" else (embB, embA)

    pairs: set[tuple[str, str]] = set()
    if len(queries) and len(corpus):
        index = _build_index(corpus.vectors, corpus.ids, index_kind, index_options)
        rows = _batched_neighbors(index, queries.vectors, k, threads)
        for i, row in enumerate(rows):
            query_id = queries.ids[i]
            for neighbor in row:
                if query_side == "A":
                    pairs.add((query_id, neighbor.id))
                else:
                    pairs.add((neighbor.id, query_id))
    return CandidateSet(frozenset(pairs), k, index_kind, query_side, embA.embedder_tag)


def block_dirty(
    emb: EmbeddedCollection,
    k: int,
    index_kind: str = HNSW,
    index_options: dict | None = None,
    threads: int = 1,
) -> CandidateSet:
    """k-NN blocking within one collection.

    Every entity queries the full index for k neighbors besides itself; a
    pair found from both ends is redundant and kept once.
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    pairs: set[tuple[str, str]] = set()
    if len(emb) > 1:
        index = _build_index(emb.vectors, emb.ids, index_kind, index_options)
        rows = _batched_neighbors(index, emb.vectors, k + 1, threads)
        for i, row in enumerate(rows):
            query_id = emb.ids[i]
            kept = 0
            for neighbor in row:
                if neighbor.id == query_id:
                    continue
                pairs.add(normalize_pair(query_id, neighbor.id))
                kept += 1
                if kept == k:
                    break
    return CandidateSet(frozenset(pairs), k, index_kind, None, emb.embedder_tag)


def blocking_recall(cands: CandidateSet, gt: GroundTruth) -> float:
    """Share of true pairs surviving blocking; 1.0 when there is nothing to find."""
    if not gt.pairs:
        return 1.0
    return len(cands.normalized() & gt.pairs) / len(gt.pairs)


def blocking_precision(cands: CandidateSet, gt: GroundTruth) -> float:
    """Share of candidates that are true pairs; 0.0 for an empty candidate set."""
    if not cands.pairs:
        return 0.0
    return len(cands.normalized() & gt.pairs) / len(cands.pairs)


def write_candidates(cands: CandidateSet, path: str | Path) -> None:
    """Export pairs as CSV plus a side-car JSON with the blocking settings."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write("left_id,right_id\n")
        for left_id, right_id in sorted(cands.pairs):
            handle.write(f"{_csv_cell(left_id)},{_csv_cell(right_id)}\n")
    metadata = {
        "k": cands.k,
        "index_kind": cands.index_kind,
        "query_side": cands.query_side,
        "embedder_tag": cands.embedder_tag,
    }
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    sidecar.write_text(json.dumps(metadata, sort_keys=True) + "\n", encoding="utf-8")


def load_candidates(path: str | Path) -> CandidateSet:
    """Read a candidate CSV written by write_candidates (side-car optional)."""
    import csv as _csv

    path = Path(path)
    pairs: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = _csv.reader(handle)
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise DataError(f"{path}: expected a two-column header")
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}: line {line_number}: expected 2 cells")
            pairs.add((row[0], row[1]))
    metadata = {"k": 0, "index_kind": "unknown", "query_side": None, "embedder_tag": "unknown"}
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    if sidecar.exists():
        metadata.update(json.loads(sidecar.read_text(encoding="utf-8")))
    return CandidateSet(
        frozenset(pairs),
        metadata["k"],
        metadata["index_kind"],
        metadata["query_side"],
        metadata["embedder_tag"],
    )


def _csv_cell(value: str) -> str:
    if any(ch in value for ch in ',"\n\r'):
        return '"' + value.replace('"', '""') + '"'
    return value
