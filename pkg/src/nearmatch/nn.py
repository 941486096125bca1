"""Exact and approximate k-nearest-neighbour search over Euclidean distance.

ExactNearestNeighbors is a brute-force scan; HnswNearestNeighbors is a
navigable small-world graph built from scratch: nodes are inserted in
corpus order, each node draws a top level from a geometric distribution,
and queries descend greedily through the upper layers before running a
beam search of width ef over the bottom layer.

Both follow the scikit-learn index idiom: fit(X, ids) then
kneighbors(Q, n_neighbors), with fitted state on underscore attributes.
Distances are compared as squared Euclidean internally; the square root is
applied only at the API boundary. All ties are broken by ascending id so
results are fully deterministic.
"""

from __future__ import annotations

import heapq
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .embedding import EmbeddedCollection
from .errors import ConfigError, DataError, DimensionError


@dataclass(frozen=True)
class Neighbor:
    id: str
    distance: float


def euclidean_distance(u, v) -> float:
    """Root of the summed squared coordinate differences."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.shape} vs {v.shape}")
    return float(np.sqrt(np.sum((u - v) ** 2)))


def _check_matrix(X, name: str) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a matrix of shape (count, dim)")
    if not np.isfinite(X).all():
        raise DataError(f"{name} contains non-finite values")
    return X


def _default_ids(count: int) -> list[str]:
    width = len(str(max(count - 1, 0)))
    return [str(i).zfill(width) for i in range(count)]


class ExactNearestNeighbors(BaseEstimator):
    """Exhaustive k-NN scan; the oracle the approximate index is judged against."""

    def fit(self, X, ids: Sequence[str] | None = None):
        X = _check_matrix(X, "X")
        self.vectors_ = np.ascontiguousarray(X, dtype=np.float64)
        self.ids_ = list(ids) if ids is not None else _default_ids(len(X))
        if len(self.ids_) != len(self.vectors_):
            raise ValueError(f"{len(self.ids_)} ids for {len(self.vectors_)} vectors")
        self.id_array_ = np.array(self.ids_, dtype=object)
        self.norms_ = np.einsum("ij,ij->i", self.vectors_, self.vectors_)
        return self

    def kneighbors(self, X, n_neighbors: int) -> list[list[Neighbor]]:
        if n_neighbors < 1:
            raise ConfigError("n_neighbors must be at least 1")
        Q = _check_matrix(X, "query").astype(np.float64, copy=False)
        if Q.shape[1] != self.vectors_.shape[1]:
            raise DimensionError(
                f"query dim {Q.shape[1]} does not match index dim {self.vectors_.shape[1]}"
            )
        k = min(n_neighbors, len(self.vectors_))
        results: list[list[Neighbor]] = []
        # Chunked so that the (queries x corpus) distance block stays in memory.
        chunk = max(1, int(4_000_000 // max(len(self.vectors_), 1)) or 1)
        for start in range(0, len(Q), chunk):
            block = Q[start : start + chunk]
            d2 = self.norms_ - 2.0 * (block @ self.vectors_.T) + np.einsum(
                "ij,ij->i", block, block
            ).reshape(-1, 1)
            np.maximum(d2, 0.0, out=d2)
            for row in d2:
                order = np.lexsort((self.id_array_, row))[:k]
                results.append(
                    [Neighbor(self.ids_[j], float(np.sqrt(row[j]))) for j in order]
                )
        return results


def exact_knn(corpus: EmbeddedCollection, query, k: int) -> list[Neighbor]:
    """One-off exhaustive search over an embedded collection."""
    if len(corpus) == 0:
        return []
    index = ExactNearestNeighbors().fit(corpus.vectors, corpus.ids)
    return index.kneighbors(query, k)[0]


class HnswNearestNeighbors(BaseEstimator):
    """From-scratch HNSW graph index.

    Layered graph: every node lives on layer 0; a node also appears on all
    layers up to its sampled top level floor(-ln(U) * level_norm). Neighbor
    lists are chosen by the distance heuristic (a candidate is kept only if
    it is closer to the new node than to any already-kept neighbor, with the
    nearest rejected ones filling the list when fewer than m survive), and
    degree caps (m above layer 0, 2m on layer 0) are enforced by re-running
    that selection whenever a list overflows. Links are kept symmetric: when
    re-selection drops an edge, the back-link is removed as well.
    """

    def __init__(
        self,
        m: int = 16,
        ef_construction: int = 200,
        ef_search: int = 128,
        level_norm: float | None = None,
        seed: int = 0,
    ):
        self.m = m
        self.ef_construction = ef_construction
        self.ef_search = ef_search
        self.level_norm = level_norm
        self.seed = seed

    # ---------------------------------------------------------------- build

    def _check_params(self) -> None:
        if self.m < 2:
            raise ConfigError(f"m must be at least 2, got {self.m}")
        if self.ef_construction < self.m:
            raise ConfigError("ef_construction must be at least m")
        if self.ef_search < 1:
            raise ConfigError("ef_search must be at least 1")
        if self.level_norm is not None and not self.level_norm > 0:
            raise ConfigError("level_norm must be positive")

    def fit(self, X, ids: Sequence[str] | None = None):
        self._check_params()
        X = _check_matrix(X, "X")
        if len(X) == 0:
            raise DataError("cannot build an index over an empty collection")
        self.vectors_ = np.ascontiguousarray(X, dtype=np.float32)
        self.ids_ = list(ids) if ids is not None else _default_ids(len(X))
        if len(self.ids_) != len(self.vectors_):
            raise ValueError(f"{len(self.ids_)} ids for {len(self.vectors_)} vectors")
        self.norms_ = np.einsum("ij,ij->i", self.vectors_, self.vectors_)
        self.level_norm_ = (
            self.level_norm if self.level_norm is not None else 1.0 / np.log(self.m)
        )

        n = len(self.vectors_)
        rng = np.random.default_rng(self.seed)
        # U in (0, 1]: -ln(U) is finite and level 0 stays the common case.
        draws = 1.0 - rng.random(n)
        self.levels_ = np.floor(-np.log(draws) * self.level_norm_).astype(np.int64)

        self.layers_: list[dict[int, list[int]]] = [{} for _ in range(self.levels_[0] + 1)]
        for layer in range(self.levels_[0] + 1):
            self.layers_[layer][0] = []
        self.entry_point_ = 0
        self.max_level_ = int(self.levels_[0])
        self._scratch_store = threading.local()

        for node in range(1, n):
            self._insert(node, int(self.levels_[node]))
        return self

    def _insert(self, node: int, level: int) -> None:
        q = self.vectors_[node]
        q2 = float(self.norms_[node])
        ep = self.entry_point_
        d_ep = self._d2_one(q, q2, ep)

        for layer in range(self.max_level_, level, -1):
            ep, d_ep = self._greedy(q, q2, ep, d_ep, layer)

        entry: list[tuple[float, int]] = [(d_ep, ep)]
        for layer in range(min(level, self.max_level_), -1, -1):
            beam = self._search_layer(q, q2, entry, self.ef_construction, layer)
            cap = 2 * self.m if layer == 0 else self.m
            chosen = self._select_neighbors(beam, self.m)
            adjacency = self.layers_[layer]
            adjacency[node] = list(chosen)
            for other in chosen:
                other_list = adjacency[other]
                other_list.append(node)
                if len(other_list) > cap:
                    self._shrink(other, layer, cap)
            entry = beam

        if level > self.max_level_:
            for layer in range(self.max_level_ + 1, level + 1):
                self.layers_.append({node: []})
            self.entry_point_ = node
            self.max_level_ = level

    def _scratch(self) -> tuple[np.ndarray, int]:
        """Per-thread visited stamps, so concurrent searches never collide."""
        store = self._scratch_store
        n = len(self.vectors_)
        if getattr(store, "stamp", None) is None or len(store.stamp) != n:
            store.stamp = np.zeros(n, dtype=np.int64)
            store.tag = 0
        store.tag += 1
        return store.stamp, store.tag

    def _d2_one(self, q: np.ndarray, q2: float, node: int) -> float:
        dot = float(self.vectors_[node] @ q)
        return max(float(self.norms_[node]) - 2.0 * dot + q2, 0.0)

    def _d2_many(self, q: np.ndarray, q2: float, nodes: np.ndarray) -> np.ndarray:
        rows = self.vectors_.take(nodes, axis=0)
        d2 = self.norms_.take(nodes) - 2.0 * (rows @ q) + q2
        np.maximum(d2, 0.0, out=d2)
        return d2

    def _greedy(
        self, q: np.ndarray, q2: float, ep: int, d_ep: float, layer: int
    ) -> tuple[int, float]:
        adjacency = self.layers_[layer]
        while True:
            neighbors = adjacency.get(ep)
            if not neighbors:
                return ep, d_ep
            arr = np.asarray(neighbors, dtype=np.int64)
            d2 = self._d2_many(q, q2, arr)
            j = int(np.argmin(d2))
            if d2[j] < d_ep:
                ep, d_ep = int(arr[j]), float(d2[j])
            else:
                return ep, d_ep

    def _search_layer(
        self,
        q: np.ndarray,
        q2: float,
        entry: list[tuple[float, int]],
        ef: int,
        layer: int,
    ) -> list[tuple[float, int]]:
        """Beam search: returns up to ef (squared distance, node) pairs."""
        adjacency = self.layers_[layer]
        stamp, tag = self._scratch()

        candidates: list[tuple[float, int]] = []
        best: list[tuple[float, int]] = []
        for d, node in entry:
            if stamp[node] == tag:
                continue
            stamp[node] = tag
            candidates.append((d, node))
            best.append((-d, node))
        heapq.heapify(candidates)
        heapq.heapify(best)
        while len(best) > ef:
            heapq.heappop(best)

        while candidates:
            d, node = heapq.heappop(candidates)
            if len(best) >= ef and d > -best[0][0]:
                break
            neighbors = adjacency.get(node)
            if not neighbors:
                continue
            arr = np.asarray(neighbors, dtype=np.int64)
            fresh = arr[stamp[arr] != tag]
            if fresh.size == 0:
                continue
            stamp[fresh] = tag
            d2 = self._d2_many(q, q2, fresh)
            if len(best) >= ef:
                keep = d2 < -best[0][0]
                fresh, d2 = fresh[keep], d2[keep]
            for i in range(fresh.size):
                dd = float(d2[i])
                other = int(fresh[i])
                if len(best) < ef:
                    heapq.heappush(best, (-dd, other))
                    heapq.heappush(candidates, (dd, other))
                elif dd < -best[0][0]:
                    heapq.heappushpop(best, (-dd, other))
                    heapq.heappush(candidates, (dd, other))
        return [(-negative, node) for negative, node in best]

    def _select_neighbors(self, beam: list[tuple[float, int]], m: int) -> list[int]:
        """Distance-heuristic selection from a beam of (d2, node) pairs."""
        ordered = sorted(beam, key=lambda pair: (pair[0], pair[1]))
        if len(ordered) <= m:
            return [node for _, node in ordered]
        count = len(ordered)
        nodes = np.fromiter((node for _, node in ordered), dtype=np.int64, count=count)
        rows = self.vectors_.take(nodes, axis=0)
        node_norms = self.norms_.take(nodes)
        gram = rows @ rows.T
        pairwise = node_norms[None, :] - 2.0 * gram + node_norms[:, None]

        # min_to_selected[i] tracks the distance from candidate i to the
        # nearest already-selected node; one vectorized update per selection.
        min_to_selected = np.full(count, np.inf)
        selected: list[int] = []
        rejected: list[int] = []
        for i, (d_q, _) in enumerate(ordered):
            if len(selected) == m:
                break
            if selected and min_to_selected[i] <= d_q:
                rejected.append(i)
            else:
                selected.append(i)
                np.minimum(min_to_selected, pairwise[i], out=min_to_selected)
        for i in rejected:
            if len(selected) == m:
                break
            selected.append(i)
        return [int(nodes[i]) for i in selected]

    def _shrink(self, node: int, layer: int, cap: int) -> None:
        """Re-select an overflowing neighbor list, dropping back-links too."""
        adjacency = self.layers_[layer]
        current = adjacency[node]
        arr = np.asarray(current, dtype=np.int64)
        q = self.vectors_[node]
        d2 = self._d2_many(q, float(self.norms_[node]), arr)
        beam = [(float(d2[i]), int(arr[i])) for i in range(arr.size)]
        kept = self._select_neighbors(beam, cap)
        kept_set = set(kept)
        for dropped in current:
            if dropped not in kept_set:
                adjacency[dropped].remove(node)
        adjacency[node] = kept

    # --------------------------------------------------------------- search

    def kneighbors(
        self, X, n_neighbors: int, ef_search: int | None = None
    ) -> list[list[Neighbor]]:
        if n_neighbors < 1:
            raise ConfigError("n_neighbors must be at least 1")
        ef = self.ef_search if ef_search is None else ef_search
        ef = max(ef, n_neighbors)
        Q = _check_matrix(X, "query")
        if Q.shape[1] != self.vectors_.shape[1]:
            raise DimensionError(
                f"query dim {Q.shape[1]} does not match index dim {self.vectors_.shape[1]}"
            )
        Q = np.ascontiguousarray(Q, dtype=np.float32)
        return [self._search_one(Q[i], n_neighbors, ef) for i in range(len(Q))]

    def _search_one(self, q: np.ndarray, k: int, ef: int) -> list[Neighbor]:
        q2 = float(q @ q)
        ep = self.entry_point_
        d_ep = self._d2_one(q, q2, ep)
        for layer in range(self.max_level_, 0, -1):
            ep, d_ep = self._greedy(q, q2, ep, d_ep, layer)
        beam = self._search_layer(q, q2, [(d_ep, ep)], ef, 0)

        # Boundary re-rank in double precision with id tie-breaks, so the
        # reported order matches the exact scan on fully explored graphs.
        nodes = np.fromiter((node for _, node in beam), dtype=np.int64)
        diffs = self.vectors_[nodes].astype(np.float64) - q.astype(np.float64)
        d2 = np.einsum("ij,ij->i", diffs, diffs)
        ranked = sorted(
            (float(d2[i]), self.ids_[int(nodes[i])]) for i in range(len(nodes))
        )
        return [Neighbor(entity_id, float(np.sqrt(d))) for d, entity_id in ranked[:k]]

    # ---------------------------------------------------------- persistence

    _MAGIC = b"NMHI"
    _VERSION = 1

    def save(self, path: str | Path) -> None:
        """Versioned little-endian dump of parameters, vectors, ids, and layers."""
        n, dim = self.vectors_.shape
        with open(path, "wb") as out:
            out.write(self._MAGIC)
            out.write(struct.pack("<H", self._VERSION))
            out.write(
                struct.pack(
                    "<IIIdQ",
                    self.m,
                    self.ef_construction,
                    self.ef_search,
                    float(self.level_norm_),
                    self.seed,
                )
            )
            out.write(struct.pack("<IQQI", dim, n, self.entry_point_, self.max_level_))
            out.write(np.ascontiguousarray(self.levels_, dtype="<i4").tobytes())
            out.write(np.ascontiguousarray(self.vectors_, dtype="<f4").tobytes())
            for entity_id in self.ids_:
                raw = entity_id.encode("utf-8")
                out.write(struct.pack("<I", len(raw)))
                out.write(raw)
            for layer in self.layers_:
                out.write(struct.pack("<Q", len(layer)))
                for node in sorted(layer):
                    neighbors = layer[node]
                    out.write(struct.pack("<QI", node, len(neighbors)))
                    out.write(np.asarray(neighbors, dtype="<u4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "HnswNearestNeighbors":
        path = Path(path)
        with open(path, "rb") as handle:
            magic = handle.read(4)
            if magic != cls._MAGIC:
                raise DataError(f"{path}: bad magic bytes {magic!r}")
            (version,) = struct.unpack("<H", handle.read(2))
            if version != cls._VERSION:
                raise DataError(f"{path}: unsupported version {version}")
            m, ef_construction, ef_search, level_norm, seed = struct.unpack(
                "<IIIdQ", handle.read(struct.calcsize("<IIIdQ"))
            )
            dim, n, entry_point, max_level = struct.unpack(
                "<IQQI", handle.read(struct.calcsize("<IQQI"))
            )
            index = cls(
                m=m,
                ef_construction=ef_construction,
                ef_search=ef_search,
                level_norm=level_norm,
                seed=int(seed),
            )
            index.level_norm_ = level_norm
            index.levels_ = np.frombuffer(handle.read(4 * n), dtype="<i4").astype(np.int64)
            vectors = np.frombuffer(handle.read(4 * n * dim), dtype="<f4")
            index.vectors_ = np.ascontiguousarray(vectors.reshape(n, dim))
            index.ids_ = []
            for _ in range(n):
                (id_len,) = struct.unpack("<I", handle.read(4))
                index.ids_.append(handle.read(id_len).decode("utf-8"))
            index.layers_ = []
            for _ in range(max_level + 1):
                (node_count,) = struct.unpack("<Q", handle.read(8))
                layer: dict[int, list[int]] = {}
                for _ in range(node_count):
                    node, degree = struct.unpack("<QI", handle.read(12))
                    raw = handle.read(4 * degree)
                    layer[int(node)] = [int(x) for x in np.frombuffer(raw, dtype="<u4")]
                index.layers_.append(layer)
            if handle.read(1):
                raise DataError(f"{path}: trailing bytes")
        index.norms_ = np.einsum("ij,ij->i", index.vectors_, index.vectors_)
        index.entry_point_ = int(entry_point)
        index.max_level_ = int(max_level)
        index._scratch_store = threading.local()
        return index


def hnsw_build(
    corpus: EmbeddedCollection,
    m: int = 16,
    ef_construction: int = 200,
    ef_search: int = 128,
    level_norm: float | None = None,
    seed: int = 0,
) -> HnswNearestNeighbors:
    """Build an HNSW index over an embedded collection, in collection order."""
    index = HnswNearestNeighbors(
        m=m,
        ef_construction=ef_construction,
        ef_search=ef_search,
        level_norm=level_norm,
        seed=seed,
    )
    return index.fit(corpus.vectors, corpus.ids)


def hnsw_search(
    index: HnswNearestNeighbors, query, k: int, ef_search: int | None = None
) -> list[Neighbor]:
    """Search one query vector; ef_search below k is treated as k."""
    return index.kneighbors(query, k, ef_search=ef_search)[0]


def audit_structure(index: HnswNearestNeighbors) -> list[str]:
    """Check the graph invariants; returns human-readable violations (empty = sound)."""
    problems: list[str] = []
    n = len(index.vectors_)
    for layer_number, layer in enumerate(index.layers_):
        cap = 2 * index.m if layer_number == 0 else index.m
        for node, neighbors in layer.items():
            if not 0 <= node < n:
                problems.append(f"layer {layer_number}: unknown node {node}")
                continue
            if index.levels_[node] < layer_number:
                problems.append(
                    f"layer {layer_number}: node {node} has level {index.levels_[node]}"
                )
            if len(neighbors) > cap:
                problems.append(
                    f"layer {layer_number}: node {node} degree {len(neighbors)} > cap {cap}"
                )
            if len(set(neighbors)) != len(neighbors):
                problems.append(f"layer {layer_number}: node {node} repeats a neighbor")
            if node in neighbors:
                problems.append(f"layer {layer_number}: node {node} links to itself")
            for other in neighbors:
                if other not in layer:
                    problems.append(
                        f"layer {layer_number}: edge {node}->{other} leaves the layer"
                    )
                elif node not in layer[other]:
                    problems.append(
                        f"layer {layer_number}: edge {node}->{other} has no back-link"
                    )
    for layer_number in range(1, len(index.layers_)):
        for node in index.layers_[layer_number]:
            if node not in index.layers_[layer_number - 1]:
                problems.append(
                    f"node {node} on layer {layer_number} missing from layer below"
                )
    if index.entry_point_ not in index.layers_[index.max_level_]:
        problems.append("entry point missing from the top layer")
    return problems
