"""Similarity scoring and one-to-one matching over candidate pairs.

Scores map Euclidean distance d to 1 / (1 + d), so identical vectors score
1.0 and similarity decays toward zero. Three bipartite decision rules are
provided: a greedy scan that keeps the best available pair (unique mapping),
a mutual-best rule, and a proposal scheme where one side proposes in
descending order and the other side accepts its first offer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .blocking import CandidateSet
from .embedding import EmbeddedCollection
from .errors import ConfigError, DataError
from .evaluation import match_metrics
from .model import GroundTruth

CROSS_PRODUCT_BUDGET = 10**8

DEFAULT_GRID = tuple(round(i / 20, 2) for i in range(1, 20))


@dataclass(frozen=True)
class ScoredPair:
    left_id: str
    right_id: str
    similarity: float


@dataclass(frozen=True)
class MatchSet:
    """Accepted pairs, each id on either side used at most once."""

    pairs: frozenset[tuple[str, str]]
    threshold_used: float
    scored: tuple[ScoredPair, ...]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class SweepPoint:
    delta: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class SweepResult:
    curve: tuple[SweepPoint, ...]
    best: SweepPoint


def to_similarity(distance: float) -> float:
    """Convert a Euclidean distance into a similarity in (0, 1]."""
    if distance < 0:
        raise ValueError(f"distance must be nonnegative, got {distance}")
    return 1.0 / (1.0 + distance)


def _sort_key(pair: ScoredPair):
    return (-pair.similarity, pair.left_id, pair.right_id)


def score_pairs(
    pairs: CandidateSet | Iterable[tuple[str, str]],
    left: EmbeddedCollection,
    right: EmbeddedCollection | None = None,
) -> list[ScoredPair]:
    """Score id pairs against their embeddings, best first.

    Ordering is descending similarity with ties broken by (left_id,
    right_id). Ids missing from the collections are an error. With a single
    collection both sides of each pair resolve against it.
    """
    if right is None:
        right = left
    if isinstance(pairs, CandidateSet):
        pairs = pairs.pairs
    pair_list = sorted(pairs)
    if not pair_list:
        return []
    left_rows = np.empty(len(pair_list), dtype=np.int64)
    right_rows = np.empty(len(pair_list), dtype=np.int64)
    for i, (left_id, right_id) in enumerate(pair_list):
        try:
            left_rows[i] = left.position(left_id)
        except KeyError:
            raise DataError(f"unknown id in pair: {left_id!r}") from None
        try:
            right_rows[i] = right.position(right_id)
        except KeyError:
            raise DataError(f"unknown id in pair: {right_id!r}") from None
    diffs = left.vectors[left_rows].astype(np.float64) - right.vectors[right_rows].astype(
        np.float64
    )
    distances = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    similarities = 1.0 / (1.0 + distances)
    scored = [
        ScoredPair(pair[0], pair[1], float(similarities[i]))
        for i, pair in enumerate(pair_list)
    ]
    scored.sort(key=_sort_key)
    return scored


def cross_product(left: EmbeddedCollection, right: EmbeddedCollection) -> Iterable[tuple[str, str]]:
    """Every id pair across two collections."""
    return itertools.product(left.ids, right.ids)


def unique_mapping_clustering(
    scored: Sequence[ScoredPair], delta: float, smaller_size: int
) -> MatchSet:
    """Greedy best-first matching.

    Scans pairs in descending similarity and accepts a pair when neither
    endpoint is matched yet. Stops once the smaller collection is exhausted
    or the scan reaches similarity <= delta.
    """
    ordered = sorted(scored, key=_sort_key)
    matched_left: set[str] = set()
    matched_right: set[str] = set()
    accepted: list[ScoredPair] = []
    for pair in ordered:
        if len(accepted) >= smaller_size:
            break
        if pair.similarity <= delta:
            break
        if pair.left_id in matched_left or pair.right_id in matched_right:
            continue
        matched_left.add(pair.left_id)
        matched_right.add(pair.right_id)
        accepted.append(pair)
    pairs = frozenset((pair.left_id, pair.right_id) for pair in accepted)
    return MatchSet(pairs, delta, tuple(accepted))


def mutual_best_clustering(scored: Sequence[ScoredPair], delta: float) -> MatchSet:
    """Keep only mutual best pairs above delta.

    A pair survives when each endpoint is the other's single best partner;
    equal-similarity rivals are resolved toward the smaller id on the
    opposite side, so the rule is symmetric under role swap.
    """
    ordered = sorted(scored, key=_sort_key)
    best_for_left: dict[str, tuple[str, str]] = {}
    best_for_right: dict[str, tuple[str, str]] = {}
    for pair in ordered:
        key = (pair.left_id, pair.right_id)
        best_for_left.setdefault(pair.left_id, key)
        best_for_right.setdefault(pair.right_id, key)
    accepted = [
        pair
        for pair in ordered
        if pair.similarity > delta
        and best_for_left[pair.left_id] == (pair.left_id, pair.right_id)
        and best_for_right[pair.right_id] == (pair.left_id, pair.right_id)
    ]
    pairs = frozenset((pair.left_id, pair.right_id) for pair in accepted)
    return MatchSet(pairs, delta, tuple(accepted))


def proposal_clustering(scored: Sequence[ScoredPair], delta: float) -> MatchSet:
    """Proposal matching: left entities offer in descending similarity order.

    A right entity accepts the first offer it sees and never switches, and a
    left entity stops once accepted. Offers at or below delta are never made.
    Over a shared descending scan this accepts exactly the pairs whose both
    endpoints are still free.
    """
    ordered = sorted(scored, key=_sort_key)
    engaged_left: set[str] = set()
    engaged_right: set[str] = set()
    accepted: list[ScoredPair] = []
    for pair in ordered:
        if pair.similarity <= delta:
            break
        if pair.left_id in engaged_left or pair.right_id in engaged_right:
            continue
        engaged_left.add(pair.left_id)
        engaged_right.add(pair.right_id)
        accepted.append(pair)
    pairs = frozenset((pair.left_id, pair.right_id) for pair in accepted)
    return MatchSet(pairs, delta, tuple(accepted))


def threshold_sweep(
    scored: Sequence[ScoredPair],
    gt: GroundTruth,
    smaller_size: int,
    grid: Sequence[float] | None = None,
) -> SweepResult:
    """Run greedy matching at every threshold in the grid and pick the best F1.

    Ties on F1 resolve toward the larger threshold. The default grid is
    0.05 through 0.95 in steps of 0.05.
    """
    if grid is None:
        grid = DEFAULT_GRID
    grid = tuple(grid)
    if not grid:
        raise ConfigError("threshold grid must not be empty")
    for value in grid:
        if not 0.0 < value < 1.0:
            raise ConfigError(f"thresholds must lie strictly between 0 and 1, got {value}")
    ordered = sorted(scored, key=_sort_key)
    points = []
    for delta in sorted(grid):
        matches = unique_mapping_clustering(ordered, delta, smaller_size)
        precision, recall, f1 = match_metrics(matches.pairs, gt)
        points.append(SweepPoint(delta, precision, recall, f1))
    best = max(points, key=lambda point: (point.f1, point.delta))
    return SweepResult(tuple(points), best)


def write_matches(matches: MatchSet, path: str | Path) -> None:
    """Export accepted pairs as CSV rows of left_id, right_id, similarity."""
    from .blocking import _csv_cell

    ordered = sorted(matches.scored, key=_sort_key)
    with open(Path(path), "w", newline="", encoding="utf-8") as handle:
        handle.write("left_id,right_id,similarity\n")
        for pair in ordered:
            handle.write(
                f"{_csv_cell(pair.left_id)},{_csv_cell(pair.right_id)},{pair.similarity!r}\n"
            )


def load_matches(path: str | Path) -> list[ScoredPair]:
    """Read a match CSV written by write_matches."""
    import csv as _csv

    path = Path(path)
    scored: list[ScoredPair] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = _csv.reader(handle)
        header = next(reader, None)
        if header is None or len(header) != 3:
            raise DataError(f"{path}: expected a three-column header")
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}: line {line_number}: expected 3 cells")
            try:
                similarity = float(row[2])
            except ValueError:
                raise DataError(
                    f"{path}: line {line_number}: bad similarity {row[2]!r}"
                ) from None
            scored.append(ScoredPair(row[0], row[1], similarity))
    return scored


def write_curve(result: SweepResult, path: str | Path) -> None:
    """Export a sweep as CSV rows of delta, precision, recall, f1."""
    with open(Path(path), "w", newline="", encoding="utf-8") as handle:
        handle.write("delta,precision,recall,f1\n")
        for point in result.curve:
            handle.write(
                f"{point.delta!r},{point.precision!r},{point.recall!r},{point.f1!r}\n"
            )
