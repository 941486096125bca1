"""Metrics over match decisions, model ranking across datasets, and reports.

Precision, recall, and F1 follow the usual conventions; ranking uses
competition semantics (rank 1 is the best score, ties share the smaller
rank); report writers emit byte-identical files for identical inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

from .errors import ConfigError, DataError
from .model import GroundTruth, normalize_pair

BLOCKING_REPORT_FIELDS = ("model", "dataset", "k", "index", "recall", "precision", "secs")
MATCHING_REPORT_FIELDS = (
    "model",
    "dataset",
    "algorithm",
    "delta",
    "precision",
    "recall",
    "f1",
    "secs",
)


class MetricTriple(NamedTuple):
    precision: float
    recall: float
    f1: float


def match_metrics(matches, gt: GroundTruth) -> MetricTriple:
    """Precision, recall, and F1 of a match set against the truth.

    Accepts a MatchSet or any iterable of id pairs; pair orientation is
    ignored. Empty matches give precision 0; an empty truth gives recall 1.
    """
    pairs = getattr(matches, "pairs", matches)
    normalized = {normalize_pair(left, right) for left, right in pairs}
    hits = len(normalized & gt.pairs)
    precision = hits / len(normalized) if normalized else 0.0
    recall = hits / len(gt.pairs) if gt.pairs else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricTriple(precision, recall, f1)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient, clamped into [-1, 1]."""
    if len(xs) != len(ys):
        raise DataError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise DataError("correlation needs at least two points")
    n = len(xs)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    var_x = math.fsum(d * d for d in dx)
    var_y = math.fsum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise DataError("correlation undefined for a constant sequence")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / (math.sqrt(var_x) * math.sqrt(var_y))
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class ScoreMatrix:
    """Model-by-dataset score grid; a missing key marks an absent cell."""

    models: tuple[str, ...]
    datasets: tuple[str, ...]
    scores: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        model_set = set(self.models)
        dataset_set = set(self.datasets)
        if len(model_set) != len(self.models):
            raise DataError("duplicate model tags")
        if len(dataset_set) != len(self.datasets):
            raise DataError("duplicate dataset tags")
        for model, dataset in self.scores:
            if model not in model_set or dataset not in dataset_set:
                raise DataError(f"score for unknown cell ({model!r}, {dataset!r})")


@dataclass(frozen=True)
class RankResult:
    """Competition ranks per cell plus each model's average rank."""

    ranks: Mapping[tuple[str, str], int]
    average: Mapping[str, float]


def rank_models(scores: ScoreMatrix) -> RankResult:
    """Rank models within each dataset column, best score first.

    Rank is 1 plus the number of strictly better scores in the column, so
    tied models share the smaller rank. Absent cells get no rank and do not
    count toward a model's average; a model absent everywhere has none.
    """
    ranks: dict[tuple[str, str], int] = {}
    for dataset in scores.datasets:
        column = [
            (model, scores.scores[(model, dataset)])
            for model in scores.models
            if (model, dataset) in scores.scores
        ]
        values = [value for _, value in column]
        for model, value in column:
            ranks[(model, dataset)] = 1 + sum(1 for other in values if other > value)
    average: dict[str, float] = {}
    for model in scores.models:
        model_ranks = [
            ranks[(model, dataset)]
            for dataset in scores.datasets
            if (model, dataset) in ranks
        ]
        if model_ranks:
            average[model] = math.fsum(model_ranks) / len(model_ranks)
    return RankResult(ranks, average)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(
    rows: Sequence[Mapping[str, object]],
    path: str | Path,
    format: str = "csv",
    fields: Sequence[str] | None = None,
) -> None:
    """Write result rows as CSV or JSON lines with a stable field order.

    CSV field order comes from `fields` or, when omitted, from first
    appearance across the rows. Re-running with equal inputs reproduces the
    file byte for byte.
    """
    if format not in ("csv", "json-lines"):
        raise ConfigError(f"unknown report format {format!r}")
    if fields is None:
        seen: dict[str, None] = {}
        for row in rows:
            for key in row:
                seen.setdefault(key)
        fields = tuple(seen)
        if not fields and format == "csv":
            raise ConfigError("cannot infer CSV fields from empty results")
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            if format == "csv":
                handle.write(",".join(fields) + "\n")
                for row in rows:
                    handle.write(
                        ",".join(_escape(_format_cell(row.get(name))) for name in fields)
                        + "\n"
                    )
            else:
                for row in rows:
                    ordered = {name: row.get(name) for name in fields if name in row}
                    handle.write(json.dumps(ordered, sort_keys=True) + "\n")
    except OSError as err:
        raise DataError(f"{path}: {err}") from err


def _escape(cell: str) -> str:
    if any(ch in cell for ch in ',"\n\r'):
        return '"' + cell.replace('"', '""') + '"'
    return cell
