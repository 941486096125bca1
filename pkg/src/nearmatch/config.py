"""Pipeline configuration: a flat key/value file with dotted section keys.

Example::

    task.kind = clean-clean
    task.left = data/catalog_a.csv
    task.right = data/catalog_b.csv
    task.groundtruth = data/truth.csv
    embedder.kind = char-ngram
    blocking.k = 10
    blocking.index = hnsw
    matching.delta = 0.5
    output.dir = out
    seed = 42

Lines starting with # are comments. Relative paths resolve against the
config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .model import CLEAN_CLEAN, DIRTY

_KNOWN_KEYS = {
    "task.kind",
    "task.left",
    "task.left_id_column",
    "task.right",
    "task.right_id_column",
    "task.input",
    "task.input_id_column",
    "task.groundtruth",
    "embedder.kind",
    "embedder.dim",
    "embedder.buckets",
    "embedder.n_min",
    "embedder.n_max",
    "embedder.seed",
    "embedder.vectors",
    "blocking.k",
    "blocking.index",
    "blocking.hnsw.m",
    "blocking.hnsw.ef_construction",
    "blocking.hnsw.ef_search",
    "blocking.hnsw.seed",
    "matching.algorithm",
    "matching.delta",
    "matching.sweep",
    "matching.budget",
    "output.dir",
    "seed",
    "threads",
}

EMBEDDER_KINDS = ("char-ngram", "word-avg", "precomputed")
INDEX_KINDS = ("exact", "hnsw")
ALGORITHMS = ("unique-mapping", "mutual-best", "proposal")


def parse_config(path: str | Path) -> dict[str, str]:
    """Read a key = value file into a flat mapping, with line-numbered errors."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"{path}: {err}") from err
    mapping: dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {line_number}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}: line {line_number}: empty key")
        if key in mapping:
            raise ConfigError(f"{path}: line {line_number}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def _as_int(mapping, key, default=None, minimum=None):
    raw = mapping.get(key)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key}: must be at least {minimum}, got {value}")
    return value


def _as_float(mapping, key, default=None):
    raw = mapping.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _as_bool(mapping, key, default=False):
    raw = mapping.get(key)
    if raw is None:
        return default
    lowered = raw.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {raw!r}")


def _as_choice(mapping, key, choices, default):
    value = mapping.get(key, default)
    if value not in choices:
        raise ConfigError(f"{key}: expected one of {', '.join(choices)}, got {value!r}")
    return value


def _as_path(mapping, key, base_dir: Path, default=None):
    raw = mapping.get(key)
    if raw is None:
        return default
    path = Path(raw)
    return path if path.is_absolute() else base_dir / path


@dataclass(frozen=True)
class PipelineConfig:
    """Validated settings for one full pipeline run."""

    kind: str
    left_path: Path
    left_id_column: str
    right_path: Path | None
    right_id_column: str | None
    groundtruth_path: Path | None
    embedder_kind: str
    embedder_options: Mapping[str, object] = field(default_factory=dict)
    k: int = 10
    index_kind: str = "exact"
    index_options: Mapping[str, object] = field(default_factory=dict)
    algorithm: str = "unique-mapping"
    delta: float | None = None
    sweep: bool = False
    budget: int = 10**8
    output_dir: Path = Path("out")
    seed: int = 0
    threads: int = 1


def config_from_mapping(mapping: Mapping[str, str], base_dir: str | Path = ".") -> PipelineConfig:
    """Validate a flat key/value mapping into a PipelineConfig."""
    base_dir = Path(base_dir)
    unknown = sorted(set(mapping) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    kind = _as_choice(mapping, "task.kind", (CLEAN_CLEAN, DIRTY), CLEAN_CLEAN)
    if kind == CLEAN_CLEAN:
        left = _as_path(mapping, "task.left", base_dir)
        right = _as_path(mapping, "task.right", base_dir)
        if left is None or right is None:
            raise ConfigError("clean-clean tasks need task.left and task.right")
        left_id = mapping.get("task.left_id_column", "id")
        right_id = mapping.get("task.right_id_column", "id")
        if "task.input" in mapping:
            raise ConfigError("task.input applies to dirty tasks only")
    else:
        left = _as_path(mapping, "task.input", base_dir)
        if left is None:
            raise ConfigError("dirty tasks need task.input")
        if "task.left" in mapping or "task.right" in mapping:
            raise ConfigError("task.left/task.right apply to clean-clean tasks only")
        left_id = mapping.get("task.input_id_column", "id")
        right = None
        right_id = None

    groundtruth = _as_path(mapping, "task.groundtruth", base_dir)

    embedder_kind = _as_choice(mapping, "embedder.kind", EMBEDDER_KINDS, "char-ngram")
    seed = _as_int(mapping, "seed", 0)
    embedder_options: dict[str, object] = {}
    if embedder_kind == "char-ngram":
        embedder_options["dim"] = _as_int(mapping, "embedder.dim", 300, minimum=1)
        embedder_options["buckets"] = _as_int(
            mapping, "embedder.buckets", 2_000_000, minimum=1
        )
        embedder_options["n_min"] = _as_int(mapping, "embedder.n_min", 3, minimum=1)
        embedder_options["n_max"] = _as_int(mapping, "embedder.n_max", 5, minimum=1)
        embedder_options["seed"] = _as_int(mapping, "embedder.seed", 42)
    else:
        vectors = _as_path(mapping, "embedder.vectors", base_dir)
        if vectors is None:
            raise ConfigError(f"{embedder_kind} embedder needs embedder.vectors")
        embedder_options["vectors"] = vectors

    k = _as_int(mapping, "blocking.k", 10, minimum=1)
    index_kind = _as_choice(mapping, "blocking.index", INDEX_KINDS, "exact")
    index_options: dict[str, object] = {}
    if index_kind == "hnsw":
        for name, default in (("m", 16), ("ef_construction", 200), ("ef_search", 128)):
            index_options[name] = _as_int(mapping, f"blocking.hnsw.{name}", default, minimum=1)
        index_options["seed"] = _as_int(mapping, "blocking.hnsw.seed", seed)
    elif any(key.startswith("blocking.hnsw.") for key in mapping):
        raise ConfigError("blocking.hnsw.* options require blocking.index = hnsw")

    algorithm = _as_choice(mapping, "matching.algorithm", ALGORITHMS, "unique-mapping")
    delta = _as_float(mapping, "matching.delta")
    sweep = _as_bool(mapping, "matching.sweep", default=delta is None)
    if delta is not None and not 0.0 < delta < 1.0:
        raise ConfigError(f"matching.delta must lie strictly between 0 and 1, got {delta}")
    if delta is not None and sweep:
        raise ConfigError("set either matching.delta or matching.sweep, not both")
    budget = _as_int(mapping, "matching.budget", 10**8, minimum=1)

    output_dir = _as_path(mapping, "output.dir", base_dir, default=base_dir / "out")
    threads = _as_int(mapping, "threads", 1, minimum=1)

    return PipelineConfig(
        kind=kind,
        left_path=left,
        left_id_column=left_id,
        right_path=right,
        right_id_column=right_id,
        groundtruth_path=groundtruth,
        embedder_kind=embedder_kind,
        embedder_options=embedder_options,
        k=k,
        index_kind=index_kind,
        index_options=index_options,
        algorithm=algorithm,
        delta=delta,
        sweep=sweep,
        budget=budget,
        output_dir=output_dir,
        seed=seed,
        threads=threads,
    )


def load_config(path: str | Path, overrides: Mapping[str, str] | None = None) -> PipelineConfig:
    """Parse a config file, apply overrides, and validate."""
    path = Path(path)
    mapping = parse_config(path)
    if overrides:
        mapping.update(overrides)
    return config_from_mapping(mapping, base_dir=path.parent)
