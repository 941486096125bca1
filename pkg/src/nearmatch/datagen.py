"""Seedable synthetic person-record generator for single-source dedup tasks.

Clean entities are sampled attribute-by-attribute from frequency tables;
duplicate groups then get corrupted copies built from character and word
edits. The output feeds the normal pipeline: an entity collection plus the
ground truth of within-group pairs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .model import Entity, EntityCollection, GroundTruth, normalize_pair

_CHAR_POOL = "abcdefghijklmnopqrstuvwxyz0123456789"

_BUNDLED_TABLES = {
    "given_name": "given_names.csv",
    "surname": "surnames.csv",
    "address_1": "street_names.csv",
    "suburb": "suburbs.csv",
    "postcode": "postcodes.csv",
    "state": "states.csv",
}


class FrequencyTable:
    """Values with sampling weights; draws are proportional to the weights."""

    def __init__(self, values, weights):
        values = tuple(values)
        weights = tuple(float(w) for w in weights)
        if not values:
            raise ConfigError("frequency table must not be empty")
        if len(values) != len(weights):
            raise ConfigError("values and weights must align")
        if len(set(values)) != len(values):
            raise ConfigError("duplicate values in frequency table")
        for weight in weights:
            if not weight > 0 or not np.isfinite(weight):
                raise ConfigError(f"weights must be positive and finite, got {weight}")
        self.values = values
        total = sum(weights)
        self.probabilities = np.asarray(weights, dtype=np.float64) / total

    def __len__(self) -> int:
        return len(self.values)

    def sample(self, rng: np.random.Generator) -> str:
        return self.values[int(rng.choice(len(self.values), p=self.probabilities))]

    def sample_many(self, rng: np.random.Generator, count: int) -> list[str]:
        picks = rng.choice(len(self.values), size=count, p=self.probabilities)
        return [self.values[int(i)] for i in picks]


def load_frequency_table(path: str | Path) -> FrequencyTable:
    """Parse a value,count CSV into a sampling table."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        return _parse_frequency_rows(csv.reader(handle), str(path))


def _parse_frequency_rows(reader, origin: str) -> FrequencyTable:
    header = next(reader, None)
    if header is None or [cell.strip() for cell in header] != ["value", "count"]:
        raise DataError(f"{origin}: expected header 'value,count'")
    values = []
    weights = []
    for line_number, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise DataError(f"{origin}: line {line_number}: expected 2 cells")
        value = row[0].strip()
        if not value:
            raise DataError(f"{origin}: line {line_number}: empty value")
        try:
            weight = float(row[1])
        except ValueError:
            raise DataError(
                f"{origin}: line {line_number}: bad count {row[1]!r}"
            ) from None
        values.append(value)
        weights.append(weight)
    try:
        return FrequencyTable(values, weights)
    except ConfigError as err:
        raise DataError(f"{origin}: {err}") from None


def default_vocabulary() -> dict[str, FrequencyTable]:
    """The bundled twelve-attribute vocabulary.

    Name-like attributes come from packaged frequency tables; numeric ones
    (street numbers, dates, ages, phones, ids) are deterministic synthetic
    grids so the vocabulary needs no external files.
    """
    tables: dict[str, FrequencyTable] = {}
    package_data = resources.files("nearmatch").joinpath("data")
    for attribute, filename in _BUNDLED_TABLES.items():
        with package_data.joinpath(filename).open(newline="", encoding="utf-8") as handle:
            tables[attribute] = _parse_frequency_rows(csv.reader(handle), filename)

    uniform = lambda values: FrequencyTable(values, [1.0] * len(values))
    street_numbers = uniform([str(i) for i in range(1, 301)])
    address_2 = uniform(
        [f"{kind} {i}" for kind in ("unit", "apt", "flat", "suite") for i in range(1, 26)]
    )
    dates = uniform(
        [
            f"{year:04d}{month:02d}{(year * 7 + month * 3) % 28 + 1:02d}"
            for year in range(1940, 2005)
            for month in range(1, 13)
        ]
    )
    ages = uniform([str(i) for i in range(18, 93)])
    phones = uniform(
        [
            f"0{2 + i % 8} {1200 + i * 37 % 8000:04d} {3000 + i * 53 % 9000:04d}"
            for i in range(200)
        ]
    )
    ids = uniform([f"{1000000 + i * 33013 % 9000000:07d}" for i in range(300)])

    ordered = {
        "given_name": tables["given_name"],
        "surname": tables["surname"],
        "street_number": street_numbers,
        "address_1": tables["address_1"],
        "address_2": address_2,
        "suburb": tables["suburb"],
        "postcode": tables["postcode"],
        "state": tables["state"],
        "date_of_birth": dates,
        "age": ages,
        "phone_number": phones,
        "soc_sec_id": ids,
    }
    return ordered


@dataclass(frozen=True)
class GenParams:
    """Size, duplication, and corruption limits for one generated dataset."""

    n_total: int
    dup_fraction: float = 0.40
    max_dups_per_record: int = 9
    max_mods_per_attribute: int = 3
    max_mods_per_record: int = 10
    n_attributes: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_total < 0:
            raise ConfigError("n_total must be nonnegative")
        if not 0.0 <= self.dup_fraction <= 1.0:
            raise ConfigError("dup_fraction must lie in [0, 1]")
        for name in ("max_dups_per_record", "max_mods_per_attribute", "max_mods_per_record"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.n_attributes < 1:
            raise ConfigError("n_attributes must be at least 1")


@dataclass(frozen=True)
class GeneratedDataset:
    collection: EntityCollection
    groundtruth: GroundTruth
    params: GenParams
    audit: dict = field(compare=False)


def _select_attributes(vocab: dict[str, FrequencyTable], n_attributes: int):
    names = list(vocab)
    if not names:
        raise ConfigError("vocabulary has no attributes")
    if n_attributes > len(names):
        raise ConfigError(
            f"vocabulary offers {len(names)} attributes, {n_attributes} requested"
        )
    return names[:n_attributes]


def _generate_clean(count, vocab, rng, attribute_names, source_name):
    columns = {name: vocab[name].sample_many(rng, count) for name in attribute_names}
    entities = tuple(
        Entity(
            f"rec-{i:07d}-org",
            tuple((name, columns[name][i]) for name in attribute_names),
        )
        for i in range(count)
    )
    return EntityCollection(source_name, tuple(attribute_names), entities)


def generate_clean_entities(
    count: int,
    vocab: dict[str, FrequencyTable] | None = None,
    seed: int = 0,
    n_attributes: int | None = None,
    source_name: str = "synthetic",
) -> EntityCollection:
    """Sample clean entities attribute-by-attribute from frequency tables."""
    if count < 0:
        raise ConfigError("count must be nonnegative")
    if vocab is None:
        vocab = default_vocabulary()
    names = _select_attributes(vocab, n_attributes or len(vocab))
    rng = np.random.default_rng(seed)
    return _generate_clean(count, vocab, rng, names, source_name)


def _insert_char(value: str, rng: np.random.Generator) -> str:
    position = int(rng.integers(0, len(value) + 1))
    char = _CHAR_POOL[int(rng.integers(0, len(_CHAR_POOL)))]
    return value[:position] + char + value[position:]


def _delete_char(value: str, rng: np.random.Generator) -> str:
    position = int(rng.integers(0, len(value)))
    return value[:position] + value[position + 1 :]


def _replace_char(value: str, rng: np.random.Generator) -> str:
    position = int(rng.integers(0, len(value)))
    pool = [char for char in _CHAR_POOL if char != value[position]]
    char = pool[int(rng.integers(0, len(pool)))]
    return value[:position] + char + value[position + 1 :]


def _delete_word(value: str, rng: np.random.Generator) -> str:
    words = value.split()
    del words[int(rng.integers(0, len(words)))]
    return " ".join(words)


def _replace_word(value: str, rng: np.random.Generator, table: FrequencyTable) -> str:
    words = value.split()
    index = int(rng.integers(0, len(words)))
    for _ in range(8):
        tokens = table.sample(rng).split()
        candidate = tokens[int(rng.integers(0, len(tokens)))]
        if candidate != words[index]:
            words[index] = candidate
            return " ".join(words)
    return _replace_char(value, rng)


def _corrupt_with_audit(
    entity: Entity,
    rng: np.random.Generator,
    params: GenParams,
    vocab: dict[str, FrequencyTable],
    new_id: str,
) -> tuple[Entity, int, int]:
    """Corrupt one entity; also report edits applied and the per-attribute peak."""
    values = {name: value for name, value in entity.attributes}
    names = [name for name, _ in entity.attributes]
    budget = dict.fromkeys(names, params.max_mods_per_attribute)
    if params.max_mods_per_record == 0 or params.max_mods_per_attribute == 0:
        n_edits = 0
    else:
        n_edits = int(rng.integers(1, params.max_mods_per_record + 1))
    applied = 0
    for _ in range(n_edits):
        eligible = [name for name in names if budget[name] > 0]
        if not eligible:
            break
        name = eligible[int(rng.integers(0, len(eligible)))]
        budget[name] -= 1
        applied += 1
        value = values[name]
        kind = int(rng.integers(0, 5))
        if not value:
            values[name] = _insert_char(value, rng)
        elif kind == 0:
            values[name] = _insert_char(value, rng)
        elif kind == 1:
            values[name] = _delete_char(value, rng)
        elif kind == 2:
            values[name] = _replace_char(value, rng)
        elif kind == 3:
            values[name] = _delete_word(value, rng)
        else:
            values[name] = _replace_word(value, rng, vocab[name])
    per_attribute_peak = max(
        (params.max_mods_per_attribute - left for left in budget.values()), default=0
    )
    corrupted = Entity(new_id, tuple((name, values[name]) for name in names))
    return corrupted, applied, per_attribute_peak


def corrupt_entity(
    entity: Entity,
    rng: np.random.Generator,
    params: GenParams,
    vocab: dict[str, FrequencyTable],
    new_id: str,
) -> Entity:
    """Apply 1..max_mods_per_record random edits and rebrand the id.

    Each edit picks an attribute with remaining budget, then one of five
    operations: insert, delete, or replace a character, or delete or replace
    a word. Edits on a non-empty value always change it; an empty value only
    ever grows back via insertion. Zero limits disable editing entirely.
    """
    corrupted, _, _ = _corrupt_with_audit(entity, rng, params, vocab, new_id)
    return corrupted


def _plan_group_sizes(params: GenParams, rng: np.random.Generator) -> list[int]:
    target_members = round(params.dup_fraction * params.n_total)
    max_group = params.max_dups_per_record + 1
    sizes: list[int] = []
    planned = 0
    if params.max_dups_per_record >= 1:
        while target_members - planned >= 2:
            size = int(rng.integers(2, max_group + 1))
            sizes.append(min(size, target_members - planned))
            planned += sizes[-1]
    achieved = planned / params.n_total if params.n_total else 0.0
    if abs(achieved - params.dup_fraction) > 0.02:
        raise ConfigError(
            f"cannot reach duplicate fraction {params.dup_fraction} "
            f"with n_total={params.n_total} and "
            f"max_dups_per_record={params.max_dups_per_record}"
        )
    return sizes


def generate_dirty_dataset(
    params: GenParams,
    vocab: dict[str, FrequencyTable] | None = None,
    source_name: str = "synthetic",
) -> GeneratedDataset:
    """Build a shuffled collection with duplicate groups and its ground truth.

    The fraction of entities belonging to a group of size two or more lands
    within two percentage points of dup_fraction; every within-group pair is
    in the truth; the total entity count is exactly n_total.
    """
    if vocab is None:
        vocab = default_vocabulary()
    names = _select_attributes(vocab, params.n_attributes)
    rng = np.random.default_rng(params.seed)

    sizes = _plan_group_sizes(params, rng)
    duplicate_count = sum(size - 1 for size in sizes)
    originals_total = params.n_total - duplicate_count
    clean = _generate_clean(originals_total, vocab, rng, names, source_name)

    order = rng.permutation(originals_total)
    seed_positions = [int(order[i]) for i in range(len(sizes))]

    entities = list(clean.entities)
    truth_pairs: set[tuple[str, str]] = set()
    max_record_edits = 0
    max_attribute_edits = 0
    for group_index, size in enumerate(sizes):
        original = clean.entities[seed_positions[group_index]]
        stem = original.id[: -len("-org")] if original.id.endswith("-org") else original.id
        group_ids = [original.id]
        for copy_index in range(size - 1):
            duplicate, record_edits, attribute_peak = _corrupt_with_audit(
                original, rng, params, vocab, f"{stem}-dup-{copy_index}"
            )
            max_record_edits = max(max_record_edits, record_edits)
            max_attribute_edits = max(max_attribute_edits, attribute_peak)
            entities.append(duplicate)
            group_ids.append(duplicate.id)
        for i in range(len(group_ids)):
            for j in range(i + 1, len(group_ids)):
                truth_pairs.add(normalize_pair(group_ids[i], group_ids[j]))

    shuffle = rng.permutation(len(entities))
    shuffled = tuple(entities[int(i)] for i in shuffle)
    collection = EntityCollection(source_name, tuple(names), shuffled)
    groundtruth = GroundTruth(frozenset(truth_pairs))

    members = sum(sizes)
    audit = {
        "clean_count": originals_total,
        "duplicate_count": duplicate_count,
        "group_count": len(sizes),
        "max_group_size": max(sizes, default=0),
        "member_fraction": members / params.n_total if params.n_total else 0.0,
        "truth_pairs": len(truth_pairs),
        "max_record_edits": max_record_edits,
        "max_attribute_edits": max_attribute_edits,
    }
    return GeneratedDataset(collection, groundtruth, params, audit)
