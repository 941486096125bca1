"""Data model for entity collections, ground truth, and resolution tasks.

Ids are opaque strings and are never parsed as numbers. All types are
immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import DataError

CLEAN_CLEAN = "clean-clean"
DIRTY = "dirty"


@dataclass(frozen=True)
class Entity:
    """One record: an opaque id plus attribute values in source column order."""

    id: str
    attributes: tuple[tuple[str, str], ...]

    def value(self, name: str) -> str:
        for attr_name, attr_value in self.attributes:
            if attr_name == name:
                return attr_value
        raise KeyError(name)


@dataclass(frozen=True)
class EntityCollection:
    """An ordered set of entities sharing one attribute schema."""

    source_name: str
    attribute_names: tuple[str, ...]
    entities: tuple[Entity, ...]
    _positions: dict[str, int] = field(
        init=False, repr=False, compare=False, hash=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        positions = {entity.id: i for i, entity in enumerate(self.entities)}
        if len(positions) != len(self.entities):
            raise DataError(f"collection {self.source_name!r} has duplicate ids")
        object.__setattr__(self, "_positions", positions)

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self) -> Iterator[Entity]:
        return iter(self.entities)

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._positions

    def by_id(self, entity_id: str) -> Entity:
        return self.entities[self._positions[entity_id]]

    def ids(self) -> list[str]:
        return [entity.id for entity in self.entities]


def normalize_pair(left_id: str, right_id: str) -> tuple[str, str]:
    """Canonical unordered form of an id pair: lexicographically sorted tuple."""
    if right_id < left_id:
        return (right_id, left_id)
    return (left_id, right_id)


@dataclass(frozen=True)
class GroundTruth:
    """The set of true duplicate pairs, stored in canonical unordered form."""

    pairs: frozenset[tuple[str, str]]

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return normalize_pair(*pair) in self.pairs


@dataclass(frozen=True)
class ERTask:
    """A resolution task: two duplicate-free sources, or one source with duplicates."""

    kind: str
    collections: tuple[EntityCollection, ...]
    groundtruth: GroundTruth

    @staticmethod
    def clean_clean(
        left: EntityCollection, right: EntityCollection, groundtruth: GroundTruth
    ) -> "ERTask":
        return ERTask(CLEAN_CLEAN, (left, right), groundtruth)

    @staticmethod
    def dirty(collection: EntityCollection, groundtruth: GroundTruth) -> "ERTask":
        return ERTask(DIRTY, (collection,), groundtruth)

    @property
    def left(self) -> EntityCollection:
        return self.collections[0]

    @property
    def right(self) -> EntityCollection:
        if self.kind != CLEAN_CLEAN:
            raise ValueError("single-source task has no right collection")
        return self.collections[1]


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking a task's ground truth against its collections."""

    absent_ids: tuple[str, ...]
    empty_entity_counts: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not self.absent_ids


def load_csv(path: str | Path, id_column: str, source_name: str | None = None) -> EntityCollection:
    """Read an entity collection from a CSV file.

    The first row must be a header containing id_column; every other column
    becomes a textual attribute in header order. Cell values are trimmed of
    surrounding whitespace and missing cells become empty strings.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        header = [cell.strip() for cell in header]
        if id_column not in header:
            raise DataError(f"{path}: header has no column {id_column!r}")
        id_pos = header.index(id_column)
        attribute_names = tuple(name for i, name in enumerate(header) if i != id_pos)

        entities: list[Entity] = []
        seen: set[str] = set()
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {row_number} has {len(row)} cells, header has {len(header)}"
                )
            entity_id = row[id_pos].strip()
            if not entity_id:
                raise DataError(f"{path}: row {row_number} has an empty id")
            if entity_id in seen:
                raise DataError(f"{path}: row {row_number} repeats id {entity_id!r}")
            seen.add(entity_id)
            values = tuple(
                (name, row[i].strip()) for i, name in enumerate(header) if i != id_pos
            )
            entities.append(Entity(entity_id, values))

    if source_name is None:
        source_name = path.stem
    return EntityCollection(source_name, attribute_names, tuple(entities))


def write_csv(collection: EntityCollection, path: str | Path, id_column: str = "id") -> None:
    """Write a collection back to CSV with the id in the first column."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([id_column, *collection.attribute_names])
        for entity in collection.entities:
            writer.writerow([entity.id, *(value for _, value in entity.attributes)])


def load_groundtruth(path: str | Path) -> GroundTruth:
    """Read truth pairs from a two-column CSV with a header row.

    Repeated rows and reversed duplicates collapse to a single pair.
    """
    path = Path(path)
    pairs: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        if len(header) != 2:
            raise DataError(f"{path}: line 1: expected 2 columns, found {len(header)}")
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}: line {line_number}: expected 2 cells, found {len(row)}")
            left_id, right_id = row[0].strip(), row[1].strip()
            if not left_id or not right_id:
                raise DataError(f"{path}: line {line_number}: empty id")
            pairs.add(normalize_pair(left_id, right_id))
    return GroundTruth(frozenset(pairs))


def write_groundtruth(groundtruth: GroundTruth, path: str | Path) -> None:
    """Write truth pairs as a two-column CSV, sorted for reproducible bytes."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["left_id", "right_id"])
        for left_id, right_id in sorted(groundtruth.pairs):
            writer.writerow([left_id, right_id])


def validate_task(task: ERTask) -> ValidationReport:
    """Report ground-truth ids missing from the collections and empty entities.

    The task is accepted iff no referenced id is absent. Entities whose
    attribute values are all empty are counted but do not invalidate the task.
    """
    known: set[str] = set()
    for collection in task.collections:
        known.update(collection.ids())
    absent = sorted(
        {entity_id for pair in task.groundtruth.pairs for entity_id in pair if entity_id not in known}
    )
    empty_counts = tuple(
        sum(1 for entity in collection if all(value == "" for _, value in entity.attributes))
        for collection in task.collections
    )
    return ValidationReport(tuple(absent), empty_counts)
