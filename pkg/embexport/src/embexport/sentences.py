"""Read entity tables and serialize each row into one sentence.

The sentence contract is shared with the rest of the repository and pinned
by fixtures/parity_sentences.tsv: cells are trimmed, non-empty attribute
values are joined in column order with single spaces, and internal
whitespace runs collapse to one space.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ExportDataError


@dataclass(frozen=True)
class SentenceRecord:
    entity_id: str
    sentence: str


def sentence_from_values(values: list[str]) -> str:
    joined = " ".join(value for value in values if value)
    return " ".join(joined.split())


def read_sentences(path: str | Path, id_column: str) -> list[SentenceRecord]:
    """Parse a CSV of entities into (id, sentence) records, in file order.

    The header names the id column; every other column is an attribute. Cells
    are trimmed after CSV decoding, short rows pad with empty strings, and
    over-long rows or duplicate ids are rejected with the offending line
    number.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as err:
        raise ExportDataError(f"{path}: {err}") from err
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ExportDataError(f"{path}: empty file, expected a header row") from None
        header = [cell.strip() for cell in header]
        if header.count(id_column) != 1:
            raise ExportDataError(
                f"{path}: header must contain the id column {id_column!r} exactly once"
            )
        id_index = header.index(id_column)

        records: list[SentenceRecord] = []
        seen: set[str] = set()
        for line_number, row in enumerate(reader, start=2):
            if len(row) > len(header):
                raise ExportDataError(
                    f"{path}: line {line_number}: {len(row)} cells for "
                    f"{len(header)} columns"
                )
            cells = [cell.strip() for cell in row] + [""] * (len(header) - len(row))
            entity_id = cells[id_index]
            if not entity_id:
                raise ExportDataError(f"{path}: line {line_number}: empty id")
            if entity_id in seen:
                raise ExportDataError(
                    f"{path}: line {line_number}: duplicate id {entity_id!r}"
                )
            seen.add(entity_id)
            values = [cell for i, cell in enumerate(cells) if i != id_index]
            records.append(SentenceRecord(entity_id, sentence_from_values(values)))
    return records
