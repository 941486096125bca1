"""Schema-agnostic serialization of entities into sentences, plus tokenization."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import Entity

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class Sentence:
    entity_id: str
    text: str
    length_chars: int


def build_sentence(entity: Entity) -> Sentence:
    """Concatenate all attribute values into one normalized string.

    Values are joined in attribute order with a single space; empty values
    are skipped and runs of whitespace collapse to one space.
    """
    raw = " ".join(value for _, value in entity.attributes if value)
    text = " ".join(raw.split())
    return Sentence(entity.id, text, len(text))


def tokenize(text: str) -> list[str]:
    """Lowercase and split on maximal runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())
