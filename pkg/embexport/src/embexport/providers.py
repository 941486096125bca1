"""Embedding providers, resolved from a model identifier string.

Two families:

- ``hash:<dim>`` — a dependency-free deterministic provider. Each sentence
  is mapped to a fixed pseudo-random unit-variance vector derived from a
  digest of its text. It carries no semantics and exists so exports can be
  produced (and tested) offline and reproducibly.
- anything else — treated as a sentence-transformers model name and loaded
  lazily. Loading failures abort the export cleanly.

A provider exposes ``tag`` (a stable description), ``dim`` (output width)
and ``embed(texts) -> float32 array of shape (len(texts), dim)``.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ExportConfigError, ExportDataError


class HashProvider:
    """Deterministic digest-seeded vectors; a stand-in, not a model."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ExportConfigError(f"hash provider dim must be positive, got {dim}")
        self.dim = dim

    @property
    def tag(self) -> str:
        return f"hash(dim={self.dim})"

    def embed(self, texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            out[i] = rng.standard_normal(self.dim, dtype=np.float32)
        return out


class SentenceModelProvider:
    """Wraps a sentence-transformers model behind the provider protocol."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as err:
            raise ExportDataError(
                f"model {model_name!r} needs the sentence-transformers package: {err}"
            ) from err
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as err:
            raise ExportDataError(f"model {model_name!r} failed to load: {err}") from err
        self.model_name = model_name
        dim = self._model.get_sentence_embedding_dimension()
        if not dim or dim < 1:
            raise ExportDataError(f"model {model_name!r} reports no output dimension")
        self.dim = int(dim)

    @property
    def tag(self) -> str:
        return f"sentence-model({self.model_name})"

    def embed(self, texts: list[str]) -> np.ndarray:
        vectors = self._model.encode(
            texts, convert_to_numpy=True, show_progress_bar=False
        )
        return np.asarray(vectors, dtype=np.float32)


def resolve_provider(model: str):
    """Turn a model identifier into a provider instance."""
    if not model:
        raise ExportConfigError("model identifier must not be empty")
    if model.startswith("hash:"):
        suffix = model[len("hash:"):]
        try:
            dim = int(suffix)
        except ValueError:
            raise ExportConfigError(
                f"hash provider wants hash:<dim> with integer dim, got {model!r}"
            ) from None
        return HashProvider(dim)
    return SentenceModelProvider(model)
