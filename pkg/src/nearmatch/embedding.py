"""Sentence embedders and vector-file loading.

Three interchangeable embedders turn sentences into fixed-dimensional
float32 vectors: averaging word vectors from a lookup table, feature-hashed
character n-grams, and precomputed vectors produced externally. All follow
the scikit-learn transformer protocol so they compose with pipelines;
transform accepts a sequence of Sentence objects or plain strings.
"""

from __future__ import annotations

import hashlib
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .embv import read_embv
from .errors import ConfigError, DataError
from .model import EntityCollection
from .text import Sentence, build_sentence, tokenize


@dataclass(frozen=True)
class WordVectorTable:
    """Token to vector lookup with a single shared dimensionality."""

    dim: int
    vectors: Mapping[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors


def load_word_table(path: str | Path) -> WordVectorTable:
    """Parse a text word-vector file: one "token f1 f2 ... fD" line per entry.

    The dimension is inferred from the first line; later lines that disagree
    are rejected. A repeated token keeps its last occurrence and emits a
    warning.
    """
    path = Path(path)
    dim: int | None = None
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split()
            token, raw_values = parts[0], parts[1:]
            if dim is None:
                dim = len(raw_values)
                if dim == 0:
                    raise DataError(f"{path}: line {line_number}: no vector values")
            elif len(raw_values) != dim:
                raise DataError(
                    f"{path}: line {line_number}: expected {dim} values, found {len(raw_values)}"
                )
            try:
                values = np.array([float(v) for v in raw_values], dtype=np.float32)
            except ValueError:
                raise DataError(f"{path}: line {line_number}: non-numeric value") from None
            if not np.isfinite(values).all():
                raise DataError(f"{path}: line {line_number}: non-finite value")
            if token in vectors:
                warnings.warn(f"{path}: duplicate token {token!r}, last occurrence wins")
            vectors[token] = values
    if dim is None:
        raise DataError(f"{path}: empty word-vector file")
    return WordVectorTable(dim, vectors)


def embed_word_average(tokens: Sequence[str], table: WordVectorTable) -> np.ndarray:
    """Mean of the vectors of in-vocabulary tokens; zero vector if none match."""
    rows = [table.vectors[token] for token in tokens if token in table.vectors]
    if not rows:
        return np.zeros(table.dim, dtype=np.float32)
    return (np.sum(np.stack(rows), axis=0, dtype=np.float64) / len(rows)).astype(np.float32)


def _as_text(item: Sentence | str) -> str:
    return item.text if isinstance(item, Sentence) else item


class WordAverageEmbedder(TransformerMixin, BaseEstimator):
    """Averages table vectors of the tokens in each sentence."""

    def __init__(self, table: WordVectorTable):
        self.table = table

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: Sequence[Sentence | str]) -> np.ndarray:
        out = np.empty((len(X), self.table.dim), dtype=np.float32)
        for i, item in enumerate(X):
            out[i] = embed_word_average(tokenize(_as_text(item)), self.table)
        return out

    @property
    def tag(self) -> str:
        return f"word-avg(dim={self.table.dim})"


class CharNGramEmbedder(TransformerMixin, BaseEstimator):
    """Feature-hashed character n-gram embedder.

    Each token is padded with '<' and '>' boundary markers and split into all
    character n-grams of lengths n_min..n_max. A seeded 64-bit hash maps each
    n-gram to one of `buckets` slots; every slot expands deterministically to
    a unit Gaussian direction of length dim. A sentence embeds as the mean
    over all its n-gram vectors, so sentences sharing many n-grams land close
    in Euclidean space.
    """

    def __init__(
        self,
        n_min: int = 3,
        n_max: int = 5,
        buckets: int = 2_000_000,
        dim: int = 300,
        seed: int = 42,
    ):
        self.n_min = n_min
        self.n_max = n_max
        self.buckets = buckets
        self.dim = dim
        self.seed = seed
        self._bucket_vectors: dict[int, np.ndarray] = {}
        self._token_cache: dict[str, tuple[np.ndarray, int]] = {}

    def fit(self, X=None, y=None):
        self._check_params()
        return self

    def _check_params(self) -> None:
        if not (1 <= self.n_min <= self.n_max):
            raise ConfigError(f"need 1 <= n_min <= n_max, got {self.n_min}..{self.n_max}")
        if self.buckets < 1 or self.dim < 1:
            raise ConfigError("buckets and dim must be at least 1")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must fit in 64 unsigned bits")

    def _bucket(self, ngram: str) -> int:
        digest = hashlib.blake2b(
            ngram.encode("utf-8"), digest_size=8, key=self.seed.to_bytes(8, "little")
        ).digest()
        return int.from_bytes(digest, "little") % self.buckets

    def _bucket_vector(self, bucket: int) -> np.ndarray:
        vector = self._bucket_vectors.get(bucket)
        if vector is None:
            raw = np.random.default_rng([self.seed, bucket]).standard_normal(self.dim)
            vector = (raw / np.linalg.norm(raw)).astype(np.float32)
            self._bucket_vectors[bucket] = vector
        return vector

    def _token_sum(self, token: str) -> tuple[np.ndarray, int]:
        cached = self._token_cache.get(token)
        if cached is None:
            padded = f"<{token}>"
            total = np.zeros(self.dim, dtype=np.float64)
            count = 0
            for n in range(self.n_min, self.n_max + 1):
                for i in range(len(padded) - n + 1):
                    total += self._bucket_vector(self._bucket(padded[i : i + n]))
                    count += 1
            cached = (total, count)
            self._token_cache[token] = cached
        return cached

    def embed_text(self, text: str) -> np.ndarray:
        self._check_params()
        total = np.zeros(self.dim, dtype=np.float64)
        count = 0
        for token in tokenize(text):
            token_total, token_count = self._token_sum(token)
            total += token_total
            count += token_count
        if count == 0:
            return np.zeros(self.dim, dtype=np.float32)
        return (total / count).astype(np.float32)

    def transform(self, X: Sequence[Sentence | str]) -> np.ndarray:
        out = np.empty((len(X), self.dim), dtype=np.float32)
        for i, item in enumerate(X):
            out[i] = self.embed_text(_as_text(item))
        return out

    @property
    def tag(self) -> str:
        return (
            f"char-ngram(n={self.n_min}-{self.n_max},buckets={self.buckets},"
            f"dim={self.dim},seed={self.seed})"
        )


def embed_char_ngram(sentence: Sentence | str, embedder: CharNGramEmbedder) -> np.ndarray:
    """Embed one sentence with the given n-gram embedder."""
    return embedder.embed_text(_as_text(sentence))


def load_precomputed(path: str | Path) -> dict[str, np.ndarray]:
    """Load an EMBV file as an id to vector map."""
    ids, vectors = read_embv(path)
    table: dict[str, np.ndarray] = {}
    for i, entity_id in enumerate(ids):
        if entity_id in table:
            raise DataError(f"{path}: duplicate id {entity_id!r}")
        table[entity_id] = vectors[i]
    if len(ids) and not np.isfinite(vectors).all():
        raise DataError(f"{path}: non-finite vector values")
    return table


class PrecomputedEmbedder(TransformerMixin, BaseEstimator):
    """Looks up externally produced vectors by entity id."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        self.vectors = vectors

    @property
    def dim(self) -> int:
        if not self.vectors:
            raise ValueError("empty vector map has no dimension")
        return len(next(iter(self.vectors.values())))

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: Sequence[Sentence | str]) -> np.ndarray:
        out = np.empty((len(X), self.dim), dtype=np.float32)
        for i, item in enumerate(X):
            entity_id = item.entity_id if isinstance(item, Sentence) else item
            vector = self.vectors.get(entity_id)
            if vector is None:
                raise DataError(f"no precomputed vector for id {entity_id!r}")
            out[i] = vector
        return out

    @property
    def tag(self) -> str:
        return f"precomputed(dim={self.dim})"


class EmbeddedCollection:
    """Ids aligned positionally with the rows of a float32 vector matrix."""

    def __init__(self, ids: Sequence[str], vectors: np.ndarray, embedder_tag: str):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValueError("vectors must have shape (count, dim)")
        if len(ids) != vectors.shape[0]:
            raise ValueError(f"{len(ids)} ids for {vectors.shape[0]} vectors")
        self.ids = list(ids)
        self.vectors = vectors
        self.dim = vectors.shape[1]
        self.embedder_tag = embedder_tag
        self._positions = {entity_id: i for i, entity_id in enumerate(self.ids)}
        if len(self._positions) != len(self.ids):
            raise DataError("duplicate ids in embedded collection")

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, EmbeddedCollection)
            and self.ids == other.ids
            and self.embedder_tag == other.embedder_tag
            and self.vectors.shape == other.vectors.shape
            and bool(np.array_equal(self.vectors, other.vectors))
        )

    def position(self, entity_id: str) -> int:
        return self._positions[entity_id]

    def vector(self, entity_id: str) -> np.ndarray:
        return self.vectors[self._positions[entity_id]]


def embed_collection(
    collection: EntityCollection,
    embedder: WordAverageEmbedder | CharNGramEmbedder | PrecomputedEmbedder,
    threads: int = 1,
) -> EmbeddedCollection:
    """Embed every entity of a collection, preserving entity order.

    With threads > 1 the sentences are embedded in parallel chunks; the
    output order is positional and identical to the single-threaded result.
    """
    sentences = [build_sentence(entity) for entity in collection]
    if threads > 1 and len(sentences) > 1:
        chunk = (len(sentences) + threads - 1) // threads
        pieces = [sentences[i : i + chunk] for i in range(0, len(sentences), chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(embedder.transform, pieces))
        vectors = np.vstack(parts)
    else:
        vectors = embedder.transform(sentences)
    if not np.isfinite(vectors).all():
        raise DataError("embedder produced non-finite values")
    return EmbeddedCollection(collection.ids(), vectors, embedder.tag)
