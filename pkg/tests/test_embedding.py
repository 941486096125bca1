"""Word-average, char n-gram, and precomputed embedders."""

import numpy as np
import pytest

from nearmatch.embedding import (
    CharNGramEmbedder,
    EmbeddedCollection,
    PrecomputedEmbedder,
    WordAverageEmbedder,
    WordVectorTable,
    embed_char_ngram,
    embed_collection,
    embed_word_average,
    load_precomputed,
    load_word_table,
)
from nearmatch.embv import write_embv
from nearmatch.errors import ConfigError, DataError
from nearmatch.model import Entity, EntityCollection
from nearmatch.text import Sentence


def table_ab():
    return WordVectorTable(
        2,
        {
            "a": np.array([1.0, 0.0], dtype=np.float32),
            "b": np.array([0.0, 1.0], dtype=np.float32),
        },
    )


def collection_of(texts):
    entities = tuple(Entity(f"e{i}", (("t", text),)) for i, text in enumerate(texts))
    return EntityCollection("c", ("t",), entities)


class TestLoadWordTable:
    def test_basic(self, tmp_path):
        path = tmp_path / "w.vec"
        path.write_text("a 1 0 0\nb 0 1 0\n", encoding="utf-8")
        table = load_word_table(path)
        assert table.dim == 3
        assert len(table) == 2
        assert table.vectors["b"].tolist() == [0.0, 1.0, 0.0]

    def test_dimension_mismatch_names_line(self, tmp_path):
        path = tmp_path / "w.vec"
        path.write_text("a 1 0 0\nb 0 1\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 2"):
            load_word_table(path)

    def test_non_numeric_names_line(self, tmp_path):
        path = tmp_path / "w.vec"
        path.write_text("a 1 0\nb x 1\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 2"):
            load_word_table(path)

    def test_duplicate_token_last_wins_with_warning(self, tmp_path):
        path = tmp_path / "w.vec"
        path.write_text("a 1 0\na 0 2\n", encoding="utf-8")
        with pytest.warns(UserWarning, match="duplicate token"):
            table = load_word_table(path)
        assert table.vectors["a"].tolist() == [0.0, 2.0]

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "w.vec"
        path.write_text("a 1 inf\n", encoding="utf-8")
        with pytest.raises(DataError, match="non-finite"):
            load_word_table(path)


class TestWordAverage:
    def test_mean(self):
        out = embed_word_average(["a", "b"], table_ab())
        np.testing.assert_allclose(out, [0.5, 0.5])

    def test_all_oov_zero_vector(self):
        out = embed_word_average(["zz", "qq"], table_ab())
        assert out.tolist() == [0.0, 0.0]
        assert out.dtype == np.float32

    def test_repetition_weighted_mean(self):
        # Hand computation: ((1,0) + (1,0) + (0,1)) / 3 = (2/3, 1/3).
        out = embed_word_average(["a", "a", "b"], table_ab())
        np.testing.assert_allclose(out, [2.0 / 3.0, 1.0 / 3.0], rtol=1e-6)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(7)
        table = WordVectorTable(
            4, {t: rng.standard_normal(4).astype(np.float32) for t in "abcdefgh"}
        )
        tokens = list("abcddefa")
        base = embed_word_average(tokens, table)
        for _ in range(10):
            rng.shuffle(tokens)
            np.testing.assert_array_equal(embed_word_average(tokens, table), base)

    def test_transformer_tokenizes_sentences(self):
        embedder = WordAverageEmbedder(table_ab())
        out = embedder.fit([]).transform([Sentence("e", "A, b!", 5), "b b"])
        np.testing.assert_allclose(out[0], [0.5, 0.5])
        np.testing.assert_allclose(out[1], [0.0, 1.0])

    def test_get_params(self):
        table = table_ab()
        assert WordAverageEmbedder(table).get_params()["table"] is table


class TestCharNGram:
    def test_empty_sentence_zero_vector(self):
        embedder = CharNGramEmbedder(dim=16)
        out = embedder.embed_text("")
        assert out.tolist() == [0.0] * 16

    def test_deterministic_across_instances(self):
        text = "apple watch se 2022"
        first = CharNGramEmbedder(dim=32, buckets=1000, seed=9).embed_text(text)
        second = CharNGramEmbedder(dim=32, buckets=1000, seed=9).embed_text(text)
        assert first.tobytes() == second.tobytes()

    def test_seed_changes_output(self):
        text = "apple watch"
        a = CharNGramEmbedder(dim=32, seed=1).embed_text(text)
        b = CharNGramEmbedder(dim=32, seed=2).embed_text(text)
        assert a.tobytes() != b.tobytes()

    def test_norm_bounded_by_one(self):
        # Mean of unit vectors: norm can reach 1 only if all n-grams collide.
        rng = np.random.default_rng(11)
        embedder = CharNGramEmbedder(dim=24, buckets=5000)
        alphabet = "abcdefghijklmnopqrstuvwxyz0123456789 "
        for _ in range(100):
            text = "".join(rng.choice(list(alphabet), size=rng.integers(1, 60)))
            norm = float(np.linalg.norm(embedder.embed_text(text)))
            assert norm <= 1.0 + 1e-5

    def test_shared_ngrams_land_closer(self):
        # Oracle: brute-force n-gram extraction, independent of the embedder.
        def ngrams(text, n_min=3, n_max=5):
            grams = []
            for token in text.split():
                padded = f"<{token}>"
                for n in range(n_min, n_max + 1):
                    grams += [padded[i : i + n] for i in range(len(padded) - n + 1)]
            return grams

        rng = np.random.default_rng(13)
        embedder = CharNGramEmbedder(dim=48, buckets=100_000)
        near_alphabet = list("abcdefghijklm")
        far_alphabet = list("nopqrstuvwxyz")
        for _ in range(100):
            base = "".join(rng.choice(near_alphabet, size=60))
            variant = base[:-1] + ("a" if base[-1] != "a" else "b")
            disjoint = "".join(rng.choice(far_alphabet, size=60))

            base_grams, variant_grams = set(ngrams(base)), set(ngrams(variant))
            shared = len(base_grams & variant_grams) / len(base_grams | variant_grams)
            assert shared >= 0.90
            assert not (base_grams & set(ngrams(disjoint)))

            v_base = embedder.embed_text(base)
            near = float(np.linalg.norm(v_base - embedder.embed_text(variant)))
            far = float(np.linalg.norm(v_base - embedder.embed_text(disjoint)))
            assert near < far

    def test_short_token_still_has_grams(self):
        # "ab" padded to "<ab>": 3-grams "<ab","ab>", one 4-gram, no 5-gram.
        embedder = CharNGramEmbedder(dim=8, buckets=50)
        assert float(np.linalg.norm(embedder.embed_text("ab"))) > 0.0

    def test_bad_params_rejected(self):
        with pytest.raises(ConfigError):
            CharNGramEmbedder(n_min=4, n_max=3).fit()
        with pytest.raises(ConfigError):
            CharNGramEmbedder(buckets=0).fit()

    def test_module_level_veneer(self):
        embedder = CharNGramEmbedder(dim=16)
        sentence = Sentence("e", "apple", 5)
        np.testing.assert_array_equal(
            embed_char_ngram(sentence, embedder), embedder.embed_text("apple")
        )


class TestPrecomputed:
    def test_lookup_by_sentence_id(self, tmp_path):
        path = tmp_path / "v.embv"
        write_embv(path, ["e0", "e1"], np.array([[1, 2], [3, 4]], dtype=np.float32))
        embedder = PrecomputedEmbedder(load_precomputed(path))
        out = embedder.transform([Sentence("e1", "ignored", 7), "e0"])
        assert out.tolist() == [[3.0, 4.0], [1.0, 2.0]]

    def test_missing_id_named(self):
        embedder = PrecomputedEmbedder({"e0": np.zeros(2, dtype=np.float32)})
        with pytest.raises(DataError, match="'ghost'"):
            embedder.transform(["ghost"])


class TestEmbedCollection:
    def test_char_ngram_shapes(self):
        collection = collection_of(["apple watch", "galaxy watch", "stand"])
        embedded = embed_collection(collection, CharNGramEmbedder(dim=16))
        assert len(embedded) == 3
        assert embedded.vectors.shape == (3, 16)
        assert embedded.ids == ["e0", "e1", "e2"]
        assert "char-ngram" in embedded.embedder_tag

    def test_precomputed_missing_id(self):
        collection = collection_of(["x", "y"])
        embedder = PrecomputedEmbedder({"e0": np.zeros(3, dtype=np.float32)})
        with pytest.raises(DataError, match="'e1'"):
            embed_collection(collection, embedder)

    def test_same_seed_identical(self):
        collection = collection_of(["apple watch", "galaxy watch"])
        first = embed_collection(collection, CharNGramEmbedder(dim=16, seed=3))
        second = embed_collection(collection, CharNGramEmbedder(dim=16, seed=3))
        assert first == second

    def test_parallel_equals_serial(self):
        collection = collection_of([f"item number {i} deluxe" for i in range(23)])
        serial = embed_collection(collection, CharNGramEmbedder(dim=16))
        parallel = embed_collection(collection, CharNGramEmbedder(dim=16), threads=4)
        assert serial == parallel

    def test_vector_lookup(self):
        collection = collection_of(["apple", "pear"])
        embedded = embed_collection(collection, CharNGramEmbedder(dim=8))
        np.testing.assert_array_equal(embedded.vector("e1"), embedded.vectors[1])
        assert embedded.position("e0") == 0


class TestEmbeddedCollection:
    def test_rejects_misaligned_ids(self):
        with pytest.raises(ValueError):
            EmbeddedCollection(["a"], np.zeros((2, 3), dtype=np.float32), "t")

    def test_rejects_duplicate_ids(self):
        with pytest.raises(DataError):
            EmbeddedCollection(["a", "a"], np.zeros((2, 3), dtype=np.float32), "t")
