import collections

import numpy as np
import pytest

from nearmatch.datagen import (
    FrequencyTable,
    GenParams,
    corrupt_entity,
    default_vocabulary,
    generate_clean_entities,
    generate_dirty_dataset,
    load_frequency_table,
)
from nearmatch.blocking import block_dirty, blocking_recall
from nearmatch.embedding import CharNGramEmbedder, embed_collection
from nearmatch.errors import ConfigError, DataError
from nearmatch.model import write_csv


def group_stem(entity_id):
    """Generated ids encode their group: rec-<n>-org and rec-<n>-dup-<j>."""
    parts = entity_id.split("-")
    return parts[1]


class TestFrequencyTable:
    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            FrequencyTable([], [])

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(ConfigError):
            FrequencyTable(["a", "b"], [1.0, 0.0])
        with pytest.raises(ConfigError):
            FrequencyTable(["a"], [-2.0])

    def test_duplicate_values_rejected(self):
        with pytest.raises(ConfigError):
            FrequencyTable(["a", "a"], [1.0, 1.0])

    def test_misaligned_rejected(self):
        with pytest.raises(ConfigError):
            FrequencyTable(["a", "b"], [1.0])

    def test_sampling_is_deterministic(self):
        table = FrequencyTable(["x", "y", "z"], [3.0, 2.0, 1.0])
        first = table.sample_many(np.random.default_rng(9), 50)
        second = table.sample_many(np.random.default_rng(9), 50)
        assert first == second

    def test_heavier_values_dominate(self):
        table = FrequencyTable(["common", "rare"], [99.0, 1.0])
        draws = table.sample_many(np.random.default_rng(10), 2000)
        counts = collections.Counter(draws)
        assert counts["common"] > counts["rare"] * 10

    def test_load_rejects_bad_header(self, tmp_path):
        path = tmp_path / "table.csv"
        path.write_text("word,freq\na,1\n", encoding="utf-8")
        with pytest.raises(DataError, match="header"):
            load_frequency_table(path)

    def test_load_reports_bad_line(self, tmp_path):
        path = tmp_path / "table.csv"
        path.write_text("value,count\na,1\nb,many\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 3"):
            load_frequency_table(path)

    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "table.csv"
        path.write_text("value,count\nalpha,3\nbeta,1.5\n", encoding="utf-8")
        table = load_frequency_table(path)
        assert table.values == ("alpha", "beta")
        assert table.probabilities == pytest.approx([3 / 4.5, 1.5 / 4.5])


class TestDefaultVocabulary:
    def test_twelve_attributes(self):
        vocab = default_vocabulary()
        assert len(vocab) == 12
        assert list(vocab)[:2] == ["given_name", "surname"]

    def test_every_table_nonempty_with_clean_values(self):
        for name, table in default_vocabulary().items():
            assert len(table) > 0, name
            for value in table.values:
                assert value == value.strip() and value, name


class TestGenerateClean:
    def test_zero_count(self):
        collection = generate_clean_entities(0, seed=1)
        assert len(collection) == 0
        assert len(collection.attribute_names) == 12

    def test_fixed_seed_reproduces(self):
        first = generate_clean_entities(25, seed=42)
        second = generate_clean_entities(25, seed=42)
        assert first.entities == second.entities

    def test_different_seeds_differ(self):
        first = generate_clean_entities(25, seed=1)
        second = generate_clean_entities(25, seed=2)
        assert first.entities != second.entities

    def test_single_token_vocab_gives_identical_values(self):
        vocab = {
            "name": FrequencyTable(["fixed"], [1.0]),
            "city": FrequencyTable(["town"], [1.0]),
        }
        collection = generate_clean_entities(5, vocab, seed=3)
        values = {entity.attributes for entity in collection.entities}
        assert values == {(("name", "fixed"), ("city", "town"))}
        assert len({entity.id for entity in collection.entities}) == 5

    def test_negative_count_rejected(self):
        with pytest.raises(ConfigError):
            generate_clean_entities(-1)

    def test_attribute_subset(self):
        collection = generate_clean_entities(3, seed=1, n_attributes=4)
        assert collection.attribute_names == (
            "given_name",
            "surname",
            "street_number",
            "address_1",
        )

    def test_requesting_too_many_attributes_rejected(self):
        vocab = {"only": FrequencyTable(["x"], [1.0])}
        with pytest.raises(ConfigError):
            generate_clean_entities(1, vocab, n_attributes=3)


class TestCorruptEntity:
    def setup_method(self):
        self.vocab = default_vocabulary()
        self.entity = generate_clean_entities(1, self.vocab, seed=11).entities[0]

    def test_single_edit_changes_exactly_one_attribute(self):
        params = GenParams(n_total=10, max_mods_per_record=1, max_mods_per_attribute=1)
        rng = np.random.default_rng(12)
        for _ in range(50):
            out = corrupt_entity(self.entity, rng, params, self.vocab, "fresh")
            changed = [
                name
                for (name, before), (_, after) in zip(
                    self.entity.attributes, out.attributes
                )
                if before != after
            ]
            assert len(changed) == 1

    def test_every_corruption_changes_something(self):
        params = GenParams(n_total=10)
        rng = np.random.default_rng(13)
        for _ in range(1000):
            out = corrupt_entity(self.entity, rng, params, self.vocab, "fresh")
            assert out.attributes != self.entity.attributes

    def test_changed_attribute_count_bounded_by_record_limit(self):
        params = GenParams(n_total=10, max_mods_per_record=3)
        rng = np.random.default_rng(14)
        for _ in range(200):
            out = corrupt_entity(self.entity, rng, params, self.vocab, "fresh")
            changed = sum(
                1
                for (_, before), (_, after) in zip(
                    self.entity.attributes, out.attributes
                )
                if before != after
            )
            assert 1 <= changed <= 3

    def test_fixed_rng_state_reproduces(self):
        params = GenParams(n_total=10)
        first = corrupt_entity(
            self.entity, np.random.default_rng(15), params, self.vocab, "fresh"
        )
        second = corrupt_entity(
            self.entity, np.random.default_rng(15), params, self.vocab, "fresh"
        )
        assert first == second

    def test_zero_limits_copy_values_unchanged(self):
        for params in (
            GenParams(n_total=10, max_mods_per_record=0),
            GenParams(n_total=10, max_mods_per_attribute=0),
        ):
            out = corrupt_entity(
                self.entity, np.random.default_rng(16), params, self.vocab, "fresh"
            )
            assert out.attributes == self.entity.attributes
            assert out.id == "fresh"

    def test_id_and_attribute_names_preserved(self):
        params = GenParams(n_total=10)
        out = corrupt_entity(
            self.entity, np.random.default_rng(17), params, self.vocab, "copy-7"
        )
        assert out.id == "copy-7"
        assert [name for name, _ in out.attributes] == [
            name for name, _ in self.entity.attributes
        ]

    def test_empty_value_grows_by_insertion(self):
        from nearmatch.model import Entity

        entity = Entity("e", (("name", ""),))
        vocab = {"name": FrequencyTable(["word"], [1.0])}
        params = GenParams(
            n_total=10, max_mods_per_record=1, max_mods_per_attribute=1, n_attributes=1
        )
        out = corrupt_entity(entity, np.random.default_rng(18), params, vocab, "e2")
        assert len(out.attributes[0][1]) == 1


class TestGenerateDirty:
    def test_small_dataset_shape(self):
        dataset = generate_dirty_dataset(GenParams(n_total=10, dup_fraction=0.4, seed=1))
        assert len(dataset.collection) == 10
        assert dataset.audit["group_count"] >= 1
        assert len(dataset.groundtruth.pairs) > 0

    def test_duplicate_member_fraction_at_scale(self):
        dataset = generate_dirty_dataset(GenParams(n_total=10_000, seed=5))
        members = {
            entity_id
            for pair in dataset.groundtruth.pairs
            for entity_id in pair
        }
        fraction = len(members) / len(dataset.collection)
        assert abs(fraction - 0.40) <= 0.02

    def test_groups_are_complete_disjoint_and_bounded(self):
        dataset = generate_dirty_dataset(GenParams(n_total=2_000, seed=6))
        groups = collections.defaultdict(set)
        for left, right in dataset.groundtruth.pairs:
            assert group_stem(left) == group_stem(right)
            groups[group_stem(left)].update((left, right))
        pair_count = 0
        for members in groups.values():
            size = len(members)
            assert 2 <= size <= 10
            pair_count += size * (size - 1) // 2
        assert pair_count == len(dataset.groundtruth.pairs)

    def test_exact_total_and_unique_ids(self):
        dataset = generate_dirty_dataset(GenParams(n_total=777, seed=7))
        assert len(dataset.collection) == 777
        assert len(set(dataset.collection.ids())) == 777

    def test_determinism_down_to_bytes(self, tmp_path):
        first = generate_dirty_dataset(GenParams(n_total=300, seed=8))
        second = generate_dirty_dataset(GenParams(n_total=300, seed=8))
        assert first.collection.entities == second.collection.entities
        assert first.groundtruth == second.groundtruth
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(first.collection, a)
        write_csv(second.collection, b)
        assert a.read_bytes() == b.read_bytes()

    def test_seeds_change_the_output(self):
        first = generate_dirty_dataset(GenParams(n_total=100, seed=1))
        second = generate_dirty_dataset(GenParams(n_total=100, seed=2))
        assert first.collection.entities != second.collection.entities

    def test_infeasible_params_rejected(self):
        with pytest.raises(ConfigError):
            generate_dirty_dataset(GenParams(n_total=1, dup_fraction=0.4))
        with pytest.raises(ConfigError):
            generate_dirty_dataset(GenParams(n_total=3, dup_fraction=0.4))
        with pytest.raises(ConfigError):
            generate_dirty_dataset(
                GenParams(n_total=100, dup_fraction=0.4, max_dups_per_record=0)
            )

    def test_zero_duplication(self):
        dataset = generate_dirty_dataset(GenParams(n_total=50, dup_fraction=0.0, seed=9))
        assert len(dataset.collection) == 50
        assert dataset.groundtruth.pairs == frozenset()

    def test_bad_params_rejected_at_construction(self):
        with pytest.raises(ConfigError):
            GenParams(n_total=-1)
        with pytest.raises(ConfigError):
            GenParams(n_total=10, dup_fraction=1.5)
        with pytest.raises(ConfigError):
            GenParams(n_total=10, max_mods_per_record=-2)

    def test_pristine_duplicates_are_fully_recoverable(self):
        # With editing disabled every duplicate is an identical record, so
        # blocking at k >= largest group - 1 must find every true pair.
        dataset = generate_dirty_dataset(
            GenParams(n_total=200, seed=10, max_mods_per_record=0)
        )
        embedder = CharNGramEmbedder(buckets=50_000, dim=64)
        embedded = embed_collection(dataset.collection, embedder)
        k = dataset.audit["max_group_size"] - 1
        cands = block_dirty(embedded, k, index_kind="exact")
        assert blocking_recall(cands, dataset.groundtruth) == 1.0
