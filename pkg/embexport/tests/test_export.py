"""Tests for sentence parsing, the vector file writer, and whole exports."""

import struct
from pathlib import Path

import numpy as np
import pytest

from embexport import (
    EmbvWriter,
    ExportConfigError,
    ExportDataError,
    ExportJob,
    HashProvider,
    export_vectors,
    read_sentences,
    resolve_provider,
    sentence_from_values,
)
from embexport import cli

FIXTURES = Path(__file__).resolve().parent.parent.parent / "fixtures"


def write_csv(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


class TestSentenceContract:
    def test_parity_with_shared_golden_file(self):
        records = read_sentences(FIXTURES / "parity_entities.csv", "id")
        lines = [
            f"{r.entity_id}\t{r.sentence}" if r.sentence else r.entity_id
            for r in records
        ]
        produced = "\n".join(lines) + "\n"
        golden = (FIXTURES / "parity_sentences.tsv").read_text(encoding="utf-8")
        assert produced == golden

    def test_join_skips_empty_and_collapses_whitespace(self):
        assert sentence_from_values(["a", "", "b  c", "  "]) == "a b c"
        assert sentence_from_values(["", ""]) == ""

    def test_cells_trimmed_and_short_rows_padded(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "id,x,y\nr1, padded ,\nr2,solo\n")
        records = read_sentences(path, "id")
        assert records[0].sentence == "padded"
        assert records[1].sentence == "solo"

    def test_id_column_position_free(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "x,id,y\nleft,r1,right\n")
        records = read_sentences(path, "id")
        assert records[0].entity_id == "r1"
        assert records[0].sentence == "left right"

    def test_overlong_row_rejected_with_line_number(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "id,x\nr1,a\nr2,a,b\n")
        with pytest.raises(ExportDataError, match="line 3"):
            read_sentences(path, "id")

    def test_duplicate_id_rejected(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "id,x\nr1,a\nr1,b\n")
        with pytest.raises(ExportDataError, match="duplicate id"):
            read_sentences(path, "id")

    def test_empty_id_rejected(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "id,x\n,a\n")
        with pytest.raises(ExportDataError, match="empty id"):
            read_sentences(path, "id")

    def test_missing_id_column_rejected(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "key,x\nr1,a\n")
        with pytest.raises(ExportDataError, match="id"):
            read_sentences(path, "id")

    def test_empty_file_rejected(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "")
        with pytest.raises(ExportDataError, match="header"):
            read_sentences(path, "id")

    def test_missing_file_wrapped(self, tmp_path):
        with pytest.raises(ExportDataError, match="nosuch"):
            read_sentences(tmp_path / "nosuch.csv", "id")


class TestProviders:
    def test_hash_provider_deterministic_across_instances(self):
        first = HashProvider(16).embed(["anna kowalski perth", "ben miller sydney"])
        second = HashProvider(16).embed(["anna kowalski perth", "ben miller sydney"])
        assert np.array_equal(first, second)
        assert first.dtype == np.float32
        assert first.shape == (2, 16)

    def test_hash_provider_separates_texts(self):
        vectors = HashProvider(32).embed(["alpha", "beta", "alpha"])
        assert np.array_equal(vectors[0], vectors[2])
        assert not np.array_equal(vectors[0], vectors[1])

    def test_resolve_hash_identifier(self):
        provider = resolve_provider("hash:48")
        assert isinstance(provider, HashProvider)
        assert provider.dim == 48
        assert provider.tag == "hash(dim=48)"

    def test_bad_identifiers_rejected(self):
        with pytest.raises(ExportConfigError):
            resolve_provider("")
        with pytest.raises(ExportConfigError, match="integer"):
            resolve_provider("hash:many")
        with pytest.raises(ExportConfigError, match="positive"):
            resolve_provider("hash:0")


class TestEmbvWriter:
    def test_header_layout_for_empty_file(self, tmp_path):
        path = tmp_path / "v.embv"
        with EmbvWriter(path, dim=5, count=0):
            pass
        raw = path.read_bytes()
        assert raw == struct.pack("<4sHIQ", b"EMBV", 1, 5, 0)

    def test_record_layout(self, tmp_path):
        path = tmp_path / "v.embv"
        vector = np.array([[1.5, -2.0]], dtype=np.float32)
        with EmbvWriter(path, dim=2, count=1) as writer:
            writer.write_batch(["ab"], vector)
        raw = path.read_bytes()
        expected = (
            struct.pack("<4sHIQ", b"EMBV", 1, 2, 1)
            + struct.pack("<I", 2)
            + b"ab"
            + vector.tobytes()
        )
        assert raw == expected

    def test_wrong_width_batch_rejected(self, tmp_path):
        with pytest.raises(ExportDataError, match="shape"):
            with EmbvWriter(tmp_path / "v.embv", dim=3, count=1) as writer:
                writer.write_batch(["a"], np.zeros((1, 2), dtype=np.float32))
        assert list(tmp_path.iterdir()) == []

    def test_undercount_leaves_no_file(self, tmp_path):
        with pytest.raises(ExportDataError, match="1 of 2"):
            with EmbvWriter(tmp_path / "v.embv", dim=2, count=2) as writer:
                writer.write_batch(["a"], np.zeros((1, 2), dtype=np.float32))
        assert list(tmp_path.iterdir()) == []

    def test_error_inside_block_leaves_no_file(self, tmp_path):
        with pytest.raises(RuntimeError):
            with EmbvWriter(tmp_path / "v.embv", dim=2, count=1):
                raise RuntimeError("boom")
        assert list(tmp_path.iterdir()) == []


class DriftingProvider:
    """Returns a wider batch the second time; exports must abort."""

    dim = 4
    tag = "drifting"

    def __init__(self):
        self.calls = 0

    def embed(self, texts):
        self.calls += 1
        width = 4 if self.calls == 1 else 5
        return np.zeros((len(texts), width), dtype=np.float32)


class TestExportVectors:
    @pytest.fixture()
    def entities(self, tmp_path):
        return write_csv(
            tmp_path / "e.csv",
            "id,name,city\nr1,anna,perth\nr2,ben,sydney\nr3,carla,hobart\n",
        )

    def test_three_rows_give_count_three(self, entities, tmp_path):
        out = tmp_path / "v.embv"
        job = ExportJob(entities, "id", "hash:8", 32, out)
        assert export_vectors(job) == 3
        magic, version, dim, count = struct.unpack("<4sHIQ", out.read_bytes()[:18])
        assert (magic, version, dim, count) == (b"EMBV", 1, 8, 3)

    def test_roundtrip_through_primary_loader_is_bitwise(self, entities, tmp_path):
        pytest.importorskip("nearmatch")
        from nearmatch.embedding import load_precomputed

        out = tmp_path / "v.embv"
        export_vectors(ExportJob(entities, "id", "hash:8", 2, out))
        loaded = load_precomputed(out)
        expected = HashProvider(8).embed(
            ["anna perth", "ben sydney", "carla hobart"]
        )
        assert sorted(loaded) == ["r1", "r2", "r3"]
        for row, entity_id in zip(expected, ("r1", "r2", "r3")):
            assert loaded[entity_id].dtype == np.float32
            assert np.array_equal(loaded[entity_id], row)

    def test_rerun_is_byte_identical(self, entities, tmp_path):
        first, second = tmp_path / "a.embv", tmp_path / "b.embv"
        export_vectors(ExportJob(entities, "id", "hash:16", 32, first))
        export_vectors(ExportJob(entities, "id", "hash:16", 32, second))
        assert first.read_bytes() == second.read_bytes()

    def test_batch_size_does_not_change_bytes(self, entities, tmp_path):
        outputs = []
        for batch in (1, 2, 100):
            out = tmp_path / f"b{batch}.embv"
            export_vectors(ExportJob(entities, "id", "hash:8", batch, out))
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_empty_table_exports_count_zero(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "id,name\n")
        out = tmp_path / "v.embv"
        assert export_vectors(ExportJob(path, "id", "hash:8", 4, out)) == 0
        pytest.importorskip("nearmatch")
        from nearmatch.embedding import load_precomputed

        assert load_precomputed(out) == {}

    def test_dimension_drift_aborts_without_output(self, entities, tmp_path):
        out = tmp_path / "v.embv"
        job = ExportJob(entities, "id", "unused", 2, out)
        with pytest.raises(ExportDataError, match="drifting"):
            export_vectors(job, provider=DriftingProvider())
        assert list(tmp_path.glob("v.embv*")) == []

    def test_failed_export_keeps_previous_file(self, entities, tmp_path):
        out = tmp_path / "v.embv"
        out.write_bytes(b"previous contents")
        job = ExportJob(entities, "id", "unused", 2, out)
        with pytest.raises(ExportDataError):
            export_vectors(job, provider=DriftingProvider())
        assert out.read_bytes() == b"previous contents"

    def test_batch_size_validated(self, entities, tmp_path):
        with pytest.raises(ExportConfigError, match="batch"):
            ExportJob(entities, "id", "hash:8", 0, tmp_path / "v.embv")


class TestCli:
    def test_export_success(self, tmp_path, capsys):
        path = write_csv(tmp_path / "e.csv", "id,x\nr1,a\nr2,b\n")
        code = cli.main(
            [
                "export",
                "--input", str(path),
                "--model", "hash:8",
                "--output", str(tmp_path / "v.embv"),
            ]
        )
        assert code == 0
        assert "wrote 2 vectors" in capsys.readouterr().out
        assert (tmp_path / "v.embv").exists()

    def test_missing_model_flag_is_usage_error(self, tmp_path):
        assert cli.main(["export", "--input", "x.csv", "--output", "y.embv"]) == 1

    def test_bad_model_id_is_usage_error(self, tmp_path, capsys):
        path = write_csv(tmp_path / "e.csv", "id,x\nr1,a\n")
        code = cli.main(
            [
                "export",
                "--input", str(path),
                "--model", "hash:tiny",
                "--output", str(tmp_path / "v.embv"),
            ]
        )
        assert code == 1

    def test_missing_input_is_data_error(self, tmp_path, capsys):
        code = cli.main(
            [
                "export",
                "--input", str(tmp_path / "nosuch.csv"),
                "--model", "hash:8",
                "--output", str(tmp_path / "v.embv"),
            ]
        )
        assert code == 2
        assert "nosuch" in capsys.readouterr().err

    def test_zero_batch_is_usage_error(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "id,x\nr1,a\n")
        code = cli.main(
            [
                "export",
                "--input", str(path),
                "--model", "hash:8",
                "--batch", "0",
                "--output", str(tmp_path / "v.embv"),
            ]
        )
        assert code == 1
