from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otalign.embed_io import (
    EmbeddingMatrixPair,
    SentenceRecord,
    decode_embedding,
    encode_embedding,
    group_records,
    normalize_embedding,
    read_sentence_records,
    stack_bundle,
    write_sentence_records,
)
from otalign.errors import DegenerateEmbedding, IncompleteBundle, NormError, SchemaError
from tests.conftest import random_unit_rows

DAY = date(2023, 1, 10)


def rec(lang, idx, vec, ticker="7203"):
    return SentenceRecord(ticker, DAY, lang, idx, f"{lang}{idx}", np.asarray(vec, float))


def unit(d, at=0):
    v = np.zeros(d)
    v[at] = 1.0
    return v


class TestNormalize:
    def test_three_four_five(self):
        v = np.zeros(8)
        v[0], v[1] = 3.0, 4.0
        out = normalize_embedding(v)
        np.testing.assert_allclose(out[:2], [0.6, 0.8])

    def test_unit_vector_unchanged(self):
        v = unit(8)
        np.testing.assert_allclose(normalize_embedding(v), v)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateEmbedding):
            normalize_embedding(np.zeros(8))

    @settings(max_examples=30)
    @given(seed=st.integers(0, 10_000))
    def test_output_always_unit(self, seed):
        v = np.random.default_rng(seed).standard_normal(16)
        assert np.linalg.norm(normalize_embedding(v)) == pytest.approx(1.0)


class TestRoundTrip:
    def test_b64_encoding_is_exact_for_float32(self):
        v = np.asarray(np.random.default_rng(0).standard_normal(768), dtype=np.float32)
        v = (v / np.linalg.norm(v)).astype(np.float32)
        out = decode_embedding(encode_embedding(v))
        np.testing.assert_array_equal(out, v.astype(np.float64))

    def test_write_read_round_trip(self, tmp_path, rng):
        d = 32
        x = random_unit_rows(rng, 5, d).astype(np.float32).astype(np.float64)
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        x = x.astype(np.float32).astype(np.float64)
        records = [rec("E", i, x[i]) for i in range(3)] + [rec("F", i, x[3 + i]) for i in range(2)]
        p = tmp_path / "sentences.jsonl"
        write_sentence_records(records, p)
        loaded = read_sentence_records(p, expected_dim=d)
        assert len(loaded) == 5
        for a, b in zip(records, loaded):
            assert (a.ticker, a.trading_day, a.language, a.sentence_index, a.text) == (
                b.ticker, b.trading_day, b.language, b.sentence_index, b.text)
            np.testing.assert_array_equal(
                np.asarray(a.embedding, dtype=np.float32), np.asarray(b.embedding, np.float32)
            )


class TestValidation:
    def test_well_formed_file_loads(self, tmp_path):
        p = tmp_path / "s.jsonl"
        write_sentence_records([rec("E", 0, unit(8)), rec("F", 0, unit(8, 1))], p)
        assert len(read_sentence_records(p, expected_dim=8)) == 2

    def test_dimension_mismatch_is_schema_error(self, tmp_path):
        p = tmp_path / "s.jsonl"
        write_sentence_records([rec("E", 0, unit(512))], p)
        with pytest.raises(SchemaError, match="512"):
            read_sentence_records(p, expected_dim=768)

    def test_norm_violation_names_line(self, tmp_path):
        p = tmp_path / "s.jsonl"
        write_sentence_records(
            [rec("E", 0, unit(8)), rec("F", 0, 0.5 * unit(8))], p
        )
        with pytest.raises(NormError, match="line 2"):
            read_sentence_records(p, expected_dim=8)

    def test_unknown_language_rejected(self, tmp_path):
        p = tmp_path / "s.jsonl"
        write_sentence_records([rec("Q", 0, unit(8))], p)
        with pytest.raises(SchemaError, match="language"):
            read_sentence_records(p, expected_dim=8)

    def test_non_contiguous_indices_rejected(self, tmp_path):
        p = tmp_path / "s.jsonl"
        write_sentence_records([rec("E", 0, unit(8)), rec("E", 2, unit(8, 1))], p)
        with pytest.raises(SchemaError, match="contiguous"):
            read_sentence_records(p, expected_dim=8)

    def test_plain_array_debug_form_accepted(self, tmp_path):
        p = tmp_path / "s.jsonl"
        p.write_text(
            '{"ticker": "T", "trading_day": "2023-01-10", "language": "E", '
            '"sentence_index": 0, "text": "t", "embedding": [1.0, 0.0, 0.0]}\n'
        )
        recs = read_sentence_records(p, expected_dim=3)
        np.testing.assert_array_equal(recs[0].embedding, [1.0, 0.0, 0.0])


class TestStackBundle:
    def test_shapes(self):
        records = [rec("E", i, unit(8, i)) for i in range(3)]
        records += [rec("F", i, unit(8, i + 3)) for i in range(2)]
        pair = stack_bundle(records)
        assert pair.x_e.shape == (3, 8) and pair.x_f.shape == (2, 8)

    def test_rows_follow_sentence_index_not_file_order(self, rng):
        x = random_unit_rows(rng, 3, 8)
        shuffled = [rec("E", 2, x[2]), rec("E", 0, x[0]), rec("E", 1, x[1]),
                    rec("F", 0, unit(8))]
        pair = stack_bundle(shuffled)
        np.testing.assert_array_equal(pair.x_e, x)

    def test_missing_language_raises(self):
        with pytest.raises(IncompleteBundle):
            stack_bundle([rec("E", 0, unit(8))])

    def test_permutation_invariance(self, rng):
        x = random_unit_rows(rng, 4, 8)
        records = [rec("E", i, x[i]) for i in range(3)] + [rec("F", 0, x[3])]
        base = stack_bundle(list(records))
        perm = stack_bundle([records[2], records[3], records[0], records[1]])
        np.testing.assert_array_equal(base.x_e, perm.x_e)
        np.testing.assert_array_equal(base.x_f, perm.x_f)

    def test_matrix_pair_validates_norms(self):
        with pytest.raises(NormError):
            EmbeddingMatrixPair(x_e=np.ones((2, 4)), x_f=np.eye(4)[:1])

    def test_group_records_keys(self):
        records = [rec("E", 0, unit(4)), rec("F", 0, unit(4), ticker="X"),
                   rec("F", 0, unit(4))]
        grouped = group_records(records)
        assert set(grouped) == {("7203", DAY), ("X", DAY)}
