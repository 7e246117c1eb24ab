"""Contract tests against the pipeline's interchange format, plus the pinned
real-model checks that need the actual encoder weights."""

import json

import numpy as np
import pytest

from otembed.cli import main
from otembed.encode import DEFAULT_MODEL, SentenceTransformerEncoder

# the downstream pipeline's validator is the contract surface
from otalign.embed_io import group_records, read_sentence_records, stack_bundle

BUNDLES = [
    {
        "ticker": "7203",
        "trading_day": "2023-01-10",
        "english_text": "Toyota raised its outlook. Shares gained 2% on the news.",
        "foreign_text": "トヨタは業績見通しを引き上げた。株価は上昇した。",
    },
    {
        "ticker": "8301",
        "trading_day": "2023-01-11",
        "english_text": "The Bank of Japan kept rates unchanged.",
        "foreign_text": "日銀は政策金利を据え置いた。追加の措置は発表されなかった。",
    },
]

FIXTURE_PAIR = (
    "The Bank of Japan kept interest rates unchanged on Wednesday.",
    "日銀は水曜日、政策金利を据え置いた。",
)


def write_bundles(path):
    with open(path, "w", encoding="utf-8") as fh:
        for b in BUNDLES:
            fh.write(json.dumps(b, ensure_ascii=False) + "\n")


def load_real_encoder():
    try:
        return SentenceTransformerEncoder(DEFAULT_MODEL, batch_size=8)
    except EnvironmentError as exc:
        pytest.skip(f"pinned model unavailable in this environment: {exc}")


class TestOfflineContract:
    def test_hash_encoder_output_passes_pipeline_validation(self, tmp_path):
        inp = tmp_path / "bundles.jsonl"
        out = tmp_path / "sentences.jsonl"
        write_bundles(inp)
        rc = main(
            ["--input", str(inp), "--output", str(out), "--encoder", "hash", "--dim", "96"]
        )
        assert rc == 0
        records = read_sentence_records(out, expected_dim=96)
        assert len(records) == 7  # sentences: 2+2 in the first bundle, 1+2 in the second
        pairs = {k: stack_bundle(list(v)) for k, v in group_records(records).items()}
        assert len(pairs) == 2

    def test_output_is_deterministic(self, tmp_path):
        inp = tmp_path / "bundles.jsonl"
        write_bundles(inp)
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        main(["--input", str(inp), "--output", str(out1), "--encoder", "hash"])
        main(["--input", str(inp), "--output", str(out2), "--encoder", "hash"])
        assert out1.read_bytes() == out2.read_bytes()

    def test_counts_reported(self, tmp_path, capsys):
        inp = tmp_path / "bundles.jsonl"
        out = tmp_path / "s.jsonl"
        write_bundles(inp)
        main(["--input", str(inp), "--output", str(out), "--encoder", "hash"])
        payload = json.loads(capsys.readouterr().out)
        assert payload["bundles"] == 2
        assert payload["records"] == 7
        assert payload["truncated_sentences"] == 0

    def test_missing_input_exits_with_dependency_code(self, tmp_path):
        rc = main(
            ["--input", str(tmp_path / "nope.jsonl"),
             "--output", str(tmp_path / "o.jsonl"), "--encoder", "hash"]
        )
        assert rc == 3


class TestPinnedModel:
    """Golden checks that require the real pinned encoder weights."""

    def test_bilingual_fixture_pair_scores_above_gate(self):
        encoder = load_real_encoder()
        vecs = encoder.encode(list(FIXTURE_PAIR))
        cosine = float(vecs[0] @ vecs[1])
        assert cosine >= 0.6

    def test_model_output_passes_pipeline_validation(self, tmp_path):
        encoder = load_real_encoder()
        inp = tmp_path / "bundles.jsonl"
        out = tmp_path / "sentences.jsonl"
        write_bundles(inp)
        rc = main(["--input", str(inp), "--output", str(out)])
        assert rc == 0
        records = read_sentence_records(out, expected_dim=encoder.dim)
        assert records

    def test_same_sentence_twice_identical_vectors(self):
        encoder = load_real_encoder()
        out = encoder.encode(["Repeated sentence.", "Repeated sentence."])
        np.testing.assert_array_equal(out[0], out[1])
