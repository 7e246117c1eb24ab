"""Sentence-embedding interchange format and per-bundle matrix assembly.

JSONL schema, one sentence per line:

    {ticker, trading_day, language, sentence_index, text,
     embedding_b64 | embedding}

``language`` is "E" or "F". ``embedding_b64`` is base64 of the little-endian
float32 vector; a plain ``embedding`` array is accepted as a debug form.
Vectors must be unit L2 norm within 1e-6 and sentence indices contiguous
from 0 per (ticker, day, language). This schema is the contract any upstream
embedder must produce.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import DegenerateEmbedding, IncompleteBundle, NormError, SchemaError

DEFAULT_DIM = 768
NORM_TOL = 1e-6
LANGUAGES = ("E", "F")


@dataclass(frozen=True)
class SentenceRecord:
    ticker: str
    trading_day: date
    language: str
    sentence_index: int
    text: str
    embedding: np.ndarray


@dataclass(frozen=True)
class EmbeddingMatrixPair:
    """Row-unit-norm matrices; row i is sentence i of that language."""

    x_e: np.ndarray
    x_f: np.ndarray

    def __post_init__(self):
        if self.x_e.ndim != 2 or self.x_f.ndim != 2:
            raise SchemaError("embedding matrices must be 2-D")
        if self.x_e.shape[0] < 1 or self.x_f.shape[0] < 1:
            raise SchemaError("both language sides must have at least one row")
        if self.x_e.shape[1] != self.x_f.shape[1]:
            raise SchemaError("embedding dimensions differ across languages")
        for name, x in (("x_e", self.x_e), ("x_f", self.x_f)):
            norms = np.linalg.norm(x, axis=1)
            bad = np.abs(norms - 1.0) > NORM_TOL
            if bad.any():
                raise NormError(f"{name} rows {np.flatnonzero(bad).tolist()} not unit norm")


def normalize_embedding(v: np.ndarray) -> np.ndarray:
    """v / ||v||; zero vectors cannot be normalized."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateEmbedding("cannot normalize zero or non-finite vector")
    return v / norm


def encode_embedding(v: np.ndarray) -> str:
    return base64.b64encode(np.asarray(v, dtype="<f4").tobytes()).decode("ascii")


def decode_embedding(b64: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(b64), dtype="<f4").astype(np.float64)


def write_sentence_records(records: list[SentenceRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "ticker": r.ticker,
                        "trading_day": r.trading_day.isoformat(),
                        "language": r.language,
                        "sentence_index": r.sentence_index,
                        "text": r.text,
                        "embedding_b64": encode_embedding(r.embedding),
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_sentence_records(path, expected_dim: int = DEFAULT_DIM) -> list[SentenceRecord]:
    """Load and validate the full file; any violation aborts the load.

    All problems are collected first so the error names every offending line.
    """
    records = []
    schema_problems = []
    norm_problems = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                schema_problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
                continue
            try:
                if "embedding_b64" in rec:
                    vec = decode_embedding(rec["embedding_b64"])
                else:
                    vec = np.asarray(rec["embedding"], dtype=np.float64)
                record = SentenceRecord(
                    ticker=str(rec["ticker"]),
                    trading_day=date.fromisoformat(rec["trading_day"]),
                    language=str(rec["language"]),
                    sentence_index=int(rec["sentence_index"]),
                    text=str(rec.get("text", "")),
                    embedding=vec,
                )
            except (KeyError, ValueError, TypeError) as exc:
                schema_problems.append(f"line {lineno}: {exc}")
                continue
            if record.language not in LANGUAGES:
                schema_problems.append(
                    f"line {lineno}: language {record.language!r} not in {LANGUAGES}"
                )
                continue
            if vec.shape != (expected_dim,):
                schema_problems.append(
                    f"line {lineno}: dimension {vec.shape[0] if vec.ndim == 1 else vec.shape}"
                    f" != expected {expected_dim}"
                )
                continue
            norm = float(np.linalg.norm(vec))
            if abs(norm - 1.0) > NORM_TOL:
                norm_problems.append(f"line {lineno}: norm {norm:.6g} not unit")
                continue
            records.append(record)

    if schema_problems:
        raise SchemaError(f"{path}: " + "; ".join(schema_problems + norm_problems))
    if norm_problems:
        raise NormError(f"{path}: " + "; ".join(norm_problems))

    _check_contiguity(records, path)
    return records


def _check_contiguity(records: list[SentenceRecord], path) -> None:
    seen: dict[tuple[str, date, str], list[int]] = {}
    for r in records:
        seen.setdefault((r.ticker, r.trading_day, r.language), []).append(r.sentence_index)
    problems = []
    for key, idxs in seen.items():
        if sorted(idxs) != list(range(len(idxs))):
            problems.append(f"{key}: indices {sorted(idxs)} not contiguous from 0")
    if problems:
        raise SchemaError(f"{path}: " + "; ".join(problems))


def group_records(
    records: list[SentenceRecord],
) -> dict[tuple[str, date], list[SentenceRecord]]:
    grouped: dict[tuple[str, date], list[SentenceRecord]] = {}
    for r in records:
        grouped.setdefault((r.ticker, r.trading_day), []).append(r)
    return grouped


def stack_bundle(records: list[SentenceRecord]) -> EmbeddingMatrixPair:
    """Stack one bundle's records into (n, d) / (m, d) index-ordered matrices."""
    by_lang: dict[str, list[SentenceRecord]] = {"E": [], "F": []}
    for r in records:
        if r.language not in by_lang:
            raise SchemaError(f"unknown language {r.language!r}")
        by_lang[r.language].append(r)
    for lang, recs in by_lang.items():
        if not recs:
            raise IncompleteBundle(f"bundle missing language {lang}")
        recs.sort(key=lambda r: r.sentence_index)
        if [r.sentence_index for r in recs] != list(range(len(recs))):
            raise SchemaError(f"language {lang}: sentence indices not contiguous")
    x_e = np.vstack([r.embedding for r in by_lang["E"]])
    x_f = np.vstack([r.embedding for r in by_lang["F"]])
    return EmbeddingMatrixPair(x_e=x_e, x_f=x_f)
