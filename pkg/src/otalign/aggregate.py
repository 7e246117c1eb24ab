"""Aligned/unaligned/full sentence-set splits and aggregated embeddings.

Per stock-day and language we emit up to three vectors: the mean embedding of
aligned sentences, of unaligned sentences, and of all sentences. Means are
re-normalized to unit length so downstream ridge features share a scale; the
raw mean norm is kept alongside so the choice stays auditable. A zero mean
(antipodal members) marks the vector absent instead of emitting NaN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date

import numpy as np

from .embed_io import EmbeddingMatrixPair, decode_embedding, encode_embedding

KINDS = ("A", "UA", "Full")
LANG_LABELS = ("E", "F")


@dataclass(frozen=True)
class AggregatedVector:
    vector: np.ndarray | None
    count: int
    raw_norm: float
    absent_reason: str | None = None

    @property
    def present(self) -> bool:
        return self.vector is not None


@dataclass(frozen=True)
class AggregatedEmbeddings:
    """The six per-(language, kind) aggregates of one stock-day."""

    ticker: str
    trading_day: date
    vectors: dict[tuple[str, str], AggregatedVector]

    def get(self, language: str, kind: str) -> AggregatedVector:
        return self.vectors[(language, kind)]


def split_aligned_sets(mask: np.ndarray) -> tuple[set[int], set[int]]:
    """Row/column index sets touched by at least one accepted alignment."""
    m = np.asarray(mask)
    aligned_e = set(np.flatnonzero(m.any(axis=1)).tolist())
    aligned_f = set(np.flatnonzero(m.any(axis=0)).tolist())
    return aligned_e, aligned_f


def _aggregate_rows(x: np.ndarray, idx: list[int]) -> AggregatedVector:
    if not idx:
        return AggregatedVector(vector=None, count=0, raw_norm=0.0, absent_reason="Empty")
    mean = x[idx].mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        return AggregatedVector(vector=None, count=len(idx), raw_norm=0.0,
                                absent_reason="ZeroMean")
    return AggregatedVector(vector=mean / norm, count=len(idx), raw_norm=norm)


def aggregate_embeddings(
    pair: EmbeddingMatrixPair,
    aligned_sets: tuple[set[int], set[int]],
    ticker: str = "",
    trading_day: date | None = None,
) -> AggregatedEmbeddings:
    aligned_e, aligned_f = aligned_sets
    n, m = pair.x_e.shape[0], pair.x_f.shape[0]
    if aligned_e and max(aligned_e) >= n or aligned_f and max(aligned_f) >= m:
        raise IndexError("aligned sets exceed matrix shapes")
    sets = {
        ("E", "A"): sorted(aligned_e),
        ("E", "UA"): sorted(set(range(n)) - aligned_e),
        ("E", "Full"): list(range(n)),
        ("F", "A"): sorted(aligned_f),
        ("F", "UA"): sorted(set(range(m)) - aligned_f),
        ("F", "Full"): list(range(m)),
    }
    vectors = {}
    for (lang, kind), idx in sets.items():
        x = pair.x_e if lang == "E" else pair.x_f
        vectors[(lang, kind)] = _aggregate_rows(x, idx)
    return AggregatedEmbeddings(ticker=ticker, trading_day=trading_day, vectors=vectors)


def to_record(agg: AggregatedEmbeddings, provenance: str | None = None) -> dict:
    rec = {"ticker": agg.ticker, "trading_day": agg.trading_day.isoformat()}
    if provenance is not None:
        rec["provenance"] = provenance
    for (lang, kind), av in agg.vectors.items():
        key = f"{lang}_{kind}"
        rec[f"count_{key}"] = av.count
        rec[f"raw_norm_{key}"] = av.raw_norm
        if av.present:
            rec[f"vec_{key}"] = encode_embedding(av.vector)
        elif av.absent_reason:
            rec[f"absent_{key}"] = av.absent_reason
    return rec


def from_record(rec: dict) -> AggregatedEmbeddings:
    vectors = {}
    for lang in LANG_LABELS:
        for kind in KINDS:
            key = f"{lang}_{kind}"
            vec = rec.get(f"vec_{key}")
            vectors[(lang, kind)] = AggregatedVector(
                vector=decode_embedding(vec) if vec is not None else None,
                count=int(rec.get(f"count_{key}", 0)),
                raw_norm=float(rec.get(f"raw_norm_{key}", 0.0)),
                absent_reason=rec.get(f"absent_{key}"),
            )
    return AggregatedEmbeddings(
        ticker=rec["ticker"],
        trading_day=date.fromisoformat(rec["trading_day"]),
        vectors=vectors,
    )


def write_aggregates(
    aggs: list[AggregatedEmbeddings], path, provenance: str | None = None
) -> None:
    """``provenance`` identifies the alignment parameters the mask came from."""
    with open(path, "w", encoding="utf-8") as fh:
        for agg in aggs:
            fh.write(json.dumps(to_record(agg, provenance), sort_keys=True) + "\n")


def read_aggregates(path) -> list[AggregatedEmbeddings]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(from_record(json.loads(line)))
    return out
