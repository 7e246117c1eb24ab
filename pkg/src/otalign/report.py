"""Descriptive artifacts: similarity tables, score correlations, coverage.

Everything here is a pure fold over stored pipeline artifacts and emits
CSV/JSON tables; rendering is left to external plotting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date

import numpy as np
import pandas as pd

from .aggregate import AggregatedEmbeddings
from .ot_core import baseline_normalize
from .scoring import ScoreRecord, returns_frame

KIND_ROWS = (("A", "Aligned"), ("UA", "Unaligned"), ("Full", "Full"))
SCORE_COLUMNS = ("Ret", "Soft_E_A", "Soft_E_UA", "Soft_E_Full",
                 "Soft_F_A", "Soft_F_UA", "Soft_F_Full")
MIN_CORR_PAIRS = 3


@dataclass(frozen=True)
class AlignmentSummary:
    """Per-stock-day alignment coverage needed by the yearly report."""

    ticker: str
    trading_day: date
    n_english: int
    n_foreign: int
    aligned_english: int
    aligned_foreign: int
    aligned_pairs: int


@dataclass(frozen=True)
class CoverageStats:
    proportions: pd.DataFrame
    day_counts: pd.DataFrame


def similarity_table(aggregates: list[AggregatedEmbeddings]) -> pd.DataFrame:
    """Cross-language cosine similarity distribution per alignment kind.

    Stock-days missing either language's vector for a kind are skipped; the
    surviving pair count is reported per row.
    """
    rows = []
    for kind, display in KIND_ROWS:
        sims = []
        for agg in aggregates:
            ve = agg.get("E", kind)
            vf = agg.get("F", kind)
            if ve.present and vf.present:
                sims.append(float(ve.vector @ vf.vector))
        if sims:
            arr = np.asarray(sims)
            rows.append(
                {
                    "alignment": display,
                    "mean": float(arr.mean()),
                    "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
                    "p5": float(np.percentile(arr, 5)),
                    "p50": float(np.percentile(arr, 50)),
                    "p95": float(np.percentile(arr, 95)),
                    "n_pairs": int(arr.size),
                }
            )
        else:
            rows.append({"alignment": display, "mean": np.nan, "std": np.nan,
                         "p5": np.nan, "p50": np.nan, "p95": np.nan, "n_pairs": 0})
    return pd.DataFrame(rows)


def correlation_matrix(scores: list[ScoreRecord], returns) -> pd.DataFrame:
    """Pairwise-complete Pearson correlations of returns and the six scores."""
    ret_df = returns_frame(returns)
    wide: dict[tuple[str, date], dict[str, float]] = {}
    for t, d, r in zip(ret_df["ticker"], ret_df["trading_day"], ret_df["ret_oc"]):
        wide[(t, d)] = {"Ret": r}
    for s in scores:
        key = (s.ticker, s.trading_day)
        if key in wide:
            wide[key][f"Soft_{s.language}_{s.kind}"] = s.score

    frame = pd.DataFrame.from_dict(wide, orient="index")
    frame = frame.reindex(columns=list(SCORE_COLUMNS))
    k = len(SCORE_COLUMNS)
    out = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(i, k):
            a = frame.iloc[:, i].to_numpy(dtype=np.float64)
            b = frame.iloc[:, j].to_numpy(dtype=np.float64)
            both = ~np.isnan(a) & ~np.isnan(b)
            if both.sum() < MIN_CORR_PAIRS:
                continue
            if i == j:
                out[i, j] = 1.0
                continue
            av, bv = a[both], b[both]
            sa, sb = av.std(), bv.std()
            if sa == 0.0 or sb == 0.0:
                continue
            out[i, j] = out[j, i] = float(
                ((av - av.mean()) * (bv - bv.mean())).mean() / (sa * sb)
            )
    return pd.DataFrame(out, index=list(SCORE_COLUMNS), columns=list(SCORE_COLUMNS))


def coverage_series(summaries: list[AlignmentSummary]) -> CoverageStats:
    """Yearly mean aligned/unaligned sentence proportions and day counts."""
    prop_rows = []
    count_rows = []
    by_year: dict[int, list[AlignmentSummary]] = {}
    for s in summaries:
        by_year.setdefault(s.trading_day.year, []).append(s)
    for year in sorted(by_year):
        group = by_year[year]
        for lang in ("E", "F"):
            if lang == "E":
                props = [s.aligned_english / s.n_english for s in group if s.n_english]
            else:
                props = [s.aligned_foreign / s.n_foreign for s in group if s.n_foreign]
            aligned = float(np.mean(props)) if props else np.nan
            prop_rows.append(
                {"year": year, "language": lang,
                 "aligned_prop": aligned, "unaligned_prop": 1.0 - aligned}
            )
        count_rows.append(
            {
                "year": year,
                "days_with_aligned": sum(1 for s in group if s.aligned_pairs > 0),
                "days_with_unaligned": sum(
                    1
                    for s in group
                    if (s.n_english - s.aligned_english)
                    + (s.n_foreign - s.aligned_foreign)
                    > 0
                ),
                "total_days": len(group),
            }
        )
    return CoverageStats(
        proportions=pd.DataFrame(prop_rows), day_counts=pd.DataFrame(count_rows)
    )


def heatmap_payload(
    xi: np.ndarray,
    gamma: np.ndarray,
    english_texts: list[str] | None = None,
    foreign_texts: list[str] | None = None,
) -> dict:
    """Dense matrices for side-by-side sparsity rendering of one stock-day."""
    return {
        "xi": np.asarray(xi).tolist(),
        "gamma": np.asarray(gamma).tolist(),
        "softmax": baseline_normalize(xi, "softmax").tolist(),
        "entmax15": baseline_normalize(xi, "entmax15").tolist(),
        "english_texts": english_texts or [],
        "foreign_texts": foreign_texts or [],
    }


def heatmap_dump(xi, gamma, path, english_texts=None, foreign_texts=None) -> None:
    payload = heatmap_payload(xi, gamma, english_texts, foreign_texts)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def heatmap_load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    for key in ("xi", "gamma", "softmax", "entmax15"):
        payload[key] = np.asarray(payload[key], dtype=np.float64)
    return payload
