"""Ridge return scores on a rolling annual schedule.

One model per (language, kind) cell and scoring year: trained on the
preceding ``window_years`` calendar years of (aggregated embedding,
open-close return) rows, with the ridge penalty picked by contiguous
time-ordered cross validation, then applied to every stock-day of the
scoring year whose feature vector is present. Training windows never touch
the scoring year, so scores are free of look-ahead by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date

import numpy as np
import pandas as pd
from scipy.linalg import cho_factor, cho_solve

from .aggregate import KINDS, LANG_LABELS, AggregatedEmbeddings
from .errors import DataError, InsufficientData, SingularSystem

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(float(x) for x in range(10, 101, 10))
DEFAULT_FOLDS = 5
DEFAULT_MIN_TRAIN_ROWS = 100
DEFAULT_WINDOW_YEARS = 6


@dataclass(frozen=True)
class ReturnObservation:
    ticker: str
    trading_day: date
    ret_oc: float

    def __post_init__(self):
        if not self.ret_oc > -1.0:
            raise DataError(
                f"{self.ticker} {self.trading_day}: open-close return {self.ret_oc} <= -1"
            )


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray
    lam: float
    train_window: tuple[int, int]
    language: str
    kind: str
    train_rows: int


@dataclass(frozen=True)
class ScoreRecord:
    ticker: str
    trading_day: date
    language: str
    kind: str
    score: float


def fit_ridge(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (X'X + lam I) w = X'y by Cholesky; no intercept."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    gram = x.T @ x
    gram[np.diag_indices_from(gram)] += lam
    rhs = x.T @ y
    try:
        return cho_solve(cho_factor(gram), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(
            f"normal equations singular at lambda={lam} (rank-deficient design)"
        ) from exc


def cross_validate_lambda(
    x: np.ndarray,
    y: np.ndarray,
    grid: tuple[float, ...] = DEFAULT_GRID,
    folds: int = DEFAULT_FOLDS,
) -> float:
    """Contiguous time-ordered k-fold CV; ties resolve to the larger lambda."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if n < folds:
        raise InsufficientData(f"{n} rows < {folds} folds")
    blocks = np.array_split(np.arange(n), folds)
    mean_mse = []
    for lam in grid:
        errs = []
        for block in blocks:
            train = np.setdiff1d(np.arange(n), block, assume_unique=True)
            w = fit_ridge(x[train], y[train], lam)
            resid = x[block] @ w - y[block]
            errs.append(float(np.mean(resid**2)))
        mean_mse.append(float(np.mean(errs)))
    order = sorted(range(len(grid)), key=lambda i: (mean_mse[i], -grid[i]))
    return float(grid[order[0]])


def returns_frame(observations) -> pd.DataFrame:
    """Normalize a list of ReturnObservation or a DataFrame to the join shape."""
    if isinstance(observations, pd.DataFrame):
        df = observations.rename(columns={"date": "trading_day"}).copy()
        df["trading_day"] = pd.to_datetime(df["trading_day"]).dt.date
    else:
        df = pd.DataFrame(
            {
                "ticker": [o.ticker for o in observations],
                "trading_day": [o.trading_day for o in observations],
                "ret_oc": [o.ret_oc for o in observations],
            }
        )
    if df.duplicated(subset=["ticker", "trading_day"]).any():
        raise DataError("duplicate (ticker, trading_day) in returns")
    return df[["ticker", "trading_day", "ret_oc"]]


def _feature_table(aggregates: list[AggregatedEmbeddings]):
    """(ticker, day, year) rows plus per-(l,k) stacked feature vectors."""
    rows = []
    for agg in aggregates:
        entry = {"ticker": agg.ticker, "trading_day": agg.trading_day,
                 "year": agg.trading_day.year}
        for lang in LANG_LABELS:
            for kind in KINDS:
                av = agg.get(lang, kind)
                entry[(lang, kind)] = av.vector if av.present else None
        rows.append(entry)
    return rows


def rolling_scores(
    aggregates: list[AggregatedEmbeddings],
    returns,
    first_train_year: int,
    last_year: int,
    window_years: int = DEFAULT_WINDOW_YEARS,
    grid: tuple[float, ...] = DEFAULT_GRID,
    folds: int = DEFAULT_FOLDS,
    min_train_rows: int = DEFAULT_MIN_TRAIN_ROWS,
) -> tuple[list[ScoreRecord], list[RidgeModel]]:
    """Generate out-of-sample scores for every year after the first window.

    Scoring year Y uses a model trained on calendar years [Y - window_years,
    Y - 1]; cells with fewer than ``min_train_rows`` present-feature rows are
    skipped and logged.
    """
    ret_df = returns_frame(returns)
    ret_map = {
        (t, d): r
        for t, d, r in zip(ret_df["ticker"], ret_df["trading_day"], ret_df["ret_oc"])
    }
    feats = _feature_table(aggregates)
    feats.sort(key=lambda e: (e["trading_day"], e["ticker"]))

    scores: list[ScoreRecord] = []
    models: list[RidgeModel] = []
    first_score_year = first_train_year + window_years
    for score_year in range(first_score_year, last_year + 1):
        window = (score_year - window_years, score_year - 1)
        train_rows = [e for e in feats if window[0] <= e["year"] <= window[1]]
        score_rows = [e for e in feats if e["year"] == score_year]
        if not score_rows:
            continue
        for lang in LANG_LABELS:
            for kind in KINDS:
                xs, ys = [], []
                for e in train_rows:
                    vec = e[(lang, kind)]
                    ret = ret_map.get((e["ticker"], e["trading_day"]))
                    if vec is not None and ret is not None:
                        xs.append(vec)
                        ys.append(ret)
                if len(xs) < max(min_train_rows, folds):
                    logger.info(
                        "skipping year=%d lang=%s kind=%s: %d training rows < %d",
                        score_year, lang, kind, len(xs), min_train_rows,
                    )
                    continue
                x = np.vstack(xs)
                y = np.asarray(ys)
                lam = cross_validate_lambda(x, y, grid=grid, folds=folds)
                w = fit_ridge(x, y, lam)
                models.append(
                    RidgeModel(weights=w, lam=lam, train_window=window,
                               language=lang, kind=kind, train_rows=len(xs))
                )
                for e in score_rows:
                    vec = e[(lang, kind)]
                    if vec is None:
                        continue
                    scores.append(
                        ScoreRecord(
                            ticker=e["ticker"],
                            trading_day=e["trading_day"],
                            language=lang,
                            kind=kind,
                            score=float(vec @ w),
                        )
                    )
    return scores, models


def write_scores(scores: list[ScoreRecord], path) -> None:
    pd.DataFrame(
        {
            "ticker": [s.ticker for s in scores],
            "date": [s.trading_day.isoformat() for s in scores],
            "language": [s.language for s in scores],
            "kind": [s.kind for s in scores],
            "score": [s.score for s in scores],
        }
    ).to_csv(path, index=False)


def read_scores(path) -> list[ScoreRecord]:
    df = pd.read_csv(path)
    return [
        ScoreRecord(
            ticker=str(r.ticker),
            trading_day=date.fromisoformat(str(r.date)),
            language=str(r.language),
            kind=str(r.kind),
            score=float(r.score),
        )
        for r in df.itertuples()
    ]


def read_returns_csv(path) -> list[ReturnObservation]:
    df = pd.read_csv(path)
    return [
        ReturnObservation(
            ticker=str(r.ticker),
            trading_day=date.fromisoformat(str(r.date)),
            ret_oc=float(r.ret_oc),
        )
        for r in df.itertuples()
    ]
