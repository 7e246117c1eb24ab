"""Daily quantile long-short portfolios and their summary statistics.

Scores are joined with same-day realized open-close returns; each eligible
day the scored stocks are ranked and split into quantile buckets, the spread
between the top and bottom equal-weighted bucket returns forms the daily
long-short series, and the series is summarized by distribution stats plus
daily and sqrt(252)-annualized Sharpe ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date

import numpy as np
import pandas as pd

from .errors import DataError, InsufficientData, UndefinedSharpe
from .scoring import ScoreRecord, returns_frame

DEFAULT_N_QUANTILES = 5
DEFAULT_MIN_STOCKS = 20
DEFAULT_ANNUALIZATION_DAYS = 252

KIND_DISPLAY = {"A": "Aligned", "UA": "Unaligned", "Full": "Full"}


@dataclass(frozen=True)
class DailyPortfolio:
    trading_day: date
    language: str
    kind: str
    long: tuple[str, ...]
    short: tuple[str, ...]
    ret_long: float
    ret_short: float
    ls: float
    degenerate_ranking: bool = False


@dataclass(frozen=True)
class StrategyStats:
    geo_mean: float
    mean: float
    std: float
    p5: float
    p50: float
    p95: float
    sharpe_daily: float
    sharpe_annual: float
    n_days: int


def _bucket_sizes(n: int, q: int) -> list[int]:
    """N = q*k + r: the r extra stocks go one each to the top-most buckets."""
    k, r = divmod(n, q)
    return [k + 1 if i < r else k for i in range(q)]


def form_portfolios(
    scores: list[ScoreRecord],
    returns,
    n_quantiles: int = DEFAULT_N_QUANTILES,
    min_stocks: int = DEFAULT_MIN_STOCKS,
) -> list[DailyPortfolio]:
    """One portfolio per (language, kind, day) with enough scored stocks.

    Ranking is by score descending with lexicographic ticker tie-break; a day
    whose ties cross the long or short bucket boundary is flagged
    DegenerateRanking but still traded.
    """
    ret_df = returns_frame(returns)
    ret_map = {
        (t, d): r
        for t, d, r in zip(ret_df["ticker"], ret_df["trading_day"], ret_df["ret_oc"])
    }
    grouped: dict[tuple[str, str, date], list[ScoreRecord]] = {}
    seen = set()
    for s in scores:
        key = (s.language, s.kind, s.trading_day, s.ticker)
        if key in seen:
            raise DataError(f"duplicate score for {key}")
        seen.add(key)
        grouped.setdefault((s.language, s.kind, s.trading_day), []).append(s)

    portfolios = []
    for (lang, kind, day) in sorted(grouped):
        recs = [
            (s.ticker, s.score, ret_map[(s.ticker, day)])
            for s in grouped[(lang, kind, day)]
            if (s.ticker, day) in ret_map
        ]
        if len(recs) < max(min_stocks, n_quantiles):
            continue
        recs.sort(key=lambda r: (-r[1], r[0]))
        sizes = _bucket_sizes(len(recs), n_quantiles)
        long = recs[: sizes[0]]
        short = recs[len(recs) - sizes[-1] :]
        degenerate = (
            len(recs) > sizes[0] and long[-1][1] == recs[sizes[0]][1]
        ) or (
            len(recs) > sizes[-1] and short[0][1] == recs[len(recs) - sizes[-1] - 1][1]
        )
        ret_long = float(np.mean([r[2] for r in long]))
        ret_short = float(np.mean([r[2] for r in short]))
        portfolios.append(
            DailyPortfolio(
                trading_day=day,
                language=lang,
                kind=kind,
                long=tuple(r[0] for r in long),
                short=tuple(r[0] for r in short),
                ret_long=ret_long,
                ret_short=ret_short,
                ls=ret_long - ret_short,
                degenerate_ranking=bool(degenerate),
            )
        )
    return portfolios


def strategy_stats(
    ls_series, annualization_days: int = DEFAULT_ANNUALIZATION_DAYS
) -> StrategyStats:
    """Distribution and Sharpe statistics of one day-ordered long-short series."""
    ls = np.asarray(ls_series, dtype=np.float64)
    if ls.size < 2:
        raise InsufficientData(f"need at least 2 days, got {ls.size}")
    if (ls <= -1.0).any():
        raise DataError("long-short returns must exceed -1")
    geo_mean = float(np.expm1(np.mean(np.log1p(ls))))
    mean = float(np.mean(ls))
    std = float(np.std(ls, ddof=1))
    if std == 0.0:
        raise UndefinedSharpe("zero-variance long-short series")
    sharpe_daily = mean / std
    return StrategyStats(
        geo_mean=geo_mean,
        mean=mean,
        std=std,
        p5=float(np.percentile(ls, 5)),
        p50=float(np.percentile(ls, 50)),
        p95=float(np.percentile(ls, 95)),
        sharpe_daily=sharpe_daily,
        sharpe_annual=sharpe_daily * math.sqrt(annualization_days),
        n_days=int(ls.size),
    )


def ls_frame(portfolios: list[DailyPortfolio]) -> pd.DataFrame:
    """Daily long-short returns, one row per (language, kind, day)."""
    return pd.DataFrame(
        {
            "date": [p.trading_day.isoformat() for p in portfolios],
            "language": [p.language for p in portfolios],
            "kind": [p.kind for p in portfolios],
            "ret_long": [p.ret_long for p in portfolios],
            "ret_short": [p.ret_short for p in portfolios],
            "ls": [p.ls for p in portfolios],
            "degenerate_ranking": [p.degenerate_ranking for p in portfolios],
        }
    )


def summary_table(
    portfolios: list[DailyPortfolio],
    annualization_days: int = DEFAULT_ANNUALIZATION_DAYS,
) -> pd.DataFrame:
    """Strategy summary, one row per (kind, language), Table-3 column layout."""
    rows = []
    by_cell: dict[tuple[str, str], list[float]] = {}
    for p in portfolios:
        by_cell.setdefault((p.kind, p.language), []).append(p.ls)
    for kind in ("A", "UA", "Full"):
        for lang in ("F", "E"):
            series = by_cell.get((kind, lang))
            if not series or len(series) < 2:
                continue
            st = strategy_stats(series, annualization_days)
            rows.append(
                {
                    "alignment": KIND_DISPLAY[kind],
                    "language": lang,
                    "geo_mean": st.geo_mean,
                    "mean": st.mean,
                    "std": st.std,
                    "p5": st.p5,
                    "p50": st.p50,
                    "p95": st.p95,
                    "sharpe": st.sharpe_daily,
                    "ann_sharpe": st.sharpe_annual,
                    "n_days": st.n_days,
                }
            )
    return pd.DataFrame(rows)
