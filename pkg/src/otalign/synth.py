"""Synthetic bilingual corpus with planted alignments and planted signal.

Each synthetic stock-day draws per-sentence topic vectors on the sphere; a
configurable fraction of English sentences get a noisy foreign twin, the
rest of both sides get independent topics. Realized returns load on the mean
aligned-sentence embedding through a fixed direction at a target
signal-to-noise ratio, so alignment recovery, score quality, and the
aligned > full > unaligned orderings all have ground truth to check against.
Sentence text fields carry placeholders; no natural language is synthesized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .embed_io import SentenceRecord
from .scoring import ReturnObservation

DEFAULT_DIM = 768


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    stocks: int = 30
    first_year: int = 2012
    last_year: int = 2017
    days_per_year: int = 50
    sentences_min: int = 4
    sentences_max: int = 12
    parallel_fraction: float = 0.5
    noise_sigma: float = 0.1
    snr: float = 1.0
    ret_std: float = 0.02
    dim: int = DEFAULT_DIM

    def __post_init__(self):
        if not 0.0 <= self.parallel_fraction <= 1.0:
            raise ValueError("parallel_fraction must be in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.sentences_min < 1 or self.sentences_max < self.sentences_min:
            raise ValueError("invalid sentence count range")


@dataclass(frozen=True)
class TruthMask:
    ticker: str
    trading_day: date
    n_english: int
    n_foreign: int
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class SynthCorpus:
    records: list[SentenceRecord] = field(default_factory=list)
    returns: list[ReturnObservation] = field(default_factory=list)
    truth: list[TruthMask] = field(default_factory=list)
    signal_direction: np.ndarray | None = None


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def trading_days(year: int, count: int) -> list[date]:
    """First ``count`` weekdays of the calendar year."""
    days = []
    d = date(year, 1, 1)
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def generate_corpus(cfg: SynthConfig) -> SynthCorpus:
    rng = np.random.default_rng(cfg.seed)
    w_star = _unit_rows(rng, 1, cfg.dim)[0]

    records: list[SentenceRecord] = []
    truth: list[TruthMask] = []
    signals: list[tuple[str, date, float]] = []

    tickers = [f"S{i:04d}" for i in range(cfg.stocks)]
    for year in range(cfg.first_year, cfg.last_year + 1):
        for day in trading_days(year, cfg.days_per_year):
            for ticker in tickers:
                n_e = int(rng.integers(cfg.sentences_min, cfg.sentences_max + 1))
                k = round(cfg.parallel_fraction * n_e)
                n_extra = round(
                    (1.0 - cfg.parallel_fraction)
                    * int(rng.integers(cfg.sentences_min, cfg.sentences_max + 1))
                )
                if k + n_extra == 0:
                    n_extra = 1
                m = k + n_extra

                # noise_sigma is the noise vector's magnitude relative to the
                # unit topic, so per-coordinate std is sigma/sqrt(dim)
                scale = cfg.noise_sigma / np.sqrt(cfg.dim)
                topics = _unit_rows(rng, n_e, cfg.dim)
                x_e = topics + scale * rng.standard_normal((n_e, cfg.dim))
                x_e /= np.linalg.norm(x_e, axis=1, keepdims=True)
                twins = topics[:k] + scale * rng.standard_normal((k, cfg.dim))
                extras = _unit_rows(rng, n_extra, cfg.dim)
                x_f = np.vstack([twins, extras]) if k else extras
                x_f /= np.linalg.norm(x_f, axis=1, keepdims=True)

                perm = rng.permutation(m)
                x_f = x_f[np.argsort(perm)]  # twin i sits at row perm[i]
                pairs = tuple((i, int(perm[i])) for i in range(k))

                for i in range(n_e):
                    records.append(
                        SentenceRecord(ticker, day, "E", i, f"en {ticker} {day} s{i}", x_e[i])
                    )
                for j in range(m):
                    records.append(
                        SentenceRecord(ticker, day, "F", j, f"fx {ticker} {day} s{j}", x_f[j])
                    )
                truth.append(TruthMask(ticker, day, n_e, m, pairs))

                aligned_mean = x_e[:k].mean(axis=0) if k else np.zeros(cfg.dim)
                signals.append((ticker, day, float(aligned_mean @ w_star)))

    z = np.array([s for (_, _, s) in signals])
    z_std = float(z.std())
    if cfg.snr > 0 and z_std > 0:
        alpha = (cfg.snr / np.sqrt(1.0 + cfg.snr**2)) * cfg.ret_std / z_std
        beta = cfg.ret_std / np.sqrt(1.0 + cfg.snr**2)
    else:
        alpha, beta = 0.0, cfg.ret_std
    noise = rng.standard_normal(len(signals))
    returns = [
        ReturnObservation(t, d, float(max(alpha * s + beta * e, -0.9)))
        for (t, d, s), e in zip(signals, noise)
    ]
    return SynthCorpus(
        records=records, returns=returns, truth=truth, signal_direction=w_star
    )


def write_truth(truth: list[TruthMask], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in truth:
            fh.write(
                json.dumps(
                    {
                        "ticker": t.ticker,
                        "trading_day": t.trading_day.isoformat(),
                        "n_english": t.n_english,
                        "n_foreign": t.n_foreign,
                        "pairs": [list(p) for p in t.pairs],
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_truth(path) -> list[TruthMask]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(
                TruthMask(
                    ticker=rec["ticker"],
                    trading_day=date.fromisoformat(rec["trading_day"]),
                    n_english=int(rec["n_english"]),
                    n_foreign=int(rec["n_foreign"]),
                    pairs=tuple((int(i), int(j)) for i, j in rec["pairs"]),
                )
            )
    return out


def write_returns_csv(returns: list[ReturnObservation], path) -> None:
    import pandas as pd

    pd.DataFrame(
        {
            "ticker": [r.ticker for r in returns],
            "date": [r.trading_day.isoformat() for r in returns],
            "ret_oc": [r.ret_oc for r in returns],
        }
    ).to_csv(path, index=False)
