"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict lines as
they complete. The paper-scale headline numbers are not reproducible without
the proprietary corpus, so these are property and synthetic-corpus checks.
"""

import math
import time

import numpy as np
import pytest

from otalign.aggregate import aggregate_embeddings, split_aligned_sets
from otalign.backtest import form_portfolios, strategy_stats, summary_table
from otalign.config import config_from_dict
from otalign.embed_io import group_records, stack_bundle
from otalign.ot_core import (
    align_pair,
    baseline_normalize,
    exact_ot_oracle,
    global_top_fraction,
    sinkhorn,
    uniform_marginals,
)
from otalign.pipeline import run, write_synth_corpus
from otalign.report import similarity_table
from otalign.scoring import fit_ridge, rolling_scores
from otalign.synth import SynthConfig, generate_corpus


def verdict(num, ok, detail):
    line = f"criterion {num:02d} {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def align_corpus(corpus):
    """Align every stock-day with default parameters; return per-day results."""
    grouped = group_records(corpus.records)
    out = {}
    for key in sorted(grouped):
        pair = stack_bundle(list(grouped[key]))
        out[key] = (pair, align_pair(pair))
    return out


@pytest.fixture(scope="module")
def recovery_corpus():
    """500 stock-days at the planted-recovery operating point."""
    cfg = SynthConfig(
        seed=0, stocks=10, first_year=2020, last_year=2020, days_per_year=50,
        parallel_fraction=0.5, noise_sigma=0.1,
    )
    corpus = generate_corpus(cfg)
    start = time.perf_counter()
    aligned = align_corpus(corpus)
    elapsed = time.perf_counter() - start
    return corpus, aligned, elapsed


@pytest.fixture(scope="module")
def signal_chain():
    """Full chain on an 8-year synthetic corpus whose returns load on
    aligned content at SNR 1; 5 scored years."""
    cfg = SynthConfig(
        seed=1, stocks=22, first_year=2012, last_year=2019, days_per_year=12,
        sentences_min=4, sentences_max=10, parallel_fraction=0.5,
        noise_sigma=0.1, snr=1.0, dim=64,
    )
    corpus = generate_corpus(cfg)
    aligned = align_corpus(corpus)
    aggs = [
        aggregate_embeddings(pair, split_aligned_sets(res.alignment.mask), *key)
        for key, (pair, res) in aligned.items()
    ]
    scores, models = rolling_scores(
        aggs, corpus.returns, first_train_year=2012, last_year=2019,
        window_years=3, min_train_rows=100,
    )
    return corpus, aggs, scores, models


def test_criterion_01_sinkhorn_feasibility():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    worst = 0.0
    all_converged = True
    for _ in range(1000):
        n, m = int(rng.integers(2, 51)), int(rng.integers(2, 51))
        plan = sinkhorn(rng.uniform(size=(n, m)), epsilon=0.05, tol=1e-9)
        all_converged &= plan.converged
        worst = max(worst, plan.marginal_violation)
    elapsed = time.perf_counter() - start
    ok = all_converged and worst <= 1e-8 and elapsed < 10.0
    verdict(1, ok, f"1000 plans, worst violation {worst:.2e}, {elapsed:.2f}s")


def test_criterion_02_oracle_equivalence():
    rng = np.random.default_rng(0)
    worst_rel = 0.0
    for _ in range(200):
        n, m = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        cost = rng.uniform(size=(n, m))
        p, q = uniform_marginals(n, m)
        lp_obj = float((exact_ot_oracle(cost, p, q) * cost).sum())
        plan = sinkhorn(cost, epsilon=1e-3, tol=1e-9, max_iter=50_000)
        rel = (float((plan.gamma * cost).sum()) - lp_obj) / lp_obj
        worst_rel = max(worst_rel, rel)

    fixed = np.random.default_rng(42).uniform(size=(5, 4))
    p, q = uniform_marginals(5, 4)
    lp_obj = float((exact_ot_oracle(fixed, p, q) * fixed).sum())
    gaps = [
        float((sinkhorn(fixed, epsilon=eps, tol=1e-12, max_iter=100_000).gamma * fixed).sum())
        - lp_obj
        for eps in (0.1, 0.01, 0.001)
    ]
    ok = worst_rel < 0.01 and gaps[0] > gaps[1] > gaps[2]
    verdict(
        2, ok,
        f"worst relative gap {worst_rel:.2e}; ladder gaps "
        + " > ".join(f"{g:.2e}" for g in gaps),
    )


def test_criterion_03_planted_alignment_recovery(recovery_corpus):
    corpus, aligned, elapsed = recovery_corpus
    truth = {(t.ticker, t.trading_day): set(t.pairs) for t in corpus.truth}
    tp = fp = fn = 0
    for key, (_, res) in aligned.items():
        found = set(res.aligned_pairs)
        true = truth[key]
        tp += len(found & true)
        fp += len(found - true)
        fn += len(true - found)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    ok = precision >= 0.95 and recall >= 0.80 and elapsed < 60.0
    verdict(3, ok, f"precision {precision:.4f}, recall {recall:.4f}, {elapsed:.1f}s")


def test_criterion_04_similarity_ordering(recovery_corpus):
    corpus, aligned, _ = recovery_corpus
    aggs = [
        aggregate_embeddings(pair, split_aligned_sets(res.alignment.mask), *key)
        for key, (pair, res) in aligned.items()
    ]
    table = similarity_table(aggs).set_index("alignment")
    a = table.loc["Aligned", "mean"]
    f = table.loc["Full", "mean"]
    u = table.loc["Unaligned", "mean"]
    ok = (a - f) >= 0.05 and (f - u) >= 0.05
    verdict(4, ok, f"aligned {a:.3f} > full {f:.3f} > unaligned {u:.3f}")


def test_criterion_05_ridge_correctness():
    rng = np.random.default_rng(0)
    worst_resid = worst_grad = 0.0
    for _ in range(50):
        n, d = int(rng.integers(10, 120)), int(rng.integers(2, 20))
        x = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        lam = float(rng.uniform(0.5, 200))
        w = fit_ridge(x, y, lam)
        rhs = x.T @ y
        resid = np.abs((x.T @ x + lam * np.eye(d)) @ w - rhs).max()
        worst_resid = max(worst_resid, resid / (1.0 + np.abs(rhs).max()))

        def objective(wv):
            return float(np.sum((x @ wv - y) ** 2) + lam * np.sum(wv**2))

        h = 1e-6
        for idx in rng.choice(d, size=min(10, d), replace=False):
            e = np.zeros(d)
            e[idx] = h
            grad = (objective(w + e) - objective(w - e)) / (2 * h)
            worst_grad = max(worst_grad, abs(grad))
    ok = worst_resid <= 1e-8 and worst_grad <= 1e-4
    verdict(5, ok, f"worst residual {worst_resid:.2e}, worst gradient {worst_grad:.2e}")


def test_criterion_06_no_look_ahead(signal_chain):
    corpus, aggs, scores, models = signal_chain
    ret_days = {(r.ticker, r.trading_day) for r in corpus.returns}
    model_by_cell = {(m.train_window[1] + 1, m.language, m.kind): m for m in models}
    violations = 0
    for m in models:
        train_days = [
            a.trading_day
            for a in aggs
            if m.train_window[0] <= a.trading_day.year <= m.train_window[1]
            and a.get(m.language, m.kind).present
            and (a.ticker, a.trading_day) in ret_days
        ]
        score_days = [
            s.trading_day
            for s in scores
            if (s.trading_day.year, s.language, s.kind)
            == (m.train_window[1] + 1, m.language, m.kind)
        ]
        if train_days and score_days and max(train_days) >= min(score_days):
            violations += 1
    for s in scores:
        model = model_by_cell[(s.trading_day.year, s.language, s.kind)]
        if model.train_window[1] >= s.trading_day.year:
            violations += 1
    ok = violations == 0 and len(scores) > 0
    verdict(6, ok, f"{len(scores)} scores, {len(models)} models, {violations} violations")


def test_criterion_07_backtest_signal_ordering(signal_chain):
    corpus, _, scores, _ = signal_chain
    table = summary_table(
        form_portfolios(scores, corpus.returns, n_quantiles=5, min_stocks=20)
    )
    again = summary_table(
        form_portfolios(scores, corpus.returns, n_quantiles=5, min_stocks=20)
    )
    deterministic = table.equals(again)
    pooled = table.groupby("alignment")["ann_sharpe"].mean()
    aligned, full, unaligned = pooled["Aligned"], pooled["Full"], pooled["Unaligned"]
    per_lang_ok = all(
        (
            table.set_index(["alignment", "language"]).loc[("Aligned", lang), "ann_sharpe"]
            > table.set_index(["alignment", "language"]).loc[("Full", lang), "ann_sharpe"]
            > table.set_index(["alignment", "language"]).loc[("Unaligned", lang), "ann_sharpe"]
        )
        for lang in ("E", "F")
    )
    ok = deterministic and per_lang_ok and aligned > full > unaligned and aligned > 1.0
    verdict(
        7, ok,
        f"ann. Sharpe aligned {aligned:.2f} > full {full:.2f} > unaligned {unaligned:.2f}",
    )


def test_criterion_08_stats_arithmetic():
    series = [0.01, -0.01, 0.02]
    st = strategy_stats(series)
    # independent hand computation, spelled out step by step
    geo = (1.01 * 0.99 * 1.02) ** (1.0 / 3.0) - 1.0
    mean = (0.01 - 0.01 + 0.02) / 3.0
    var = ((0.01 - mean) ** 2 + (-0.01 - mean) ** 2 + (0.02 - mean) ** 2) / 2.0
    std = math.sqrt(var)
    # linear interpolation on sorted [-0.01, 0.01, 0.02]
    p5 = -0.01 + 0.1 * (0.01 - -0.01)  # index 0.05 * 2 = 0.1
    p50 = 0.01
    p95 = 0.01 + 0.9 * (0.02 - 0.01)  # index 1.9
    ann = (mean / std) * math.sqrt(252)
    checks = {
        "geo_mean": abs(st.geo_mean - geo),
        "mean": abs(st.mean - mean),
        "std": abs(st.std - std),
        "p5": abs(st.p5 - p5),
        "p50": abs(st.p50 - p50),
        "p95": abs(st.p95 - p95),
        "ann_sharpe": abs(st.sharpe_annual - ann),
    }
    worst = max(checks.values())
    ok = worst <= 1e-12
    verdict(8, ok, f"worst deviation from hand-computed values {worst:.2e}")


def test_criterion_09_sparsity_comparison():
    cfg = SynthConfig(
        seed=2, stocks=4, first_year=2020, last_year=2020, days_per_year=25,
        sentences_min=20, sentences_max=40, parallel_fraction=0.5, noise_sigma=0.1,
    )
    corpus = generate_corpus(cfg)
    grouped = group_records(corpus.records)
    assert len(grouped) == 100
    bounded = strictly_smaller = 0
    for key in sorted(grouped):
        pair = stack_bundle(list(grouped[key]))
        res = align_pair(pair)
        n, m = pair.x_e.shape[0], pair.x_f.shape[0]
        nnz_mask = int(res.alignment.mask.sum())
        soft = baseline_normalize(res.cost.raw_similarity, "softmax")
        soft_count = int(global_top_fraction(soft, 0.05).sum())
        bounded += nnz_mask <= min(n, m)
        strictly_smaller += nnz_mask < soft_count
    ok = bounded == 100 and strictly_smaller >= 95
    verdict(
        9, ok,
        f"mask within min(n,m) on {bounded}/100, smaller than softmax top-5% on "
        f"{strictly_smaller}/100",
    )


def test_criterion_10_pipeline_determinism(tmp_path):
    def build(name, workers):
        out = tmp_path / name
        return config_from_dict(
            {
                "paths": {
                    "output_dir": str(out),
                    "embeddings": str(out / "sentences.jsonl"),
                    "returns": str(out / "returns.csv"),
                    "articles": str(out / "articles.jsonl"),
                    "calendar": str(out / "calendar.yaml"),
                },
                "synth": {
                    "seed": 5, "stocks": 8, "first_year": 2012, "last_year": 2015,
                    "days_per_year": 6, "sentences_min": 3, "sentences_max": 6,
                },
                "scoring": {
                    "first_train_year": 2012, "eval_start": 2014, "eval_end": 2015,
                    "window_years": 2, "min_train_rows": 60,
                },
                "backtest": {"min_stocks": 6},
                "dim": 24,
                "workers": workers,
            }
        )

    cfg1, cfg8 = build("w1", 1), build("w8", 8)
    write_synth_corpus(cfg1)
    write_synth_corpus(cfg8)
    m1 = run(cfg1)
    m8 = run(cfg8)
    ok = m1["stages"] == m8["stages"] and set(m1["stages"]) == {
        "preprocess", "align", "aggregate", "score", "backtest", "report"
    }
    verdict(10, ok, "manifests identical across 1 and 8 workers, 6 stages each")
