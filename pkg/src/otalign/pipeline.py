"""Resumable batch pipeline over plain-file artifacts.

Each stage reads its upstream files, writes its artifacts into the output
directory, and records input hashes, parameter hash, and output hashes in
``manifest.json``. A stage whose recorded hashes still match is skipped
unless forced, so reruns are no-ops and deleted artifacts are reproduced
bit-identically. All parallel work is per stock-day with results gathered
and sorted before writing, so worker count never changes any output byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from datetime import date

from . import __version__
from . import aggregate as agg_mod
from . import backtest as bt_mod
from . import report as report_mod
from .config import PipelineConfig
from .corpus import (
    CleaningRules,
    bundle_stock_days,
    load_calendar,
    read_raw_articles,
    write_bundles,
)
from .embed_io import group_records, read_sentence_records, stack_bundle
from .errors import StageDependencyError
from .ot_core import align_pair
from .report import AlignmentSummary
from .scoring import read_returns_csv, read_scores, rolling_scores, write_scores
from .synth import SynthConfig, generate_corpus, write_returns_csv, write_truth

logger = logging.getLogger(__name__)

STAGES = ("preprocess", "align", "aggregate", "score", "backtest", "report")

MANIFEST_NAME = "manifest.json"


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _params_hash(params: dict) -> str:
    return hashlib.sha256(json.dumps(params, sort_keys=True).encode()).hexdigest()


class Manifest:
    """Per-stage input/param/output hashes; output paths kept relative to the
    artifact directory so manifests from different runs compare bytewise."""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.path = os.path.join(output_dir, MANIFEST_NAME)
        self.data: dict = {"code_version": __version__, "stages": {}}
        if os.path.exists(self.path):
            with open(self.path) as fh:
                self.data = json.load(fh)

    def stage_is_current(self, stage: str, inputs: dict, params_hash: str) -> bool:
        entry = self.data.get("stages", {}).get(stage)
        if not entry:
            return False
        if entry.get("inputs") != inputs or entry.get("params_hash") != params_hash:
            return False
        for rel, digest in entry.get("outputs", {}).items():
            path = os.path.join(self.output_dir, rel)
            if not os.path.exists(path) or _sha256(path) != digest:
                return False
        return True

    def record(self, stage: str, inputs: dict, params_hash: str, outputs: list[str]):
        self.data.setdefault("stages", {})[stage] = {
            "inputs": inputs,
            "params_hash": params_hash,
            "outputs": {
                os.path.relpath(p, self.output_dir): _sha256(p) for p in sorted(outputs)
            },
        }
        self.data["code_version"] = __version__
        with open(self.path, "w") as fh:
            json.dump(self.data, fh, sort_keys=True, indent=2)
            fh.write("\n")


def _require(path: str | None, stage: str, what: str) -> str:
    if not path or not os.path.exists(path):
        raise StageDependencyError(f"stage {stage!r} needs {what}: {path!r} not found")
    return path


def _day_key(ticker: str, day: date) -> str:
    return f"{ticker}|{day.isoformat()}"


# -- align worker: top-level so it pickles for process pools ----------------


def _align_task(args):
    key, x_e, x_f, texts_e, texts_f, params, debug = args
    from .embed_io import EmbeddingMatrixPair

    result = align_pair(EmbeddingMatrixPair(x_e=x_e, x_f=x_f), params)
    xi = result.cost.raw_similarity
    gamma = result.plan.gamma
    record = {
        "ticker": key[0],
        "trading_day": key[1].isoformat(),
        "n": int(x_e.shape[0]),
        "m": int(x_f.shape[0]),
        "pairs": [
            [int(i), int(j), float(xi[i, j]), float(gamma[i, j])]
            for i, j in result.aligned_pairs
        ],
        "converged": bool(result.plan.converged),
        "iterations": int(result.plan.iterations),
        "params": {
            "epsilon": params.epsilon,
            "tol": params.tol,
            "max_iter": params.max_iter,
            "top_frac": params.top_frac,
            "xi_thres": params.xi_thres,
        },
    }
    heatmap = (
        report_mod.heatmap_payload(xi, gamma, texts_e, texts_f) if debug else None
    )
    return _day_key(*key), record, heatmap


def run_align_tasks(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) < 2:
        results = [_align_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_align_task, tasks, chunksize=16))
    results.sort(key=lambda r: r[0])
    return results


# -- stages ------------------------------------------------------------------


def stage_preprocess(cfg: PipelineConfig, out_dir: str) -> tuple[dict, list[str]]:
    articles_path = _require(cfg.paths.articles, "preprocess", "raw articles JSONL")
    calendar_path = _require(cfg.paths.calendar, "preprocess", "calendar config")
    articles = read_raw_articles(articles_path)
    cal = load_calendar(calendar_path)
    rules = CleaningRules(boilerplate_patterns=cfg.boilerplate_patterns)
    bundles = bundle_stock_days(
        articles,
        cal,
        min_ticker_score=cfg.min_ticker_score,
        rules=rules,
        english_language=cfg.english_language,
        foreign_language=cfg.foreign_language,
    )
    out = os.path.join(out_dir, "bundles.jsonl")
    write_bundles(bundles, out)
    logger.info("preprocess: %d articles -> %d bundles", len(articles), len(bundles))
    return {"articles": _sha256(articles_path), "calendar": _sha256(calendar_path)}, [out]


def stage_align(cfg: PipelineConfig, out_dir: str) -> tuple[dict, list[str]]:
    emb_path = _require(cfg.paths.embeddings, "align", "sentence embeddings JSONL")
    records = read_sentence_records(emb_path, expected_dim=cfg.dim)
    grouped = group_records(records)
    params = cfg.alignment
    tasks = []
    for key in sorted(grouped):
        recs = sorted(grouped[key], key=lambda r: (r.language, r.sentence_index))
        pair = stack_bundle(list(recs))
        texts_e = [r.text for r in recs if r.language == "E"]
        texts_f = [r.text for r in recs if r.language == "F"]
        tasks.append((key, pair.x_e, pair.x_f, texts_e, texts_f, params, cfg.debug_dump))

    results = run_align_tasks(tasks, cfg.effective_workers())

    out = os.path.join(out_dir, "alignments.jsonl")
    outputs = [out]
    heatmap_dir = os.path.join(out_dir, "heatmaps")
    with open(out, "w", encoding="utf-8") as fh:
        for key, record, heatmap in results:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            if heatmap is not None:
                os.makedirs(heatmap_dir, exist_ok=True)
                hpath = os.path.join(heatmap_dir, key.replace("|", "_") + ".json")
                with open(hpath, "w", encoding="utf-8") as hfh:
                    json.dump(heatmap, hfh, sort_keys=True)
                outputs.append(hpath)
    n_converged = sum(1 for _, r, _ in results if r["converged"])
    logger.info("align: %d stock-days, %d converged", len(results), n_converged)
    return {"embeddings": _sha256(emb_path)}, outputs


def read_alignment_records(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def stage_aggregate(cfg: PipelineConfig, out_dir: str) -> tuple[dict, list[str]]:
    emb_path = _require(cfg.paths.embeddings, "aggregate", "sentence embeddings JSONL")
    align_path = _require(
        os.path.join(out_dir, "alignments.jsonl"), "aggregate", "alignment records"
    )
    records = read_sentence_records(emb_path, expected_dim=cfg.dim)
    grouped = group_records(records)
    alignments = {
        (r["ticker"], date.fromisoformat(r["trading_day"])): r
        for r in read_alignment_records(align_path)
    }
    aggs = []
    for key in sorted(grouped):
        rec = alignments.get(key)
        if rec is None:
            raise StageDependencyError(f"no alignment record for stock-day {key}")
        pair = stack_bundle(list(grouped[key]))
        aligned_e = {int(p[0]) for p in rec["pairs"]}
        aligned_f = {int(p[1]) for p in rec["pairs"]}
        aggs.append(
            agg_mod.aggregate_embeddings(pair, (aligned_e, aligned_f), key[0], key[1])
        )
    out = os.path.join(out_dir, "aggregates.jsonl")
    agg_mod.write_aggregates(aggs, out, provenance=_params_hash(_stage_params(cfg, "align")))
    logger.info("aggregate: %d stock-days", len(aggs))
    return {
        "embeddings": _sha256(emb_path),
        "alignments": _sha256(align_path),
    }, [out]


def stage_score(cfg: PipelineConfig, out_dir: str) -> tuple[dict, list[str]]:
    agg_path = _require(os.path.join(out_dir, "aggregates.jsonl"), "score", "aggregates")
    ret_path = _require(cfg.paths.returns, "score", "returns CSV")
    aggs = agg_mod.read_aggregates(agg_path)
    returns = read_returns_csv(ret_path)
    sc = cfg.scoring
    scores, models = rolling_scores(
        aggs,
        returns,
        first_train_year=sc.first_train_year,
        last_year=sc.eval_end,
        window_years=sc.window_years,
        grid=sc.grid,
        folds=sc.folds,
        min_train_rows=sc.min_train_rows,
    )
    scores = [s for s in scores if sc.eval_start <= s.trading_day.year <= sc.eval_end]
    out = os.path.join(out_dir, "scores.csv")
    write_scores(scores, out)
    logger.info("score: %d records from %d models", len(scores), len(models))
    return {"aggregates": _sha256(agg_path), "returns": _sha256(ret_path)}, [out]


def stage_backtest(cfg: PipelineConfig, out_dir: str) -> tuple[dict, list[str]]:
    scores_path = _require(os.path.join(out_dir, "scores.csv"), "backtest", "scores")
    ret_path = _require(cfg.paths.returns, "backtest", "returns CSV")
    scores = read_scores(scores_path)
    returns = read_returns_csv(ret_path)
    bt = cfg.backtest
    portfolios = bt_mod.form_portfolios(
        scores, returns, n_quantiles=bt.n_quantiles, min_stocks=bt.min_stocks
    )
    ls_out = os.path.join(out_dir, "ls_daily.csv")
    bt_mod.ls_frame(portfolios).to_csv(ls_out, index=False)
    summary_out = os.path.join(out_dir, "strategy_summary.csv")
    bt_mod.summary_table(portfolios, bt.annualization_days).to_csv(summary_out, index=False)
    logger.info("backtest: %d daily portfolios", len(portfolios))
    return {
        "scores": _sha256(scores_path),
        "returns": _sha256(ret_path),
    }, [ls_out, summary_out]


def stage_report(cfg: PipelineConfig, out_dir: str) -> tuple[dict, list[str]]:
    agg_path = _require(os.path.join(out_dir, "aggregates.jsonl"), "report", "aggregates")
    align_path = _require(os.path.join(out_dir, "alignments.jsonl"), "report", "alignments")
    scores_path = _require(os.path.join(out_dir, "scores.csv"), "report", "scores")
    ret_path = _require(cfg.paths.returns, "report", "returns CSV")

    aggs = agg_mod.read_aggregates(agg_path)
    sim_out = os.path.join(out_dir, "similarity_table.csv")
    report_mod.similarity_table(aggs).to_csv(sim_out, index=False)

    scores = read_scores(scores_path)
    returns = read_returns_csv(ret_path)
    corr_out = os.path.join(out_dir, "score_correlations.csv")
    report_mod.correlation_matrix(scores, returns).to_csv(corr_out)

    summaries = []
    for rec in read_alignment_records(align_path):
        pairs = rec["pairs"]
        summaries.append(
            AlignmentSummary(
                ticker=rec["ticker"],
                trading_day=date.fromisoformat(rec["trading_day"]),
                n_english=rec["n"],
                n_foreign=rec["m"],
                aligned_english=len({p[0] for p in pairs}),
                aligned_foreign=len({p[1] for p in pairs}),
                aligned_pairs=len(pairs),
            )
        )
    coverage = report_mod.coverage_series(summaries)
    prop_out = os.path.join(out_dir, "coverage_proportions.csv")
    counts_out = os.path.join(out_dir, "coverage_day_counts.csv")
    coverage.proportions.to_csv(prop_out, index=False)
    coverage.day_counts.to_csv(counts_out, index=False)

    return {
        "aggregates": _sha256(agg_path),
        "alignments": _sha256(align_path),
        "scores": _sha256(scores_path),
        "returns": _sha256(ret_path),
    }, [sim_out, corr_out, prop_out, counts_out]


_STAGE_FUNCS = {
    "preprocess": stage_preprocess,
    "align": stage_align,
    "aggregate": stage_aggregate,
    "score": stage_score,
    "backtest": stage_backtest,
    "report": stage_report,
}


def _stage_params(cfg: PipelineConfig, stage: str) -> dict:
    common = {"dim": cfg.dim, "code_version": __version__}
    if stage == "preprocess":
        return {
            **common,
            "min_ticker_score": cfg.min_ticker_score,
            "boilerplate_patterns": list(cfg.boilerplate_patterns),
            "english_language": cfg.english_language,
            "foreign_language": cfg.foreign_language,
        }
    if stage == "align":
        al = cfg.alignment
        return {
            **common,
            "epsilon": al.epsilon,
            "tol": al.tol,
            "max_iter": al.max_iter,
            "top_frac": al.top_frac,
            "xi_thres": al.xi_thres,
            "debug_dump": cfg.debug_dump,
        }
    if stage == "aggregate":
        return common
    if stage == "score":
        sc = cfg.scoring
        return {
            **common,
            "grid": list(sc.grid),
            "folds": sc.folds,
            "window_years": sc.window_years,
            "first_train_year": sc.first_train_year,
            "eval_start": sc.eval_start,
            "eval_end": sc.eval_end,
            "min_train_rows": sc.min_train_rows,
        }
    if stage == "backtest":
        bt = cfg.backtest
        return {
            **common,
            "n_quantiles": bt.n_quantiles,
            "min_stocks": bt.min_stocks,
            "annualization_days": bt.annualization_days,
        }
    return common


def run(cfg: PipelineConfig, stages=STAGES, force: bool = False) -> dict:
    """Run the requested stages in canonical order; returns the manifest.

    A stage with unchanged inputs, parameters, and intact outputs is skipped
    unless ``force``.
    """
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages: {sorted(unknown)}")
    out_dir = cfg.paths.output_dir
    os.makedirs(out_dir, exist_ok=True)
    manifest = Manifest(out_dir)
    for stage in STAGES:
        if stage not in stages:
            continue
        params_hash = _params_hash(_stage_params(cfg, stage))
        inputs = _stage_inputs(cfg, out_dir, stage)
        if not force and inputs is not None and manifest.stage_is_current(
            stage, inputs, params_hash
        ):
            logger.info("%s: up to date, skipping", stage)
            continue
        input_hashes, outputs = _STAGE_FUNCS[stage](cfg, out_dir)
        manifest.record(stage, input_hashes, params_hash, outputs)
    return manifest.data


def _stage_inputs(cfg: PipelineConfig, out_dir: str, stage: str) -> dict | None:
    """Current input hashes for the skip check; None if any input is missing."""
    paths = {
        "preprocess": {"articles": cfg.paths.articles, "calendar": cfg.paths.calendar},
        "align": {"embeddings": cfg.paths.embeddings},
        "aggregate": {
            "embeddings": cfg.paths.embeddings,
            "alignments": os.path.join(out_dir, "alignments.jsonl"),
        },
        "score": {
            "aggregates": os.path.join(out_dir, "aggregates.jsonl"),
            "returns": cfg.paths.returns,
        },
        "backtest": {
            "scores": os.path.join(out_dir, "scores.csv"),
            "returns": cfg.paths.returns,
        },
        "report": {
            "aggregates": os.path.join(out_dir, "aggregates.jsonl"),
            "alignments": os.path.join(out_dir, "alignments.jsonl"),
            "scores": os.path.join(out_dir, "scores.csv"),
            "returns": cfg.paths.returns,
        },
    }[stage]
    hashes = {}
    for name, path in paths.items():
        if not path or not os.path.exists(path):
            return None
        hashes[name] = _sha256(path)
    return hashes


# -- synth corpus emission ----------------------------------------------------


def write_synth_corpus(cfg: PipelineConfig) -> dict[str, str]:
    """Generate the synthetic corpus into the configured output directory.

    Emits sentence embeddings, returns, ground-truth masks, plus raw-article
    and calendar files so the preprocess stage has real inputs to chew on.
    """
    from .embed_io import write_sentence_records

    out_dir = cfg.paths.output_dir
    os.makedirs(out_dir, exist_ok=True)
    s = cfg.synth
    synth_cfg = SynthConfig(
        seed=s.seed,
        stocks=s.stocks,
        first_year=s.first_year,
        last_year=s.last_year,
        days_per_year=s.days_per_year,
        sentences_min=s.sentences_min,
        sentences_max=s.sentences_max,
        parallel_fraction=s.parallel_fraction,
        noise_sigma=s.noise_sigma,
        snr=s.snr,
        ret_std=s.ret_std,
        dim=cfg.dim,
    )
    corpus = generate_corpus(synth_cfg)
    paths = {
        "embeddings": os.path.join(out_dir, "sentences.jsonl"),
        "returns": os.path.join(out_dir, "returns.csv"),
        "truth": os.path.join(out_dir, "truth.jsonl"),
        "articles": os.path.join(out_dir, "articles.jsonl"),
        "calendar": os.path.join(out_dir, "calendar.yaml"),
    }
    write_sentence_records(corpus.records, paths["embeddings"])
    write_returns_csv(corpus.returns, paths["returns"])
    write_truth(corpus.truth, paths["truth"])
    _write_synth_articles(corpus, paths["articles"])
    _write_synth_calendar(synth_cfg, paths["calendar"])
    return paths


def _write_synth_articles(corpus, path: str) -> None:
    """Placeholder raw articles, one per language per synthetic stock-day."""
    pad = "Synthetic body text for pipeline exercises. " * 4
    with open(path, "w", encoding="utf-8") as fh:
        for t in corpus.truth:
            for lang, story_suffix in (("en", "e"), ("ja", "f")):
                rec = {
                    "story_id": f"{t.ticker}-{t.trading_day.isoformat()}-{story_suffix}",
                    "publish_time": f"{t.trading_day.isoformat()}T07:00:00+09:00",
                    "language": lang,
                    "ticker": t.ticker,
                    "ticker_score": 90,
                    "body": f"{lang} article about {t.ticker} on {t.trading_day}. {pad}",
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _write_synth_calendar(synth_cfg: SynthConfig, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(
            "exchange: SYNTH\ntimezone: Asia/Tokyo\nmarket_open: '09:00'\n"
            "cutoff_minutes: 30\n"
            f"start: {synth_cfg.first_year - 1}-12-25\n"
            f"end: {synth_cfg.last_year + 1}-01-10\n"
        )
