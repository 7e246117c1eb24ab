import json
import os

import pytest

from otalign.cli import main
from otalign.config import config_from_dict, validate_config
from otalign.errors import ConfigError, StageDependencyError
from otalign.pipeline import run, write_synth_corpus

SMALL_SYNTH = {
    "seed": 11,
    "stocks": 8,
    "first_year": 2012,
    "last_year": 2015,
    "days_per_year": 6,
    "sentences_min": 3,
    "sentences_max": 6,
}


def synth_config(tmp_path, name="out", workers=1, **overrides):
    out = tmp_path / name
    data = {
        "paths": {
            "output_dir": str(out),
            "embeddings": str(out / "sentences.jsonl"),
            "returns": str(out / "returns.csv"),
            "articles": str(out / "articles.jsonl"),
            "calendar": str(out / "calendar.yaml"),
        },
        "synth": dict(SMALL_SYNTH),
        "scoring": {
            "first_train_year": 2012,
            "eval_start": 2014,
            "eval_end": 2015,
            "window_years": 2,
            "min_train_rows": 60,
        },
        "backtest": {"min_stocks": 6},
        "dim": 24,
        "workers": workers,
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    return config_from_dict(data)


class TestConfig:
    def test_empty_config_echoes_paper_defaults(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text("{}\n")
        cfg = validate_config(p)
        assert cfg.alignment.xi_thres == 0.6
        assert cfg.alignment.top_frac == 0.05
        assert cfg.scoring.grid == tuple(float(x) for x in range(10, 101, 10))
        assert cfg.scoring.window_years == 6
        assert cfg.backtest.n_quantiles == 5
        assert cfg.backtest.min_stocks == 20
        assert cfg.backtest.annualization_days == 252
        assert cfg.dim == 768
        assert cfg.min_ticker_score == 75

    def test_zero_lambda_in_grid_rejected(self):
        with pytest.raises(ConfigError, match="scoring.grid"):
            config_from_dict({"scoring": {"grid": [0, 10]}})

    def test_negative_epsilon_names_field(self):
        with pytest.raises(ConfigError, match="alignment.epsilon"):
            config_from_dict({"alignment": {"epsilon": -1}})

    def test_all_errors_reported_at_once(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict(
                {"alignment": {"epsilon": -1, "top_frac": 2.0}, "dim": 0}
            )
        assert len(exc.value.problems) == 3

    def test_unknown_key_warns_but_passes(self, caplog):
        with caplog.at_level("WARNING"):
            cfg = config_from_dict({"alignment": {"flux_capacitor": 1}})
        assert cfg.alignment.epsilon == 0.05
        assert any("flux_capacitor" in r.message for r in caplog.records)

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text("paths:\n  output_dir: artifacts\n")
        cfg = validate_config(p)
        assert cfg.paths.output_dir == str(tmp_path / "artifacts")


class TestPipeline:
    def test_full_run_produces_six_stage_manifest(self, tmp_path):
        cfg = synth_config(tmp_path)
        write_synth_corpus(cfg)
        manifest = run(cfg)
        assert set(manifest["stages"]) == {
            "preprocess", "align", "aggregate", "score", "backtest", "report"
        }
        for stage, entry in manifest["stages"].items():
            for rel in entry["outputs"]:
                assert os.path.exists(os.path.join(cfg.paths.output_dir, rel))

    def test_rerun_is_noop_and_force_reruns(self, tmp_path, caplog):
        cfg = synth_config(tmp_path)
        write_synth_corpus(cfg)
        run(cfg)
        marker = os.path.join(cfg.paths.output_dir, "alignments.jsonl")
        mtime = os.path.getmtime(marker)
        with caplog.at_level("INFO"):
            run(cfg)
        assert os.path.getmtime(marker) == mtime
        assert sum("skipping" in r.message for r in caplog.records) == 6
        run(cfg, force=True)
        assert os.path.exists(marker)

    def test_missing_upstream_artifact_raises(self, tmp_path):
        cfg = synth_config(tmp_path)
        write_synth_corpus(cfg)
        with pytest.raises(StageDependencyError, match="alignment"):
            run(cfg, stages=("aggregate",))

    def test_deleted_artifact_is_reproduced_identically(self, tmp_path):
        cfg = synth_config(tmp_path)
        write_synth_corpus(cfg)
        run(cfg)
        target = os.path.join(cfg.paths.output_dir, "aggregates.jsonl")
        original = open(target, "rb").read()
        os.remove(target)
        run(cfg)
        assert open(target, "rb").read() == original

    def test_worker_count_does_not_change_outputs(self, tmp_path):
        cfg1 = synth_config(tmp_path, name="w1", workers=1)
        cfg2 = synth_config(tmp_path, name="w2", workers=4)
        write_synth_corpus(cfg1)
        write_synth_corpus(cfg2)
        m1 = run(cfg1)
        m2 = run(cfg2)
        assert m1["stages"] == m2["stages"]

    def test_stage_subset_runs_in_canonical_order(self, tmp_path):
        cfg = synth_config(tmp_path)
        write_synth_corpus(cfg)
        manifest = run(cfg, stages=("aggregate", "align"))
        assert set(manifest["stages"]) == {"align", "aggregate"}

    def test_debug_dump_writes_heatmaps(self, tmp_path):
        cfg = synth_config(
            tmp_path,
            synth={**SMALL_SYNTH, "stocks": 2, "last_year": 2012, "days_per_year": 2},
            scoring={"first_train_year": 2012, "eval_start": 2012, "eval_end": 2012,
                     "window_years": 1, "min_train_rows": 1},
            debug_dump=True,
        )
        write_synth_corpus(cfg)
        run(cfg, stages=("align",))
        heatmaps = os.listdir(os.path.join(cfg.paths.output_dir, "heatmaps"))
        assert len(heatmaps) == 4
        payload = json.load(
            open(os.path.join(cfg.paths.output_dir, "heatmaps", heatmaps[0]))
        )
        assert {"xi", "gamma", "softmax", "entmax15"} <= set(payload)


class TestCli:
    def _write_config(self, tmp_path):
        out = tmp_path / "out"
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(
            "paths:\n"
            f"  output_dir: {out}\n"
            f"  embeddings: {out / 'sentences.jsonl'}\n"
            f"  returns: {out / 'returns.csv'}\n"
            f"  articles: {out / 'articles.jsonl'}\n"
            f"  calendar: {out / 'calendar.yaml'}\n"
            "synth: {seed: 3, stocks: 7, first_year: 2012, last_year: 2014,\n"
            "  days_per_year: 5, sentences_min: 3, sentences_max: 5}\n"
            "scoring: {first_train_year: 2012, eval_start: 2014, eval_end: 2014,\n"
            "  window_years: 2, min_train_rows: 50}\n"
            "backtest: {min_stocks: 5}\n"
            "dim: 16\nworkers: 1\n"
        )
        return cfg_path

    def test_synth_then_run_exits_zero(self, tmp_path, capsys):
        cfg_path = self._write_config(tmp_path)
        assert main(["synth", "--config", str(cfg_path)]) == 0
        assert main(["run", "--config", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "completed stages" in out

    def test_single_stage_subcommand(self, tmp_path):
        cfg_path = self._write_config(tmp_path)
        main(["synth", "--config", str(cfg_path)])
        assert main(["align", "--config", str(cfg_path)]) == 0

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("alignment: {epsilon: -5}\n")
        assert main(["run", "--config", str(bad)]) == 2

    def test_unknown_stage_exit_code(self, tmp_path):
        cfg_path = self._write_config(tmp_path)
        assert main(["run", "--config", str(cfg_path), "--stages", "frobnicate"]) == 2

    def test_dependency_error_exit_code(self, tmp_path):
        cfg_path = self._write_config(tmp_path)
        assert main(["run", "--config", str(cfg_path), "--stages", "backtest"]) == 3

    def test_validate_prints_normalized_config(self, tmp_path, capsys):
        cfg_path = self._write_config(tmp_path)
        assert main(["validate", "--config", str(cfg_path)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["alignment"]["xi_thres"] == 0.6
