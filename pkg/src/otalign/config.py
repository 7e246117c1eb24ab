"""Pipeline configuration: YAML in, validated dataclasses out.

Validation collects every problem before raising, reports field paths, fills
paper-sourced defaults (similarity gate 0.6, top fraction 0.05, lambda grid
10..100, six training years, quintiles, 20-stock minimum, 252-day
annualization), and warns on unknown keys instead of failing.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields

import yaml

from .errors import ConfigError
from .ot_core import AlignmentParams

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(float(x) for x in range(10, 101, 10))


@dataclass(frozen=True)
class PathsConfig:
    output_dir: str = "out"
    articles: str | None = None
    calendar: str | None = None
    embeddings: str | None = None
    returns: str | None = None


@dataclass(frozen=True)
class ScoringConfig:
    grid: tuple[float, ...] = DEFAULT_GRID
    folds: int = 5
    window_years: int = 6
    first_train_year: int = 2012
    eval_start: int = 2018
    eval_end: int = 2024
    min_train_rows: int = 100


@dataclass(frozen=True)
class BacktestConfig:
    n_quantiles: int = 5
    min_stocks: int = 20
    annualization_days: int = 252


@dataclass(frozen=True)
class SynthSection:
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


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    alignment: AlignmentParams = field(default_factory=AlignmentParams)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    synth: SynthSection = field(default_factory=SynthSection)
    dim: int = 768
    workers: int = 0  # 0 = all available cores
    min_ticker_score: int = 75
    boilerplate_patterns: tuple[str, ...] = ()
    english_language: str = "en"
    foreign_language: str | None = None
    debug_dump: bool = False

    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


_SECTIONS = {
    "paths": PathsConfig,
    "alignment": AlignmentParams,
    "scoring": ScoringConfig,
    "backtest": BacktestConfig,
    "synth": SynthSection,
}

_LIST_FIELDS = {"grid", "boilerplate_patterns"}


def _build_section(cls, data: dict, prefix: str, problems: list[str]):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            logger.warning("unknown config key %s.%s ignored", prefix, key)
            continue
        if key in _LIST_FIELDS and value is not None:
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"{prefix}: {exc}")
        return cls()


def config_from_dict(data: dict, base_dir: str | None = None) -> PipelineConfig:
    """Normalize a parsed config mapping; raises ConfigError listing every
    violation at once."""
    problems: list[str] = []
    data = dict(data or {})
    sections = {}
    for name, cls in _SECTIONS.items():
        raw = data.pop(name, {}) or {}
        if not isinstance(raw, dict):
            problems.append(f"{name}: expected a mapping")
            raw = {}
        sections[name] = _build_section(cls, raw, name, problems)

    top = {}
    known_top = {f.name for f in fields(PipelineConfig)} - set(_SECTIONS)
    for key, value in data.items():
        if key not in known_top:
            logger.warning("unknown config key %s ignored", key)
            continue
        if key == "boilerplate_patterns" and value is not None:
            value = tuple(value)
        top[key] = value

    cfg = PipelineConfig(**sections, **top)
    cfg = _resolve_paths(cfg, base_dir)
    problems.extend(_validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def _resolve_paths(cfg: PipelineConfig, base_dir: str | None) -> PipelineConfig:
    if base_dir is None:
        return cfg
    resolved = {}
    for f in fields(PathsConfig):
        value = getattr(cfg.paths, f.name)
        if value is not None and not os.path.isabs(value):
            value = os.path.normpath(os.path.join(base_dir, value))
        resolved[f.name] = value
    return PipelineConfig(
        **{
            **{s: getattr(cfg, s) for s in _SECTIONS if s != "paths"},
            "paths": PathsConfig(**resolved),
            **{
                f.name: getattr(cfg, f.name)
                for f in fields(PipelineConfig)
                if f.name not in _SECTIONS
            },
        }
    )


def _validate(cfg: PipelineConfig) -> list[str]:
    problems = []
    al = cfg.alignment
    if al.epsilon <= 0:
        problems.append(f"alignment.epsilon: must be positive, got {al.epsilon}")
    if al.tol <= 0:
        problems.append(f"alignment.tol: must be positive, got {al.tol}")
    if al.max_iter < 1:
        problems.append(f"alignment.max_iter: must be >= 1, got {al.max_iter}")
    if not 0 < al.top_frac <= 1:
        problems.append(f"alignment.top_frac: must be in (0, 1], got {al.top_frac}")
    if not -1 <= al.xi_thres <= 1:
        problems.append(f"alignment.xi_thres: must be in [-1, 1], got {al.xi_thres}")

    sc = cfg.scoring
    if not sc.grid:
        problems.append("scoring.grid: must be non-empty")
    elif any(lam <= 0 for lam in sc.grid):
        problems.append("scoring.grid: lambda values must be positive (0 excluded)")
    if sc.folds < 2:
        problems.append(f"scoring.folds: must be >= 2, got {sc.folds}")
    if sc.window_years < 1:
        problems.append(f"scoring.window_years: must be >= 1, got {sc.window_years}")
    if sc.eval_end < sc.eval_start:
        problems.append("scoring.eval_end: precedes scoring.eval_start")
    if sc.min_train_rows < 1:
        problems.append("scoring.min_train_rows: must be >= 1")

    bt = cfg.backtest
    if bt.n_quantiles < 2:
        problems.append(f"backtest.n_quantiles: must be >= 2, got {bt.n_quantiles}")
    if bt.min_stocks < bt.n_quantiles:
        problems.append("backtest.min_stocks: must be >= backtest.n_quantiles")
    if bt.annualization_days < 1:
        problems.append("backtest.annualization_days: must be >= 1")

    if cfg.dim < 1:
        problems.append(f"dim: must be >= 1, got {cfg.dim}")
    if cfg.workers < 0:
        problems.append(f"workers: must be >= 0, got {cfg.workers}")
    if not 0 <= cfg.min_ticker_score <= 100:
        problems.append(f"min_ticker_score: must be in [0, 100], got {cfg.min_ticker_score}")
    return problems


def validate_config(path) -> PipelineConfig:
    """Load, default-fill, and validate a YAML config file."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))
