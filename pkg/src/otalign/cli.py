"""Command-line entry point.

Subcommands mirror the pipeline stages plus ``run`` (any subset via
``--stages``), ``synth`` (generate the synthetic corpus), and ``validate``
(check a config and echo the normalized values). Exit codes: 0 success,
2 config error, 3 missing stage dependency, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .config import validate_config
from .errors import ConfigError, NumericalError, StageDependencyError
from .pipeline import STAGES, run, write_synth_corpus

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otalign",
        description="Cross-lingual news alignment, return scoring, and backtests",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run pipeline stages")
    run_p.add_argument("--config", required=True)
    run_p.add_argument(
        "--stages",
        default=",".join(STAGES),
        help=f"comma-separated subset of: {','.join(STAGES)}",
    )
    run_p.add_argument("--force", action="store_true", help="rerun even if up to date")

    for stage in STAGES:
        stage_p = sub.add_parser(stage, help=f"run only the {stage} stage")
        stage_p.add_argument("--config", required=True)
        stage_p.add_argument("--force", action="store_true")

    synth_p = sub.add_parser("synth", help="generate the synthetic corpus")
    synth_p.add_argument("--config", required=True)

    val_p = sub.add_parser("validate", help="validate a config file")
    val_p.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = validate_config(args.config)
        if args.command == "validate":
            print(json.dumps(dataclasses.asdict(cfg), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "synth":
            paths = write_synth_corpus(cfg)
            for name, path in sorted(paths.items()):
                print(f"{name}: {path}")
            return EXIT_OK
        if args.command == "run":
            stages = tuple(s.strip() for s in args.stages.split(",") if s.strip())
            bad = set(stages) - set(STAGES)
            if bad:
                raise ConfigError([f"stages: unknown stage(s) {sorted(bad)}"])
        else:
            stages = (args.command,)
        manifest = run(cfg, stages=stages, force=args.force)
        done = sorted(set(stages) & set(manifest.get("stages", {})))
        print(f"completed stages: {', '.join(done)}")
        return EXIT_OK
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except StageDependencyError as exc:
        logger.error("dependency error: %s", exc)
        return EXIT_DEPENDENCY
    except NumericalError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
