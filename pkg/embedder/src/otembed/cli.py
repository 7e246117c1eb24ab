"""CLI: bundle JSONL in, validated SentenceRecord JSONL out."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .encode import (
    DEFAULT_DIM,
    DEFAULT_MODEL,
    EmbedderConfig,
    HashEncoder,
    SentenceTransformerEncoder,
    embed_bundles_file,
)
from .sentencize import LanguageError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otembed",
        description="Sentencize stock-day bundles and emit sentence embeddings",
    )
    parser.add_argument("--input", required=True, help="StockDayBundle JSONL")
    parser.add_argument("--output", required=True, help="SentenceRecord JSONL")
    parser.add_argument(
        "--encoder",
        choices=("model", "hash"),
        default="model",
        help="'model': the pinned sentence-transformer; 'hash': offline deterministic",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default=None)
    parser.add_argument("--dim", type=int, default=DEFAULT_DIM)
    parser.add_argument("--english-language", default="en")
    parser.add_argument("--foreign-language", default="ja")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    cfg = EmbedderConfig(
        model=args.model,
        batch_size=args.batch_size,
        device=args.device,
        dim=args.dim,
        english_language=args.english_language,
        foreign_language=args.foreign_language,
    )
    try:
        if args.encoder == "hash":
            encoder = HashEncoder(dim=args.dim)
        else:
            encoder = SentenceTransformerEncoder(
                args.model, device=args.device, batch_size=args.batch_size
            )
            if encoder.dim != args.dim:
                logger.error(
                    "model emits dim %d but config expects %d", encoder.dim, args.dim
                )
                return 2
        counts = embed_bundles_file(args.input, args.output, encoder, cfg)
    except LanguageError as exc:
        logger.error("%s", exc)
        return 2
    except EnvironmentError as exc:
        logger.error("%s", exc)
        return 3
    print(json.dumps(counts, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
