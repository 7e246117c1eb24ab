"""Sentence encoders and the bundle-to-record conversion.

The default encoder is the multilingual sentence-transformer the pipeline's
0.6 similarity gate was tuned for; the model identifier is pinned in config
and recorded in output manifests because that threshold is encoder-dependent.
A deterministic hashing encoder is provided for offline runs and contract
tests; it gives no cross-lingual semantics, only a valid, reproducible
embedding geometry.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .sentencize import sentencize

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "sentence-transformers/LaBSE"
DEFAULT_DIM = 768


@dataclass(frozen=True)
class EmbedderConfig:
    model: str = DEFAULT_MODEL
    batch_size: int = 32
    device: str | None = None
    dim: int = DEFAULT_DIM
    language_map: dict[str, str] = field(
        default_factory=lambda: {"en": "english", "ja": "japanese", "jp": "japanese"}
    )
    english_language: str = "en"
    foreign_language: str = "ja"


class HashEncoder:
    """Deterministic character-trigram feature hashing onto the unit sphere."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        self.truncated = 0

    def encode(self, sentences: list[str]) -> np.ndarray:
        out = np.zeros((len(sentences), self.dim))
        for row, sentence in enumerate(sentences):
            padded = f" {sentence.lower()} "
            for i in range(len(padded) - 2):
                digest = hashlib.blake2b(
                    padded[i : i + 3].encode("utf-8"), digest_size=8
                ).digest()
                value = int.from_bytes(digest, "little")
                idx = value % self.dim
                sign = 1.0 if (value >> 63) & 1 else -1.0
                out[row, idx] += sign
            norm = np.linalg.norm(out[row])
            if norm == 0.0:
                out[row, 0] = 1.0
            else:
                out[row] /= norm
        return out


class SentenceTransformerEncoder:
    """Batch inference with a pinned sentence-transformers model."""

    def __init__(self, model_id: str = DEFAULT_MODEL, device: str | None = None,
                 batch_size: int = 32):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EnvironmentError(
                "sentence-transformers is not installed; install the [model] extra"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id, device=device)
        except Exception as exc:
            raise EnvironmentError(f"failed to load model {model_id!r}: {exc}") from exc
        self.model_id = model_id
        self.batch_size = batch_size
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.truncated = 0

    def encode(self, sentences: list[str]) -> np.ndarray:
        limit = getattr(self._model, "max_seq_length", None)
        if limit:
            for s in sentences:
                ids = self._model.tokenizer(s, truncation=False)["input_ids"]
                if len(ids) > limit:
                    self.truncated += 1
        try:
            vectors = self._model.encode(
                sentences,
                batch_size=self.batch_size,
                normalize_embeddings=True,
                show_progress_bar=False,
            )
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                raise EnvironmentError(
                    f"encoder ran out of memory at batch_size={self.batch_size}; "
                    "retry with a smaller --batch-size"
                ) from exc
            raise
        vectors = np.asarray(vectors, dtype=np.float64)
        return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def encode_embedding_b64(v: np.ndarray) -> str:
    return base64.b64encode(np.asarray(v, dtype="<f4").tobytes()).decode("ascii")


def read_bundles(path) -> list[dict]:
    """StockDayBundle JSONL: ticker, trading_day, english_text, foreign_text."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            for key in ("ticker", "trading_day", "english_text", "foreign_text"):
                if key not in rec:
                    raise ValueError(f"{path}:{lineno}: missing field {key!r}")
            date.fromisoformat(rec["trading_day"])
            out.append(rec)
    return out


def embed_bundle(bundle: dict, encoder, cfg: EmbedderConfig) -> list[dict]:
    """SentenceRecord dicts for one bundle, index-ordered per language."""
    records = []
    sides = (
        ("E", cfg.english_language, bundle["english_text"]),
        ("F", cfg.foreign_language, bundle["foreign_text"]),
    )
    for label, language, text in sides:
        sentences = sentencize(text, language, cfg.language_map)
        if not sentences:
            continue
        vectors = encoder.encode(sentences)
        for idx, (sentence, vec) in enumerate(zip(sentences, vectors)):
            records.append(
                {
                    "ticker": bundle["ticker"],
                    "trading_day": bundle["trading_day"],
                    "language": label,
                    "sentence_index": idx,
                    "text": sentence,
                    "embedding_b64": encode_embedding_b64(vec),
                }
            )
    return records


def embed_bundles_file(in_path, out_path, encoder, cfg: EmbedderConfig) -> dict:
    """Convert a bundle file; returns counts for the run manifest."""
    bundles = read_bundles(in_path)
    n_records = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for bundle in bundles:
            for rec in embed_bundle(bundle, encoder, cfg):
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
                n_records += 1
    counts = {
        "bundles": len(bundles),
        "records": n_records,
        "truncated_sentences": getattr(encoder, "truncated", 0),
        "model": getattr(encoder, "model_id", type(encoder).__name__),
        "dim": encoder.dim,
    }
    if counts["truncated_sentences"]:
        logger.warning(
            "%d sentences exceeded the encoder token limit and were truncated",
            counts["truncated_sentences"],
        )
    return counts
