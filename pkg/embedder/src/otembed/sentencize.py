"""Rule-based sentence segmentation, one segmenter per language.

Deterministic by construction: no model state, no randomness. The language
to segmenter mapping is configuration; unknown languages fail loudly. Like
any rule-based splitter these make occasional mistakes on unusual
punctuation; expected behavior is frozen in golden files under tests/.
"""

from __future__ import annotations

import re


class LanguageError(Exception):
    """No sentencizer configured for the requested language."""


# Words that commonly precede a period without ending the sentence. Dotted
# acronyms (U.S., J.P., e.g.) are protected structurally; single capital
# initials are deliberately NOT protected, so "A. B." splits in two.
_ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "rev", "gen", "sen",
    "vs", "etc", "cf", "no", "co", "corp", "inc", "ltd", "dept", "est",
    "fig", "vol", "approx",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
    "nov", "dec", "mon", "tue", "wed", "thu", "fri", "sat", "sun",
}

_EN_BOUNDARY = re.compile(r"[.!?]+[\"'”’)\]]*\s+(?=[\"'“‘(\[]?[A-Z0-9])")
# split after terminal punctuation; a full stop followed by a digit is a
# decimal separator (ASCII or full-width), not a boundary
_JA_BOUNDARY = re.compile(r"(?<=[。！？!?])|(?<=[．.])(?![0-9０-９])")


def _final_word(prefix: str) -> str:
    """Last whitespace-delimited token before a boundary, without its final
    period or surrounding quotes, lowercased."""
    token = prefix.rsplit(None, 1)[-1] if prefix.split() else ""
    token = token.strip("\"'“”‘’()[]")
    return token[:-1].lower() if token.endswith(".") else token.lower()


def split_english(text: str) -> list[str]:
    sentences = []
    for paragraph in re.split(r"\n\s*\n", text):
        paragraph = paragraph.replace("\n", " ")
        start = 0
        for match in _EN_BOUNDARY.finditer(paragraph):
            candidate = paragraph[start : match.end()]
            word = _final_word(candidate)
            if word in _ABBREVIATIONS or "." in word:
                continue
            sentences.append(candidate)
            start = match.end()
        sentences.append(paragraph[start:])
    return [s.strip() for s in sentences if s.strip()]


def split_japanese(text: str) -> list[str]:
    sentences = []
    for line in text.splitlines():
        sentences.extend(_JA_BOUNDARY.split(line))
    return [s.strip() for s in sentences if s.strip()]


SENTENCIZERS = {
    "english": split_english,
    "japanese": split_japanese,
}

DEFAULT_LANGUAGE_MAP = {
    "en": "english",
    "ja": "japanese",
    "jp": "japanese",
}


def sentencize(
    text: str,
    language: str,
    language_map: dict[str, str] | None = None,
) -> list[str]:
    """Ordered, non-empty sentences of ``text`` per the configured segmenter."""
    mapping = DEFAULT_LANGUAGE_MAP if language_map is None else language_map
    name = mapping.get(language.lower(), language.lower())
    segmenter = SENTENCIZERS.get(name)
    if segmenter is None:
        raise LanguageError(
            f"no sentencizer for language {language!r} (configured: {sorted(SENTENCIZERS)})"
        )
    return segmenter(text)
