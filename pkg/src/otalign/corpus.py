"""Article cleaning, story deduplication, trading-day assignment, bundling.

Raw provider articles come in as JSONL. Per story we keep the final update
published within 24h of first appearance, drop low-relevance and multi-ticker
stories, clean boilerplate, assign each article to the trading day whose
pre-open window contains its publish time, and concatenate per
(ticker, trading day) into bilingual bundles.
"""

from __future__ import annotations

import json
import logging
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from enum import Enum
from zoneinfo import ZoneInfo

from .errors import CalendarGap, MalformedInput

logger = logging.getLogger(__name__)

DEFAULT_MIN_TICKER_SCORE = 75
DEFAULT_MIN_CHARS = 100
DEFAULT_MAX_CHARS = 100_000


@dataclass(frozen=True)
class RawArticle:
    story_id: str
    publish_time: datetime
    language: str
    ticker: str
    ticker_score: int
    body: str

    def __post_init__(self):
        if self.publish_time.tzinfo is None:
            raise MalformedInput(
                f"story {self.story_id}: publish_time lacks a timezone offset"
            )
        if not 0 <= self.ticker_score <= 100:
            raise MalformedInput(
                f"story {self.story_id}: ticker_score {self.ticker_score} outside [0, 100]"
            )


@dataclass(frozen=True)
class CleanArticle:
    story_id: str
    trading_day: date | None
    language: str
    ticker: str
    body: str


@dataclass(frozen=True)
class StockDayBundle:
    ticker: str
    trading_day: date
    english_text: str
    foreign_text: str
    source_story_ids: list[str] = field(default_factory=list)


class RejectReason(Enum):
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"
    EMPTY_AFTER_CLEAN = "EmptyAfterClean"


@dataclass(frozen=True)
class Rejection:
    story_id: str
    reason: RejectReason


@dataclass(frozen=True)
class CleaningRules:
    """Configurable cleaning: boilerplate patterns plus length bounds.

    ``boilerplate_patterns`` are regexes removed from the text (line-anchored
    patterns work since they are applied before paragraph reflow).
    """

    boilerplate_patterns: tuple[str, ...] = ()
    min_chars: int = DEFAULT_MIN_CHARS
    max_chars: int = DEFAULT_MAX_CHARS

    def compiled(self) -> list[re.Pattern]:
        return [re.compile(p, re.MULTILINE) for p in self.boilerplate_patterns]


@dataclass(frozen=True)
class ExchangeCalendar:
    """Trading days of one exchange plus the pre-open article cutoff.

    An article published in [open(t-1) - cutoff, open(t) - cutoff) belongs to
    trading day t; the boundary instant itself rolls to the next window.
    """

    exchange: str
    market_open: time
    timezone: str
    trading_days: tuple[date, ...]
    cutoff_offset: timedelta = timedelta(minutes=30)

    def __post_init__(self):
        if self.cutoff_offset <= timedelta(0):
            raise ValueError("cutoff_offset must be positive")
        days = self.trading_days
        if any(a >= b for a, b in zip(days, days[1:])):
            raise ValueError("trading_days must be strictly increasing")
        tz = ZoneInfo(self.timezone)
        cutoffs = tuple(
            datetime.combine(d, self.market_open, tzinfo=tz) - self.cutoff_offset
            for d in days
        )
        object.__setattr__(self, "_cutoffs", cutoffs)

    @property
    def cutoffs(self) -> tuple[datetime, ...]:
        return self._cutoffs


def make_weekday_calendar(
    exchange: str,
    timezone: str,
    market_open: time,
    start: date,
    end: date,
    holidays: set[date] = frozenset(),
    cutoff_offset: timedelta = timedelta(minutes=30),
) -> ExchangeCalendar:
    """All Mon-Fri dates in [start, end] minus holidays."""
    days = []
    d = start
    while d <= end:
        if d.weekday() < 5 and d not in holidays:
            days.append(d)
        d += timedelta(days=1)
    return ExchangeCalendar(exchange, market_open, timezone, tuple(days), cutoff_offset)


def load_calendar(path) -> ExchangeCalendar:
    """Calendar config file: exchange, timezone, open time, date range, holidays."""
    import yaml

    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    open_h, open_m = str(cfg["market_open"]).split(":")
    market_open = time(int(open_h), int(open_m))
    cutoff = timedelta(minutes=int(cfg.get("cutoff_minutes", 30)))
    if "trading_days" in cfg:
        days = tuple(sorted(_as_date(d) for d in cfg["trading_days"]))
        return ExchangeCalendar(
            cfg["exchange"], market_open, cfg["timezone"], days, cutoff
        )
    holidays = {_as_date(d) for d in cfg.get("holidays", [])}
    return make_weekday_calendar(
        cfg["exchange"],
        cfg["timezone"],
        market_open,
        _as_date(cfg["start"]),
        _as_date(cfg["end"]),
        holidays,
        cutoff,
    )


def _as_date(v) -> date:
    return v if isinstance(v, date) else date.fromisoformat(str(v))


_PARAGRAPH_SPLIT = re.compile(r"\n\s*\n")
_INNER_BREAKS = re.compile(r"[ \t]*\n[ \t]*")
_MULTISPACE = re.compile(r"[ \t]{2,}")


def clean_body(body: str, rules: CleaningRules) -> str | RejectReason:
    """Strip boilerplate, reflow paragraphs, apply length bounds.

    Returns the cleaned text, or the reason it was rejected. Numbers and
    stopwords are left untouched; only whitespace and configured boilerplate
    are altered.
    """
    if isinstance(body, bytes):
        try:
            body = body.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"undecodable article body: {exc}") from exc

    text = body
    for pat in rules.compiled():
        text = pat.sub("", text)

    paragraphs = []
    for para in _PARAGRAPH_SPLIT.split(text):
        para = _INNER_BREAKS.sub(" ", para).strip()
        para = _MULTISPACE.sub(" ", para)
        if para:
            paragraphs.append(para)
    cleaned = "\n\n".join(paragraphs)

    if not cleaned:
        return RejectReason.EMPTY_AFTER_CLEAN
    if len(cleaned) < rules.min_chars:
        return RejectReason.TOO_SHORT
    if len(cleaned) > rules.max_chars:
        return RejectReason.TOO_LONG
    return cleaned


def clean_article(
    raw: RawArticle,
    rules: CleaningRules,
    cal: ExchangeCalendar | None = None,
) -> CleanArticle | Rejection:
    """Clean one article; assign its trading day when a calendar is given."""
    cleaned = clean_body(raw.body, rules)
    if isinstance(cleaned, RejectReason):
        return Rejection(raw.story_id, cleaned)
    day = assign_trading_day(raw.publish_time, cal) if cal is not None else None
    return CleanArticle(raw.story_id, day, raw.language, raw.ticker, cleaned)


def assign_trading_day(publish_time: datetime, cal: ExchangeCalendar) -> date:
    """Trading day whose half-open pre-open window contains publish_time."""
    if publish_time.tzinfo is None:
        raise MalformedInput("publish_time lacks a timezone offset")
    idx = bisect_right(cal.cutoffs, publish_time)
    if idx < 1 or idx >= len(cal.trading_days):
        raise CalendarGap(
            f"{publish_time.isoformat()} outside calendar coverage of {cal.exchange}"
        )
    return cal.trading_days[idx]


def _final_versions(articles: list[RawArticle]) -> list[RawArticle]:
    """Per (story, language), the last update within 24h of first appearance."""
    by_story: dict[tuple[str, str], list[RawArticle]] = {}
    for art in articles:
        by_story.setdefault((art.story_id, art.language), []).append(art)
    kept = []
    for versions in by_story.values():
        versions.sort(key=lambda a: a.publish_time)
        deadline = versions[0].publish_time + timedelta(hours=24)
        within = [v for v in versions if v.publish_time <= deadline]
        kept.append(within[-1])
    kept.sort(key=lambda a: (a.publish_time, a.story_id, a.language))
    return kept


def bundle_stock_days(
    articles: list[RawArticle],
    cal: ExchangeCalendar,
    min_ticker_score: int = DEFAULT_MIN_TICKER_SCORE,
    rules: CleaningRules | None = None,
    english_language: str = "en",
    foreign_language: str | None = None,
) -> list[StockDayBundle]:
    """Filter, dedup, clean, and concatenate articles into bilingual bundles.

    Stories associated with more than one ticker at or above the score
    threshold are dropped entirely. Only (ticker, day) groups with text in
    both languages are emitted. ``foreign_language=None`` treats every
    non-English article as foreign.
    """
    scored = [a for a in articles if a.ticker_score >= min_ticker_score]

    tickers_per_story: dict[str, set[str]] = {}
    for art in scored:
        tickers_per_story.setdefault(art.story_id, set()).add(art.ticker)
    single = [a for a in scored if len(tickers_per_story[a.story_id]) == 1]
    dropped_multi = len({a.story_id for a in scored}) - len(
        {a.story_id for a in single}
    )
    if dropped_multi:
        logger.info("dropped %d multi-ticker stories", dropped_multi)

    finals = _final_versions(single)

    groups: dict[tuple[str, date, str], list[tuple[RawArticle, str]]] = {}
    for art in finals:
        if art.language == english_language:
            side = "E"
        elif foreign_language is None or art.language == foreign_language:
            side = "F"
        else:
            continue
        body = art.body
        if rules is not None:
            cleaned = clean_body(art.body, rules)
            if isinstance(cleaned, RejectReason):
                logger.info("rejected story %s: %s", art.story_id, cleaned.value)
                continue
            body = cleaned
        try:
            day = assign_trading_day(art.publish_time, cal)
        except CalendarGap:
            logger.info("story %s outside calendar coverage", art.story_id)
            continue
        groups.setdefault((art.ticker, day, side), []).append((art, body))

    bundles = []
    keys = {(t, d) for (t, d, _side) in groups}
    for ticker, day in sorted(keys):
        en = groups.get((ticker, day, "E"))
        fo = groups.get((ticker, day, "F"))
        if not en or not fo:
            continue
        en.sort(key=lambda ab: (ab[0].publish_time, ab[0].story_id))
        fo.sort(key=lambda ab: (ab[0].publish_time, ab[0].story_id))
        bundles.append(
            StockDayBundle(
                ticker=ticker,
                trading_day=day,
                english_text="\n\n".join(b for _, b in en),
                foreign_text="\n\n".join(b for _, b in fo),
                source_story_ids=[a.story_id for a, _ in en] + [a.story_id for a, _ in fo],
            )
        )
    return bundles


def read_raw_articles(path) -> list[RawArticle]:
    """JSONL with fields story_id, publish_time (RFC 3339), language, ticker,
    ticker_score, body."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(
                    RawArticle(
                        story_id=str(rec["story_id"]),
                        publish_time=_parse_rfc3339(rec["publish_time"]),
                        language=str(rec["language"]),
                        ticker=str(rec["ticker"]),
                        ticker_score=int(rec["ticker_score"]),
                        body=rec["body"],
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise MalformedInput(f"{path}:{lineno}: {exc}") from exc
    return out


def _parse_rfc3339(value: str) -> datetime:
    dt = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {value!r} lacks a timezone offset")
    return dt


def write_bundles(bundles: list[StockDayBundle], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for b in bundles:
            fh.write(
                json.dumps(
                    {
                        "ticker": b.ticker,
                        "trading_day": b.trading_day.isoformat(),
                        "english_text": b.english_text,
                        "foreign_text": b.foreign_text,
                        "source_story_ids": b.source_story_ids,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_bundles(path) -> list[StockDayBundle]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(
                StockDayBundle(
                    ticker=rec["ticker"],
                    trading_day=date.fromisoformat(rec["trading_day"]),
                    english_text=rec["english_text"],
                    foreign_text=rec["foreign_text"],
                    source_story_ids=list(rec.get("source_story_ids", [])),
                )
            )
    return out
