"""Readers for explicit-stance datasets and implicit-stance tweet streams.

Explicit sources (poll toplines, regional vote records) arrive as CSV and
become StanceCounts directly.  Tweets arrive as JSON-lines and get their
stance from an explicit hashtag lexicon: a tweet is tagged only when its
hashtags hit exactly one stance's list, so precision beats recall, and
everything untagged lands in the no-stance group.

File schemas (UTF-8, RFC-4180 quoting):

- poll topline:   header ``topic,stance,count`` or ``topic,stance,percent,total``;
  stance literal ``__none__`` is the no-stance row.
- vote records:   header ``region,option,count``; option literals
  ``__eligible__`` (eligible-population sidecar), ``__rejected__``
  (rejected ballots) and ``__none__`` (ballots counted as no stance).
- daily totals:   header ``date,total`` with ``YYYY-MM-DD`` dates.
- tweet stream:   one JSON object per line: ``id`` (str), ``ts`` (ISO-8601
  with offset; normalized to UTC), ``user`` (str), ``hashtags`` (list of
  strings, no '#').
- stance lexicon: JSON ``{topic, stances: [{id, label, hashtags: [...]}]}``.
- quadrant topics: header ``topic,stance,count,importance``.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import (
    AmbiguousStance,
    DuplicateStanceRow,
    EligibleLessThanVotes,
    EmptyInput,
    ErrorBudgetExceeded,
    MalformedRow,
    MissingEligible,
    MissingTotal,
    NegativeCount,
    TotalLessThanStanceCounts,
    UnparseableTimestamp,
)
from .model import NO_STANCE, StanceCounts, StanceSpace

ELIGIBLE = "__eligible__"
REJECTED = "__rejected__"
ALL_REGIONS = "__all__"

TurnoutMode = str  # "ballots-only" | "eligible-population"


def normalize_hashtag(tag: str) -> str:
    """Canonical hashtag form: NFC-normalized, case-folded, no leading '#'."""
    return unicodedata.normalize("NFC", tag.lstrip("#")).casefold()


# -- stance lexicons and tweets ------------------------------------------------

@dataclass(frozen=True)
class LexiconStance:
    id: str
    label: str
    hashtags: frozenset[str]


@dataclass(frozen=True)
class StanceLexicon:
    """Per-stance hashtag lists for one topic; each hashtag maps to one stance."""

    topic: str
    stances: tuple[LexiconStance, ...]

    def __post_init__(self) -> None:
        seen: dict[str, str] = {}
        for stance in self.stances:
            for tag in stance.hashtags:
                if tag in seen and seen[tag] != stance.id:
                    raise MalformedRow(
                        f"hashtag #{tag} appears under both {seen[tag]!r} and {stance.id!r}"
                    )
                seen[tag] = stance.id

    @classmethod
    def from_json(cls, path: str | Path) -> StanceLexicon:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedRow(f"cannot read lexicon {path}: {exc}") from exc
        try:
            stances = tuple(
                LexiconStance(
                    id=str(entry["id"]),
                    label=str(entry.get("label") or entry["id"]),
                    hashtags=frozenset(normalize_hashtag(t) for t in entry["hashtags"]),
                )
                for entry in doc["stances"]
            )
            topic = str(doc["topic"])
        except (KeyError, TypeError) as exc:
            raise MalformedRow(f"lexicon {path} missing field: {exc}") from exc
        return cls(topic, stances)

    @property
    def contention_bearing(self) -> bool:
        """At least two stances with a hashtag each can ever disagree."""
        return sum(1 for s in self.stances if s.hashtags) >= 2

    def space(self) -> StanceSpace:
        return StanceSpace.exclusive(
            [s.id for s in self.stances], {s.id: s.label for s in self.stances}
        )

    def tag_index(self) -> dict[str, str]:
        return {tag: s.id for s in self.stances for tag in s.hashtags}


@dataclass(frozen=True)
class TweetRecord:
    """One tweet: id, UTC instant, author, normalized hashtags."""

    id: str
    ts: datetime
    user: str
    hashtags: tuple[str, ...]

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> TweetRecord:
        try:
            raw_tags = obj["hashtags"]
            record = cls(
                id=str(obj["id"]),
                ts=parse_utc_timestamp(str(obj["ts"])),
                user=str(obj["user"]),
                hashtags=tuple(normalize_hashtag(str(t)) for t in raw_tags),
            )
        except UnparseableTimestamp:
            raise
        except (KeyError, TypeError) as exc:
            raise MalformedRow(f"tweet record missing field: {exc}") from exc
        return record


def parse_utc_timestamp(text: str) -> datetime:
    """ISO-8601 instant -> aware UTC datetime ('Z' accepted, naive = UTC)."""
    cleaned = text.strip()
    if cleaned.endswith(("Z", "z")):
        cleaned = cleaned[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(cleaned)
    except ValueError as exc:
        raise UnparseableTimestamp(f"bad timestamp {text!r}") from exc
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def tag_tweet_stance(
    tweet: TweetRecord,
    lexicon: StanceLexicon,
    *,
    ambiguous: str = "no-stance",
) -> str:
    """Stance id for a tweet, or ``__none__``.

    A stance is assigned only when the tweet's hashtags intersect exactly
    one stance's list.  Zero matches is no-stance; matches across two or
    more stances are ambiguous and default to no-stance (``ambiguous=
    "error"`` raises instead, for pipelines that want to audit them).
    """
    index = lexicon.tag_index()
    matched = {index[t] for t in tweet.hashtags if t in index}
    if len(matched) == 1:
        return next(iter(matched))
    if len(matched) > 1 and ambiguous == "error":
        raise AmbiguousStance(f"tweet {tweet.id} matches stances {sorted(matched)}")
    return NO_STANCE


@dataclass
class StreamStats:
    """Counters from one pass over tweet shards."""

    lines: int = 0
    parsed: int = 0
    parse_errors: int = 0
    tagged: dict[str, int] = field(default_factory=dict)

    def merge(self, other: StreamStats) -> None:
        self.lines += other.lines
        self.parsed += other.parsed
        self.parse_errors += other.parse_errors
        for sid, n in other.tagged.items():
            self.tagged[sid] = self.tagged.get(sid, 0) + n


def iter_tweet_stream(path: str | Path, stats: StreamStats) -> Iterator[TweetRecord]:
    """Yield TweetRecords from a JSONL shard, counting bad lines in ``stats``.

    Unparseable lines are skipped, not fatal; the caller decides whether
    the accumulated error ratio still fits its budget.
    """
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            stats.lines += 1
            try:
                obj = json.loads(line)
                record = TweetRecord.from_json_obj(obj)
            except (json.JSONDecodeError, MalformedRow, UnparseableTimestamp):
                stats.parse_errors += 1
                continue
            stats.parsed += 1
            yield record


# -- daily series ---------------------------------------------------------------

@dataclass(frozen=True)
class DaySlice:
    """One UTC calendar day of counts; ``has_total`` marks a known G0 baseline."""

    date: date
    counts: StanceCounts
    has_total: bool = True


@dataclass(frozen=True)
class DailySeries:
    """Date-keyed stance counts for one topic, strictly increasing dates."""

    topic: str
    days: tuple[DaySlice, ...]

    def __post_init__(self) -> None:
        dates = [d.date for d in self.days]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError("days must be strictly increasing by date")

    def write_csv(self, path: str | Path) -> None:
        """Serialize as ``date,stance,count`` rows; the ``__none__`` row is
        written only for days whose sample total is known."""
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["date", "stance", "count"])
            for day in self.days:
                for sid, count in zip(day.counts.space.all_ids, day.counts.counts):
                    if sid == NO_STANCE and not day.has_total:
                        continue
                    writer.writerow([day.date.isoformat(), sid, count])

    @classmethod
    def read_csv(cls, topic: str, path: str | Path) -> DailySeries:
        rows = _read_csv_rows(path, ("date", "stance", "count"))
        by_day: dict[date, dict[str, int]] = {}
        order: list[str] = []
        for row in rows:
            day = _parse_date(row["date"])
            count = _parse_count(row["count"], row)
            stances = by_day.setdefault(day, {})
            if row["stance"] in stances:
                raise DuplicateStanceRow(f"{row['date']}/{row['stance']} appears twice")
            stances[row["stance"]] = count
            if row["stance"] != NO_STANCE and row["stance"] not in order:
                order.append(row["stance"])
        space = StanceSpace.exclusive(order)
        days = []
        for day in sorted(by_day):
            stances = by_day[day]
            has_total = NO_STANCE in stances
            counts = StanceCounts.from_mapping(
                space,
                {sid: c for sid, c in stances.items() if sid != NO_STANCE},
                no_stance=stances.get(NO_STANCE, 0),
            )
            days.append(DaySlice(day, counts, has_total))
        return cls(topic, tuple(days))


# -- region tables ----------------------------------------------------------------

@dataclass(frozen=True)
class RegionRow:
    """One region's counts, with optional eligible population and importance."""

    region: str
    counts: StanceCounts
    eligible: int | None = None
    importance: float | None = None

    def __post_init__(self) -> None:
        if self.eligible is not None and self.eligible < sum(self.counts.explicit):
            raise EligibleLessThanVotes(
                f"region {self.region!r}: eligible {self.eligible} < "
                f"{sum(self.counts.explicit)} explicit votes"
            )


@dataclass(frozen=True)
class RegionTable:
    topic: str
    rows: tuple[RegionRow, ...]

    def __post_init__(self) -> None:
        ids = [r.region for r in self.rows]
        if len(set(ids)) != len(ids):
            raise ValueError("region ids must be unique")

    def row(self, region: str) -> RegionRow:
        for r in self.rows:
            if r.region == region:
                return r
        raise KeyError(region)


# -- CSV loaders -------------------------------------------------------------------

def _read_csv_rows(path: str | Path, required: Sequence[str]) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise MalformedRow(f"{path}: missing header row")
        missing = [col for col in required if col not in reader.fieldnames]
        if missing:
            raise MalformedRow(f"{path}: header lacks column(s) {missing}")
        rows = []
        for row in reader:
            if any(row.get(col) is None for col in required):
                raise MalformedRow(f"{path}: short row {row}")
            rows.append(row)
    return rows


def _parse_count(text: str, row: Mapping[str, str]) -> int:
    try:
        value = int(text)
    except (TypeError, ValueError) as exc:
        raise MalformedRow(f"count {text!r} is not an integer in row {dict(row)}") from exc
    if value < 0:
        raise NegativeCount(f"negative count in row {dict(row)}")
    return value


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise MalformedRow(f"bad date {text!r} (want YYYY-MM-DD)") from exc


@dataclass(frozen=True)
class PollSchema:
    """Column names for poll topline CSVs; override to adapt other exports."""

    topic: str = "topic"
    stance: str = "stance"
    count: str = "count"
    percent: str = "percent"
    total: str = "total"


def load_poll_topline(
    path: str | Path,
    schema: PollSchema | None = None,
) -> list[tuple[str, StanceCounts]]:
    """Read poll toplines into one StanceCounts per topic, in file order.

    Accepts either a ``count`` column or a ``percent`` column; percentages
    need a ``total`` (respondent count) column and are converted to
    effective counts with round-half-to-even.  The ``__none__`` stance row
    holds the no-answer group.
    """
    schema = schema or PollSchema()
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        if schema.topic not in header or schema.stance not in header:
            raise MalformedRow(f"{path}: header must carry {schema.topic!r} and {schema.stance!r}")
        use_percent = schema.count not in header
        if use_percent and schema.percent not in header:
            raise MalformedRow(
                f"{path}: need a {schema.count!r} or {schema.percent!r} column"
            )
        topics: dict[str, dict[str, int]] = {}
        for row in reader:
            topic = row.get(schema.topic)
            stance = row.get(schema.stance)
            if not topic or not stance:
                raise MalformedRow(f"{path}: short row {dict(row)}")
            value = _poll_row_count(row, schema, use_percent)
            per_topic = topics.setdefault(topic, {})
            if stance in per_topic:
                raise DuplicateStanceRow(f"{topic}/{stance} appears twice")
            per_topic[stance] = value
    if not topics:
        raise EmptyInput(f"{path}: no data rows")
    out = []
    for topic, stances in topics.items():
        explicit = [sid for sid in stances if sid != NO_STANCE]
        space = StanceSpace.exclusive(explicit)
        counts = StanceCounts.from_mapping(
            space,
            {sid: c for sid, c in stances.items() if sid != NO_STANCE},
            no_stance=stances.get(NO_STANCE, 0),
        )
        out.append((topic, counts))
    return out


def _poll_row_count(row: Mapping[str, str], schema: PollSchema, use_percent: bool) -> int:
    if not use_percent:
        return _parse_count(row[schema.count], row)
    try:
        percent = Fraction(row[schema.percent])
    except (ValueError, ZeroDivisionError) as exc:
        raise MalformedRow(f"bad percentage in row {dict(row)}") from exc
    if percent < 0:
        raise NegativeCount(f"negative percentage in row {dict(row)}")
    total_text = (row.get(schema.total) or "").strip()
    if not total_text:
        raise MissingTotal(f"percentage row without respondent total: {dict(row)}")
    total = _parse_count(total_text, row)
    # round() on an exact Fraction is round-half-to-even, so rounding noise
    # stays bounded by 1/total and never depends on float formatting.
    return round(percent * total / 100)


def load_vote_records(
    path: str | Path,
    turnout_mode: TurnoutMode = "ballots-only",
    topic: str | None = None,
) -> RegionTable:
    """Read regional votes; non-voters and rejected ballots carry no stance.

    ballots-only: g0 = rejected ballots (+ any ``__none__`` ballots).
    eligible-population: g0 = eligible - valid votes, folding non-voters
    and rejected ballots together; every region then needs an
    ``__eligible__`` sidecar row.  An ``__all__`` row summing every region
    is appended.
    """
    if turnout_mode not in ("ballots-only", "eligible-population"):
        raise ValueError(f"unknown turnout mode {turnout_mode!r}")
    rows = _read_csv_rows(path, ("region", "option", "count"))
    options: list[str] = []
    per_region: dict[str, dict[str, int]] = {}
    for row in rows:
        region, option = row["region"], row["option"]
        if region == ALL_REGIONS:
            raise MalformedRow(f"region id {ALL_REGIONS!r} is reserved for the aggregate")
        count = _parse_count(row["count"], row)
        bucket = per_region.setdefault(region, {})
        if option in bucket:
            raise DuplicateStanceRow(f"{region}/{option} appears twice")
        bucket[option] = count
        if option not in (ELIGIBLE, REJECTED, NO_STANCE) and option not in options:
            options.append(option)
    if not per_region:
        raise EmptyInput(f"{path}: no data rows")

    space = StanceSpace.exclusive(options)
    table_rows = []
    for region, bucket in per_region.items():
        valid = {sid: bucket.get(sid, 0) for sid in options}
        rejected = bucket.get(REJECTED, 0)
        none_ballots = bucket.get(NO_STANCE, 0)
        eligible = bucket.get(ELIGIBLE)
        cast = sum(valid.values()) + rejected + none_ballots
        if eligible is not None and eligible < cast:
            raise EligibleLessThanVotes(
                f"region {region!r}: eligible {eligible} < {cast} ballots cast"
            )
        if turnout_mode == "eligible-population":
            if eligible is None:
                raise MissingEligible(f"region {region!r} has no {ELIGIBLE} row")
            g0 = eligible - sum(valid.values())
        else:
            g0 = rejected + none_ballots
        counts = StanceCounts.from_mapping(space, valid, no_stance=g0)
        table_rows.append(RegionRow(region, counts, eligible))

    aggregate = table_rows[0].counts
    for r in table_rows[1:]:
        aggregate = aggregate + r.counts
    eligibles = [r.eligible for r in table_rows]
    total_eligible = sum(eligibles) if all(e is not None for e in eligibles) else None
    table_rows.append(RegionRow(ALL_REGIONS, aggregate, total_eligible))
    return RegionTable(topic or Path(path).stem, tuple(table_rows))


def load_daily_totals(path: str | Path) -> dict[date, int]:
    """Read the ``date,total`` baseline counts (the G0 source) per UTC day."""
    rows = _read_csv_rows(path, ("date", "total"))
    totals: dict[date, int] = {}
    for row in rows:
        day = _parse_date(row["date"])
        if day in totals:
            raise DuplicateStanceRow(f"date {row['date']} appears twice in totals")
        totals[day] = _parse_count(row["total"], row)
    return totals


def load_quadrant_topics(path: str | Path) -> list[tuple[str, StanceCounts, float | None]]:
    """Read ``topic,stance,count,importance`` rows into per-topic counts.

    The importance rating must agree across a topic's rows; an empty field
    means the topic has no rating (rejected later unless skipped).
    """
    rows = _read_csv_rows(path, ("topic", "stance", "count"))
    per_topic: dict[str, dict[str, int]] = {}
    importance: dict[str, float | None] = {}
    for row in rows:
        topic, stance = row["topic"], row["stance"]
        count = _parse_count(row["count"], row)
        bucket = per_topic.setdefault(topic, {})
        if stance in bucket:
            raise DuplicateStanceRow(f"{topic}/{stance} appears twice")
        bucket[stance] = count
        raw_importance = (row.get("importance") or "").strip()
        rating = float(raw_importance) if raw_importance else None
        if topic not in importance:
            importance[topic] = rating
        elif importance[topic] != rating:
            raise MalformedRow(f"topic {topic!r} carries conflicting importance ratings")
    if not per_topic:
        raise EmptyInput(f"{path}: no data rows")
    out = []
    for topic, stances in per_topic.items():
        explicit = [sid for sid in stances if sid != NO_STANCE]
        space = StanceSpace.exclusive(explicit)
        counts = StanceCounts.from_mapping(
            space,
            {sid: c for sid, c in stances.items() if sid != NO_STANCE},
            no_stance=stances.get(NO_STANCE, 0),
        )
        out.append((topic, counts, importance[topic]))
    return out


# -- daily tweet counting ------------------------------------------------------------

class _DayAccumulator:
    """Streaming per-day stance tally; merges commutatively across shards."""

    def __init__(self, lexicon: StanceLexicon, mode: str) -> None:
        if mode not in ("tweet", "user"):
            raise ValueError(f"counting mode must be 'tweet' or 'user', got {mode!r}")
        self.lexicon = lexicon
        self.mode = mode
        self.index = lexicon.tag_index()
        self.stance_ids = [s.id for s in lexicon.stances]
        self.day_counts: dict[date, dict[str, int]] = {}
        self.day_users: dict[date, dict[str, set[str]]] = {}
        self.user_stances: dict[str, set[str]] = {}
        self.stats = StreamStats()

    def add(self, record: TweetRecord) -> None:
        matched = {self.index[t] for t in record.hashtags if t in self.index}
        stance = next(iter(matched)) if len(matched) == 1 else None
        day = record.ts.date()
        if self.mode == "tweet":
            bucket = self.day_counts.setdefault(day, {})
            if stance is not None:
                bucket[stance] = bucket.get(stance, 0) + 1
            else:
                bucket.setdefault("", 0)  # remember the day exists
        else:
            bucket_users = self.day_users.setdefault(day, {})
            if stance is not None:
                bucket_users.setdefault(stance, set()).add(record.user)
                self.user_stances.setdefault(record.user, set()).add(stance)
            else:
                bucket_users.setdefault("", set())
        if stance is not None:
            self.stats.tagged[stance] = self.stats.tagged.get(stance, 0) + 1

    def merge(self, other: _DayAccumulator) -> None:
        for day, counts in other.day_counts.items():
            bucket = self.day_counts.setdefault(day, {})
            for sid, n in counts.items():
                bucket[sid] = bucket.get(sid, 0) + n
        for day, users in other.day_users.items():
            bucket_users = self.day_users.setdefault(day, {})
            for sid, ids in users.items():
                bucket_users.setdefault(sid, set()).update(ids)
        for user, stances in other.user_stances.items():
            self.user_stances.setdefault(user, set()).update(stances)
        self.stats.merge(other.stats)

    def _explicit_counts(self, day: date) -> dict[str, int]:
        if self.mode == "tweet":
            bucket = self.day_counts.get(day, {})
            return {sid: bucket.get(sid, 0) for sid in self.stance_ids}
        bucket_users = self.day_users.get(day, {})
        out = {}
        for sid in self.stance_ids:
            users = bucket_users.get(sid, set())
            # a user who ever tweets conflicting stances in the window is
            # excluded from every group
            out[sid] = sum(1 for u in users if len(self.user_stances[u]) == 1)
        return out

    def finish(self, totals: Mapping[date, int] | None) -> DailySeries:
        space = self.lexicon.space()
        seen_days = set(self.day_counts) | set(self.day_users)
        if totals:
            seen_days |= set(totals)
        days = []
        for day in sorted(seen_days):
            explicit = self._explicit_counts(day)
            tagged_sum = sum(explicit.values())
            total = totals.get(day) if totals else None
            if total is None:
                counts = StanceCounts.from_mapping(space, explicit, no_stance=0)
                days.append(DaySlice(day, counts, has_total=False))
            else:
                g0 = total - tagged_sum
                if g0 < 0:
                    raise TotalLessThanStanceCounts(
                        f"{day}: day total {total} < {tagged_sum} stance-tagged"
                    )
                counts = StanceCounts.from_mapping(space, explicit, no_stance=g0)
                days.append(DaySlice(day, counts, has_total=True))
        return DailySeries(self.lexicon.topic, tuple(days))


def build_daily_counts(
    records: Iterable[TweetRecord],
    lexicon: StanceLexicon,
    totals: Mapping[date, int] | None = None,
    *,
    mode: str = "tweet",
) -> DailySeries:
    """Bucket a tweet stream by UTC date into per-stance daily counts.

    Input order is irrelevant.  With daily totals, each day's no-stance
    count is total - tagged (the day's whole sample is the population);
    days carrying tags but no total row keep only the stance-holders
    variant.  ``mode="user"`` counts distinct user ids instead of tweets.
    """
    acc = _DayAccumulator(lexicon, mode)
    for record in records:
        acc.add(record)
    return acc.finish(totals)


def ingest_tweets(
    paths: Sequence[str | Path],
    lexicon: StanceLexicon,
    totals: Mapping[date, int] | None = None,
    *,
    mode: str = "tweet",
    threads: int = 1,
    error_budget: float = 0.001,
) -> tuple[DailySeries, StreamStats]:
    """Read one or more JSONL shards into a DailySeries plus stream stats.

    Shards are independent single passes merged by commutative addition,
    so the result does not depend on shard order or thread count.  Lines
    that fail to parse are skipped and counted; when they exceed
    ``error_budget`` as a fraction of all lines, the whole run fails.
    """

    def consume(path: str | Path) -> _DayAccumulator:
        acc = _DayAccumulator(lexicon, mode)
        for record in iter_tweet_stream(path, acc.stats):
            acc.add(record)
        return acc

    if threads > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(consume, paths))
    else:
        partials = [consume(p) for p in paths]

    merged = partials[0]
    for part in partials[1:]:
        merged.merge(part)
    stats = merged.stats
    if stats.lines and stats.parse_errors / stats.lines > error_budget:
        raise ErrorBudgetExceeded(
            f"{stats.parse_errors}/{stats.lines} lines unparseable "
            f"(budget {error_budget:.4%})"
        )
    return merged.finish(totals), stats
