"""Derived views: daily trends, per-region tables, turnout adjustment,
and contention-vs-importance quadrant points.

Everything here is a pure transformation over immutable inputs; per-day
and per-region work is independent and the output order is fixed (sorted
by date or region id) so results are stable under any parallel schedule.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

from .errors import (
    ContentionError,
    EligibleLessThanVotes,
    ImportanceOutOfDeclaredRange,
    MissingImportance,
)
from .ingest import ALL_REGIONS, DailySeries, RegionRow, RegionTable
from .model import ContentionResult, KMode, StanceCounts, contention_exclusive


@dataclass(frozen=True)
class SeriesPoint:
    """One day of the two contention trends.

    ``*_all`` scores include the no-stance group (absent when the day has
    no sample total); ``*_stanced`` scores cover only the people with an
    explicit stance (absent when nobody was tagged that day).
    """

    date: date
    n_all: int | None
    n_stanced: int
    k: int
    raw_all: float | None
    norm_all: float | None
    raw_stanced: float | None
    norm_stanced: float | None


def timeseries(series: DailySeries, *, k_mode: KMode = "declared") -> list[SeriesPoint]:
    """Daily contention among everyone and among stance-holders only."""
    points = []
    for day in series.days:
        counts = day.counts
        n_stanced = sum(counts.explicit)
        raw_all = norm_all = raw_stanced = norm_stanced = None
        n_all = counts.total if day.has_total else None
        k = counts.space.k if k_mode == "declared" else counts.observed_k
        if day.has_total and counts.total > 0:
            result = contention_exclusive(counts, k_mode=k_mode)
            raw_all, norm_all, k = result.raw, result.normalized, result.k
        if n_stanced > 0:
            result = contention_exclusive(counts.with_no_stance(0), k_mode=k_mode)
            raw_stanced, norm_stanced, k = result.raw, result.normalized, result.k
        points.append(
            SeriesPoint(day.date, n_all, n_stanced, k, raw_all, norm_all, raw_stanced, norm_stanced)
        )
    return points


def region_contention(
    table: RegionTable, *, k_mode: KMode = "declared"
) -> list[tuple[str, ContentionResult]]:
    """Contention per region plus the ``__all__`` aggregate, sorted by id."""
    rows = list(table.rows)
    if all(r.region != ALL_REGIONS for r in rows):
        aggregate = rows[0].counts
        for r in rows[1:]:
            aggregate = aggregate + r.counts
        rows.append(RegionRow(ALL_REGIONS, aggregate))
    return [
        (r.region, contention_exclusive(r.counts, k_mode=k_mode))
        for r in sorted(rows, key=lambda r: r.region)
    ]


def turnout_adjust(counts: StanceCounts, eligible: int) -> StanceCounts:
    """Recast the no-stance group as everyone eligible who cast no valid vote."""
    if eligible < counts.total:
        raise EligibleLessThanVotes(
            f"eligible {eligible} < population {counts.total} already counted"
        )
    return counts.with_no_stance(eligible - sum(counts.explicit))


@dataclass(frozen=True)
class QuadrantPoint:
    """One topic in the contention-vs-importance plane, both axes in [0, 1]."""

    topic: str
    contention: float
    importance: float
    source: str = ""


def quadrant_points(
    rows: Iterable[tuple[str, StanceCounts, float | None]],
    scale: Sequence[float],
    *,
    source: str = "",
    k_mode: KMode = "declared",
    on_error: str = "raise",
) -> tuple[list[QuadrantPoint], list[tuple[str, str]]]:
    """Place topics on the contention x importance plane.

    ``scale`` declares the source's rating bounds (e.g. 0..10); ratings
    are mapped linearly onto [0, 1].  No scalar controversy value is
    produced: the two axes are reported as-is.  With ``on_error="skip"``
    bad topics are returned in the rejects list instead of raising, so
    every input topic lands in exactly one of the two outputs.
    """
    lo, hi = float(scale[0]), float(scale[1])
    if not lo < hi:
        raise ValueError(f"importance scale must satisfy lo < hi, got ({lo}, {hi})")
    if on_error not in ("raise", "skip"):
        raise ValueError(f"on_error must be 'raise' or 'skip', got {on_error!r}")
    points: list[QuadrantPoint] = []
    rejects: list[tuple[str, str]] = []
    for topic, counts, importance in rows:
        try:
            if importance is None:
                raise MissingImportance(f"topic {topic!r} has no importance rating")
            if not lo <= importance <= hi:
                raise ImportanceOutOfDeclaredRange(
                    f"topic {topic!r}: importance {importance} outside [{lo}, {hi}]"
                )
            result = contention_exclusive(counts, k_mode=k_mode)
        except ContentionError as exc:
            if on_error == "raise":
                raise
            rejects.append((topic, f"{type(exc).__name__}: {exc}"))
            continue
        points.append(
            QuadrantPoint(topic, result.normalized, (importance - lo) / (hi - lo), source)
        )
    return points, rejects
