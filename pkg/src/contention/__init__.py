"""Population-dependent contention scoring.

Contention is the probability that two people drawn with replacement from
a population hold conflicting stances on a topic.  The package computes
it exactly (closed form for mutually exclusive stances, signature-based
counting for overlapping ones), estimates it by seeded sampling, and
derives the usual views: daily timeseries from hashtag-tagged tweets,
per-region tables from vote records, turnout adjustment, and
contention-vs-importance quadrant points.
"""

from .analytics import (
    QuadrantPoint,
    SeriesPoint,
    quadrant_points,
    region_contention,
    timeseries,
    turnout_adjust,
)
from .errors import ContentionError
from .ingest import (
    ALL_REGIONS,
    DailySeries,
    DaySlice,
    RegionRow,
    RegionTable,
    StanceLexicon,
    TweetRecord,
    build_daily_counts,
    ingest_tweets,
    load_daily_totals,
    load_poll_topline,
    load_quadrant_topics,
    load_vote_records,
    tag_tweet_stance,
)
from .model import (
    NO_STANCE,
    AssignmentSet,
    ContentionResult,
    Stance,
    StanceCounts,
    StanceSpace,
    SubpopulationFilter,
    contention_exclusive,
    contention_general,
    contention_sampled,
    max_contention,
    normalize_contention,
    restrict,
    sampled_from_counts,
)

__all__ = [
    "ALL_REGIONS",
    "AssignmentSet",
    "ContentionError",
    "ContentionResult",
    "DailySeries",
    "DaySlice",
    "NO_STANCE",
    "QuadrantPoint",
    "RegionRow",
    "RegionTable",
    "SeriesPoint",
    "Stance",
    "StanceCounts",
    "StanceLexicon",
    "StanceSpace",
    "SubpopulationFilter",
    "TweetRecord",
    "build_daily_counts",
    "contention_exclusive",
    "contention_general",
    "contention_sampled",
    "ingest_tweets",
    "load_daily_totals",
    "load_poll_topline",
    "load_quadrant_topics",
    "load_vote_records",
    "max_contention",
    "normalize_contention",
    "quadrant_points",
    "region_contention",
    "restrict",
    "sampled_from_counts",
    "tag_tweet_stance",
    "timeseries",
    "turnout_adjust",
]

__version__ = "0.1.0"
