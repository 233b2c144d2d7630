"""Command-line entry point.

Subcommands wire ingestion to analytics with reproducible output:

- ``poll``      poll topline CSV -> per-topic contention table
- ``votes``     regional vote CSV -> per-region contention table
- ``tweets``    JSONL tweet shards + hashtag lexicon -> daily timeseries
- ``quadrant``  topics with importance ratings -> quadrant points

Exit codes: 0 success, 2 data contract violation (a JSON error record is
written to stderr), 64 usage error.  Identical inputs and flags (seed
included) produce byte-identical output; results keep full precision
internally and are rounded only when printed (``--precision``, default 6).
Output is plain text, never colorized, so NO_COLOR needs no handling.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence, TextIO

from . import analytics, ingest
from .errors import ConfigError, ContentionError, EmptyInput
from .model import contention_exclusive, sampled_from_counts

EX_OK = 0
EX_DATA = 2
EX_USAGE = 64

_DEFAULTS: dict[str, Any] = {
    "out": None,
    "json": False,
    "precision": 6,
    "threads": 1,
    "normalize": "declared",
    "samples": None,
    "seed": 0,
    "turnout": "ballots",
    "lexicon": None,
    "totals": None,
    "by_user": False,
    "error_budget": 0.001,
    "importance_scale": None,
}

_SCHEMA_NOTES = """\
file schemas (UTF-8 CSV with RFC-4180 quoting unless noted):
  poll topline    header `topic,stance,count` or `topic,stance,percent,total`;
                  stance `__none__` is the no-answer row
  vote records    header `region,option,count`; option literals `__eligible__`
                  (eligible population), `__rejected__` (rejected ballots),
                  `__none__` (ballots counted as no stance)
  tweet stream    JSON lines: {"id", "ts" (ISO-8601, UTC or offset),
                  "user", "hashtags" (no '#')}
  stance lexicon  JSON: {"topic", "stances": [{"id", "label", "hashtags"}]}
  daily totals    header `date,total`, dates YYYY-MM-DD
  quadrant input  header `topic,stance,count,importance`

output schemas:
  poll      `topic,n,k,raw,normalized`
  votes     `region,n,k,raw,normalized`
  tweets    `date,n_all,n_stanced,k,raw_all,norm_all,raw_stanced,norm_stanced`
  quadrant  `topic,contention,importance`
"""


class _UsageError(Exception):
    """Missing required flag detected after config merging."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems with exit status 64."""

    def error(self, message: str):  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="contention",
        description="Population-dependent contention over polls, votes, and tweet streams.",
        epilog=_SCHEMA_NOTES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="cmd", metavar="{poll,votes,tweets,quadrant}")

    def shared(p: argparse.ArgumentParser, sampled: bool = False) -> None:
        p.add_argument("--out", help="write records here instead of stdout")
        p.add_argument("--json", action=argparse.BooleanOptionalAction,
                       help="emit JSON-lines instead of CSV (default: CSV)")
        p.add_argument("--precision", type=int,
                       help="decimals for printed scores (default: 6)")
        p.add_argument("--threads", type=int,
                       help="worker threads for sharded ingestion (default: 1)")
        p.add_argument("--normalize", choices=("declared", "observed"),
                       help="normalize by the declared stance count or only the "
                            "observed nonzero one (default: declared)")
        p.add_argument("--config",
                       help="JSON file mirroring these flags; explicit flags win")
        if sampled:
            p.add_argument("--samples", type=int,
                           help="estimate by Monte Carlo with this many pair draws "
                                "instead of the closed form")
            p.add_argument("--seed", type=int,
                           help="RNG seed for --samples (default: 0)")

    p_poll = sub.add_parser(
        "poll", help="contention per poll topic",
        description="Compute contention for each topic in a poll topline CSV.",
        epilog=_SCHEMA_NOTES, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_poll.add_argument("input", help="poll topline CSV")
    shared(p_poll, sampled=True)

    p_votes = sub.add_parser(
        "votes", help="contention per voting region",
        description="Compute contention per region (plus the __all__ aggregate) "
                    "from vote records.",
        epilog=_SCHEMA_NOTES, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_votes.add_argument("input", help="vote records CSV")
    p_votes.add_argument("--turnout", choices=("ballots", "eligible"),
                         help="ballots: no-stance = rejected/__none__ ballots; "
                              "eligible: no-stance = eligible population minus valid "
                              "votes (default: ballots)")
    shared(p_votes, sampled=True)

    p_tweets = sub.add_parser(
        "tweets", help="daily contention timeseries from tweet shards",
        description="Tag tweets against a stance hashtag lexicon and emit the "
                    "daily contention timeseries (all-tweets and stance-holders "
                    "variants).  A summary block goes to stderr.",
        epilog=_SCHEMA_NOTES, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_tweets.add_argument("inputs", nargs="+", metavar="shard.jsonl",
                          help="one or more JSONL tweet shards")
    p_tweets.add_argument("--lexicon", help="stance lexicon JSON (required)")
    p_tweets.add_argument("--totals",
                          help="daily totals CSV supplying the no-stance baseline")
    p_tweets.add_argument("--by-user", dest="by_user",
                          action=argparse.BooleanOptionalAction,
                          help="count distinct users instead of tweets; users who "
                               "post conflicting stances in the window are dropped "
                               "from every group")
    p_tweets.add_argument("--error-budget", dest="error_budget", type=float,
                          help="max tolerated fraction of unparseable lines "
                               "(default: 0.001)")
    shared(p_tweets)

    p_quad = sub.add_parser(
        "quadrant", help="contention-vs-importance points",
        description="Place topics on the contention x importance plane; importance "
                    "is rescaled linearly from the declared source scale to [0,1].",
        epilog=_SCHEMA_NOTES, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_quad.add_argument("input", help="quadrant topics CSV")
    p_quad.add_argument("--importance-scale", dest="importance_scale", nargs=2,
                        type=float, metavar=("LO", "HI"),
                        help="bounds of the source's importance rating scale "
                             "(required; e.g. 0 10)")
    shared(p_quad)

    return parser


def _load_config(path: str) -> dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    cfg = {}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest not in _DEFAULTS:
            raise ConfigError(f"config {path}: unknown key {key!r}")
        cfg[dest] = value
    return cfg


def _effective(args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        merged.update(_load_config(args.config))
    for key, value in vars(args).items():
        if key in merged and value is not None:
            merged[key] = value
    if int(merged["precision"]) < 0:
        raise _UsageError("--precision must be >= 0")
    if int(merged["threads"]) < 1:
        raise _UsageError("--threads must be >= 1")
    if merged["normalize"] not in ("declared", "observed"):
        raise _UsageError(f"--normalize must be 'declared' or 'observed', got {merged['normalize']!r}")
    if merged["turnout"] not in ("ballots", "eligible"):
        raise _UsageError(f"--turnout must be 'ballots' or 'eligible', got {merged['turnout']!r}")
    return merged


# -- output -----------------------------------------------------------------------

def _fmt(value: Any, precision: int) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.{precision}f}"
    return str(value)


def _write_records(records: list[dict[str, Any]], cfg: Mapping[str, Any]) -> None:
    precision = int(cfg["precision"])

    def emit(handle: TextIO) -> None:
        if cfg["json"]:
            for record in records:
                rounded = {
                    key: (round(v, precision) if isinstance(v, float) else v)
                    for key, v in record.items()
                }
                handle.write(json.dumps(rounded) + "\n")
        else:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(records[0].keys())
            for record in records:
                writer.writerow(_fmt(v, precision) for v in record.values())

    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8", newline="") as handle:
            emit(handle)
    else:
        emit(sys.stdout)


def _emit_error(exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


def _score(counts, cfg: Mapping[str, Any]):
    if cfg.get("samples"):
        return sampled_from_counts(
            counts, int(cfg["samples"]), int(cfg["seed"]), k_mode=cfg["normalize"]
        )
    return contention_exclusive(counts, k_mode=cfg["normalize"])


# -- subcommands --------------------------------------------------------------------

def cmd_poll(args: argparse.Namespace) -> int:
    cfg = _effective(args)
    records = []
    for topic, counts in ingest.load_poll_topline(args.input):
        result = _score(counts, cfg)
        records.append({
            "topic": topic,
            "n": result.population,
            "k": result.k,
            "raw": result.raw,
            "normalized": result.normalized,
        })
    _write_records(records, cfg)
    return EX_OK


def cmd_votes(args: argparse.Namespace) -> int:
    cfg = _effective(args)
    mode = {"ballots": "ballots-only", "eligible": "eligible-population"}[cfg["turnout"]]
    table = ingest.load_vote_records(args.input, mode)
    if cfg.get("samples"):
        scored = [
            (row.region, _score(row.counts, cfg))
            for row in sorted(table.rows, key=lambda r: r.region)
        ]
    else:
        scored = analytics.region_contention(table, k_mode=cfg["normalize"])
    records = [
        {
            "region": region,
            "n": result.population,
            "k": result.k,
            "raw": result.raw,
            "normalized": result.normalized,
        }
        for region, result in scored
    ]
    _write_records(records, cfg)
    return EX_OK


def cmd_tweets(args: argparse.Namespace) -> int:
    cfg = _effective(args)
    if not cfg["lexicon"]:
        raise _UsageError("tweets requires --lexicon")
    lexicon = ingest.StanceLexicon.from_json(cfg["lexicon"])
    totals = ingest.load_daily_totals(cfg["totals"]) if cfg["totals"] else None
    series, stats = ingest.ingest_tweets(
        args.inputs,
        lexicon,
        totals,
        mode="user" if cfg["by_user"] else "tweet",
        threads=int(cfg["threads"]),
        error_budget=float(cfg["error_budget"]),
    )
    if not series.days:
        raise EmptyInput("no parseable tweets and no daily totals")
    points = analytics.timeseries(series, k_mode=cfg["normalize"])
    records = [
        {
            "date": p.date.isoformat(),
            "n_all": p.n_all,
            "n_stanced": p.n_stanced,
            "k": p.k,
            "raw_all": p.raw_all,
            "norm_all": p.norm_all,
            "raw_stanced": p.raw_stanced,
            "norm_stanced": p.norm_stanced,
        }
        for p in points
    ]
    _write_records(records, cfg)

    error_pct = 100.0 * stats.parse_errors / stats.lines if stats.lines else 0.0
    print(f"# tweets: {stats.parsed} parsed, {stats.parse_errors} parse errors "
          f"({error_pct:.2f}%)", file=sys.stderr)
    tagged = " ".join(
        f"{s.id}={stats.tagged.get(s.id, 0)}" for s in lexicon.stances
    )
    print(f"# tagged: {tagged}", file=sys.stderr)
    print(f"# days: {len(series.days)}", file=sys.stderr)
    return EX_OK


def cmd_quadrant(args: argparse.Namespace) -> int:
    cfg = _effective(args)
    if not cfg["importance_scale"]:
        raise _UsageError("quadrant requires --importance-scale LO HI")
    scale = [float(v) for v in cfg["importance_scale"]]
    rows = ingest.load_quadrant_topics(args.input)
    points, _ = analytics.quadrant_points(rows, scale, k_mode=cfg["normalize"])
    records = [
        {"topic": p.topic, "contention": p.contention, "importance": p.importance}
        for p in points
    ]
    _write_records(records, cfg)
    return EX_OK


_COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "poll": cmd_poll,
    "votes": cmd_votes,
    "tweets": cmd_tweets,
    "quadrant": cmd_quadrant,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.cmd:
        parser.error("a subcommand is required")
    try:
        return _COMMANDS[args.cmd](args)
    except _UsageError as exc:
        parser.error(str(exc))
        return EX_USAGE  # unreachable; parser.error exits
    except (ContentionError, OSError) as exc:
        _emit_error(exc)
        return EX_DATA


if __name__ == "__main__":
    sys.exit(main())
