"""Feed characterization: per-feed summaries, IoC-count CDFs, comment
statistics, pairwise IoC overlap and IoC flow between feeds."""

from __future__ import annotations

import csv
import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import UnknownFeed
from .ingest import Corpus, IoC, TiEvent

SECONDS_PER_DAY = 86400.0

#: attribute types whose values take part in overlap and flow analysis
SPATIAL_TYPES = frozenset({"ip-src", "ip-dst", "md5", "sha1", "sha256"})
HASH_TYPES = frozenset({"md5", "sha1", "sha256"})


@dataclass(frozen=True)
class FeedStats:
    feed_id: str
    event_count: int
    ioc_count: int
    avg_iocs_per_event: float
    avg_event_timespan_days: float
    dominant_category: Optional[tuple[str, float]]


@dataclass(frozen=True)
class CommentStats:
    pct_events_with_commented_ioc: float
    pct_iocs_with_comment: float
    avg_comment_len: float


@dataclass(frozen=True)
class CdfSeries:
    points: tuple[tuple[int, float], ...]


@dataclass
class OverlapMatrix:
    """``values[i, j]`` is NaN where the overlap is undefined (incl. the diagonal)."""

    feeds: list[str]
    values: np.ndarray
    scope: frozenset[str] = SPATIAL_TYPES

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.feeds.index(a), self.feeds.index(b)])


@dataclass
class FlowGraph:
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    simultaneous: dict[tuple[str, str], int] = field(default_factory=dict)

    def source_share(self, feed: str) -> Optional[float]:
        """Fraction of a feed's directed common-IoC edges where it is the source."""
        out = sum(c for (s, _), c in self.edges.items() if s == feed)
        inc = sum(c for (_, t), c in self.edges.items() if t == feed)
        return out / (out + inc) if out + inc else None


def event_timespan(event: TiEvent) -> float:
    if len(event.attributes) < 2:
        return 0.0
    ts = [a.timestamp for a in event.attributes]
    return (max(ts) - min(ts)) / SECONDS_PER_DAY


def _events_by_feed(corpus: Corpus) -> dict[str, list[TiEvent]]:
    groups = defaultdict(list)
    for ev in corpus.events:
        groups[ev.feed_id].append(ev)
    return groups


def feed_summary(corpus: Corpus) -> list[FeedStats]:
    """One record per feed, ordered by IoC count (descending, then feed id)."""
    out = []
    for feed, events in _events_by_feed(corpus).items():
        n_iocs = sum(len(e.attributes) for e in events)
        cats = Counter(a.category for e in events for a in e.attributes)
        dominant = None
        if cats:
            # mode; equal counts resolved by category name
            name, count = min(cats.items(), key=lambda kv: (-kv[1], kv[0]))
            dominant = (name, 100.0 * count / n_iocs)
        out.append(
            FeedStats(
                feed_id=feed,
                event_count=len(events),
                ioc_count=n_iocs,
                avg_iocs_per_event=n_iocs / len(events),
                avg_event_timespan_days=float(np.mean([event_timespan(e) for e in events])),
                dominant_category=dominant,
            )
        )
    out.sort(key=lambda s: (-s.ioc_count, s.feed_id))
    return out


def category_contribution(corpus: Corpus) -> list[tuple[str, str, float]]:
    """Rows ``(category, feed, percent of that category's IoCs)``."""
    counts = defaultdict(Counter)
    for ev in corpus.events:
        for a in ev.attributes:
            counts[a.category][ev.feed_id] += 1
    rows = []
    for cat in sorted(counts):
        total = sum(counts[cat].values())
        for feed in sorted(counts[cat]):
            rows.append((cat, feed, 100.0 * counts[cat][feed] / total))
    return rows


def _has_comment(ioc: IoC) -> bool:
    return bool(ioc.comment and ioc.comment.strip())


def comment_stats(corpus: Corpus) -> dict[str, CommentStats]:
    out = {}
    for feed, events in sorted(_events_by_feed(corpus).items()):
        iocs = [a for e in events for a in e.attributes]
        comments = [a.comment for a in iocs if _has_comment(a)]
        with_comment = sum(1 for e in events if any(_has_comment(a) for a in e.attributes))
        out[feed] = CommentStats(
            pct_events_with_commented_ioc=100.0 * with_comment / len(events),
            pct_iocs_with_comment=100.0 * len(comments) / len(iocs) if iocs else 0.0,
            avg_comment_len=float(np.mean([len(c) for c in comments])) if comments else 0.0,
        )
    return out


def iocs_per_event_cdf(corpus: Corpus, feed: str) -> CdfSeries:
    counts = [len(e.attributes) for e in corpus.events if e.feed_id == feed]
    if not counts:
        raise UnknownFeed(f"feed {feed!r} not in corpus")
    xs, freq = np.unique(counts, return_counts=True)
    cum = np.cumsum(freq)
    n = cum[-1]
    # last point is n/n == 1.0 exactly
    return CdfSeries(tuple((int(x), float(c / n)) for x, c in zip(xs, cum)))


def spatial_key(ioc: IoC) -> Optional[str]:
    """Dedup key for overlap/flow, or None when the IoC is out of scope."""
    t = ioc.attr_type.lower()
    if t in SPATIAL_TYPES:
        return ioc.value.strip().lower()
    if "|" in t:
        left, right = t.split("|", 1)
        if right in HASH_TYPES and "|" in ioc.value:
            return ioc.value.rsplit("|", 1)[1].strip().lower()
    return None


def feed_value_sets(corpus: Corpus) -> dict[str, set[str]]:
    sets = defaultdict(set)
    for ev in corpus.events:
        sets[ev.feed_id]
        for a in ev.attributes:
            key = spatial_key(a)
            if key:
                sets[ev.feed_id].add(key)
    return dict(sets)


def pairwise_overlap(corpus: Corpus, exclude_column_feed: bool = False) -> OverlapMatrix:
    """Share of feed i's cross-feed-shared values that feed j also holds.

    The denominator is the set of feed i's values held by any other feed.
    ``exclude_column_feed`` switches to the alternative normalisation that
    also drops feed j from that union; it can exceed 1.
    """
    sets = feed_value_sets(corpus)
    feeds = sorted(corpus.feeds)
    n = len(feeds)
    vals = np.full((n, n), np.nan)
    for i, fi in enumerate(feeds):
        inter = [sets[fi] & sets[fk] if k != i else set() for k, fk in enumerate(feeds)]
        shared = set().union(*inter) if inter else set()
        for j in range(n):
            if j == i:
                continue
            if exclude_column_feed:
                denom = set().union(*(s for k, s in enumerate(inter) if k not in (i, j)))
            else:
                denom = shared
            if denom:
                vals[i, j] = len(inter[j]) / len(denom)
    return OverlapMatrix(feeds=feeds, values=vals)


def ioc_flow(corpus: Corpus) -> FlowGraph:
    """Direct an edge from the feed that first published a shared value to each later one."""
    first_seen = defaultdict(dict)  # value -> feed -> earliest ts
    for ev in corpus.events:
        for a in ev.attributes:
            key = spatial_key(a)
            if key is None:
                continue
            prev = first_seen[key].get(ev.feed_id)
            if prev is None or a.timestamp < prev:
                first_seen[key][ev.feed_id] = a.timestamp
    graph = FlowGraph()
    for holders in first_seen.values():
        if len(holders) < 2:
            continue
        for a, b in itertools.combinations(sorted(holders), 2):
            ta, tb = holders[a], holders[b]
            if ta == tb:
                graph.simultaneous[(a, b)] = graph.simultaneous.get((a, b), 0) + 1
            else:
                edge = (a, b) if ta < tb else (b, a)
                graph.edges[edge] = graph.edges.get(edge, 0) + 1
    graph.edges = dict(sorted(graph.edges.items()))
    graph.simultaneous = dict(sorted(graph.simultaneous.items()))
    return graph


def _header(fh, header):
    for line in header or ():
        fh.write(f"# {line}\n")


def write_feed_summary_csv(stats: list[FeedStats], path, header=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _header(fh, header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feed_id", "event_count", "ioc_count", "avg_iocs_per_event",
                    "avg_event_timespan_days", "dominant_category", "dominant_category_pct"])
        for s in stats:
            cat, pct = s.dominant_category if s.dominant_category else ("NA", None)
            w.writerow([s.feed_id, s.event_count, s.ioc_count, f"{s.avg_iocs_per_event:.1f}",
                        f"{s.avg_event_timespan_days:.2f}", cat,
                        "NA" if pct is None else f"{pct:.2f}"])


def write_overlap_csv(matrix: OverlapMatrix, path, header=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _header(fh, header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feed"] + matrix.feeds)
        for i, feed in enumerate(matrix.feeds):
            w.writerow([feed] + ["NA" if np.isnan(v) else repr(float(v)) for v in matrix.values[i]])


def write_flow_csv(graph: FlowGraph, path, header=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _header(fh, header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "sink", "count"])
        for (s, t), c in graph.edges.items():
            w.writerow([s, t, c])
