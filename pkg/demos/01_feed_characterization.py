"""Characterizing a set of threat-intelligence feeds.

Builds a synthetic corpus, then looks at how the feeds differ in size,
how much their spatial indicators (IPs and file hashes) overlap, and which
feeds tend to publish a shared indicator first.
"""

import numpy as np

from tifeed.charstats import (
    category_contribution,
    comment_stats,
    feed_summary,
    iocs_per_event_cdf,
    ioc_flow,
    pairwise_overlap,
)
from tifeed.synthetic import make_corpus

corpus = make_corpus(600, n_feeds=4, seed=7)
print(f"{len(corpus.events)} events from {len(corpus.feeds)} feeds\n")

# per-feed volume and the category each feed mostly reports
for s in feed_summary(corpus):
    cat, pct = s.dominant_category
    print(f"{s.feed_id:8s} events={s.event_count:4d} iocs/event={s.avg_iocs_per_event:5.2f} "
          f"span={s.avg_event_timespan_days:4.2f}d  top category: {cat} ({pct:.0f}%)")

# how much of each category comes from which feed
print()
for feed, category, pct in category_contribution(corpus)[:6]:
    print(f"{category:18s} {feed:8s} {pct:5.1f}%")

# how often analysts leave comments on indicators
print()
for feed, c in sorted(comment_stats(corpus).items()):
    print(f"{feed:8s} commented iocs {c.pct_iocs_with_comment:5.1f}%  "
          f"mean comment length {c.avg_comment_len:4.1f} chars")

# distribution of indicators per event for one feed
feed = sorted(corpus.feeds)[0]
points = iocs_per_event_cdf(corpus, feed).points
print(f"\nCDF of IoCs per event in {feed}:", ", ".join(f"{x}:{f:.2f}" for x, f in points))

# overlap: fraction of a feed's shared indicators that also appear in another feed
overlap = pairwise_overlap(corpus)
print("\noverlap (row feed vs column feed)")
print("         " + " ".join(f"{f:>8s}" for f in overlap.feeds))
for f, row in zip(overlap.feeds, overlap.values):
    print(f"{f:8s} " + " ".join("     n/a" if np.isnan(v) else f"{v:8.2f}" for v in row))

# flow: who reports a common indicator first
flow = ioc_flow(corpus)
print("\nshare of common indicators each feed published first")
for f in sorted(corpus.feeds):
    share = flow.source_share(f)
    print(f"{f:8s} {'n/a' if share is None else f'{share:.2f}'}")
