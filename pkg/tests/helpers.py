"""Small constructors shared by the test modules."""

from __future__ import annotations

import numpy as np

from tifeed.ingest import IoC, Label, LabelSource, TiEvent, parse_tag, Corpus


def ioc(value="198.51.100.7", ts=1000, category="network activity", attr_type="ip-dst",
        comment=None, attr_id="a"):
    return IoC(attr_id=attr_id, category=category, attr_type=attr_type, value=value,
               timestamp=ts, comment=comment)


def event(event_id="e1", feed="Feed A", ts=1000, info="", tags=(), attrs=(), label=None,
          label_source=None):
    if label is not None and label_source is None:
        label_source = LabelSource.MANUAL
    return TiEvent(
        event_id=event_id,
        feed_id=feed,
        info=info,
        created_ts=ts,
        modified_ts=max([ts] + [a.timestamp for a in attrs]),
        threat_level=None,
        tags=tuple(parse_tag(t) for t in tags),
        attributes=tuple(attrs),
        label=label,
        label_source=label_source or LabelSource.UNLABELED,
    )


def labeled(event_id, tags, positive, ts=0):
    return event(event_id, ts=ts, tags=tags,
                 label=Label.EXPLOITATION if positive else Label.NON_EXPLOITATION)


def misp_doc(uuid="e1", org="Feed A", info="test event", ts="1000", tags=("tlp:white",),
             attrs=None):
    if attrs is None:
        attrs = [{"uuid": "a1", "category": "payload delivery", "type": "sha256",
                  "value": "ab" * 32, "timestamp": "1000", "comment": ""}]
    return {"Event": {"uuid": uuid, "Orgc": {"name": org}, "info": info, "timestamp": ts,
                      "Tag": [{"name": t} for t in tags], "Attribute": attrs}}


def random_spatial_corpus(rng: np.random.Generator, n_feeds=None, n_events=None):
    """Random corpus whose IoCs draw from a small shared pool of IPs and hashes."""
    n_feeds = n_feeds or int(rng.integers(2, 6))
    n_events = n_events or int(rng.integers(n_feeds, 16))
    pool = [f"10.0.0.{i}" for i in range(6)] + [f"{i:064x}" for i in range(4)]
    events = []
    for e in range(n_events):
        feed = f"F{int(rng.integers(n_feeds))}"
        attrs = []
        for j in range(int(rng.integers(0, 5))):
            v = pool[int(rng.integers(len(pool)))]
            kind = "sha256" if len(v) == 64 else "ip-dst"
            attrs.append(ioc(value=v, attr_type=kind, ts=int(rng.integers(0, 5)) * 100,
                             attr_id=f"a{j}"))
        if rng.random() < 0.3:
            attrs.append(ioc(value="example.org", attr_type="domain", attr_id="d"))
        events.append(event(f"e{e:03d}", feed=feed, ts=int(rng.integers(0, 1000)), attrs=attrs))
    return Corpus.from_events(events)
