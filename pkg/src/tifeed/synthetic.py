"""Synthetic MISP-like corpora with planted exploitation vocabulary.

Used by the demos and the acceptance suite in place of a real feed dump.
Exploitation events carry distinctive tokens (malware families, "exploit",
"ransomware", ...) and exploitation-flavoured tags; everything else is drawn
from a shared background vocabulary.
"""

from __future__ import annotations

import uuid
from typing import Optional

import numpy as np

from .ingest import IoC, Label, LabelSource, Tag, TiEvent, parse_tag, Corpus

POSITIVE_TOKENS = (
    "njrat", "darkcomet", "ransomware", "exploit", "lockbit", "remcos", "cobaltstrike",
    "webshell", "privesc", "rce", "dropper", "backdoor", "payload", "beacon",
)
BACKGROUND_TOKENS = (
    "scan", "advisory", "patch", "update", "indicator", "report", "spam", "daily", "list",
    "blocklist", "observed", "traffic", "host", "server", "activity", "domain", "campaign",
    "phishing", "email", "sender", "newsletter", "monitor", "block", "feed", "source",
    "honeypot", "ssh", "telnet", "bruteforce", "login", "attempt", "sinkhole", "dns",
    "resolver", "certificate", "page", "kit", "url", "redirect", "vendor", "notice", "weekly",
)
POSITIVE_TAGS = (
    "kill-chain:delivery", "kill-chain:command and control", "kill-chain:exploitation",
    "malware_classification:malware-category=ransomware", "sectorfinancial",
    "misp-galaxy:threat-actor=Sofacy", "misp-galaxy:tool=njRAT",
)
NEGATIVE_TAGS = (
    "type:osint", "circl:incident-classification=scan", "feed:blocklist",
    "osint:source-type=block-or-filter-list", "circl:incident-classification=spam",
)
CATEGORIES = ("network activity", "payload delivery", "external analysis")


def _event_id(rng: np.random.Generator) -> str:
    return str(uuid.UUID(int=int.from_bytes(rng.bytes(16), "big"), version=4))


def _words(rng, pool, n):
    return [pool[i] for i in rng.integers(0, len(pool), n)]


def _ioc(rng, category: str, ts: int, shared_ips, comment: Optional[str], idx: int) -> IoC:
    if category == "network activity":
        if rng.random() < 0.6:
            value, kind = shared_ips[rng.integers(len(shared_ips))], "ip-dst"
        else:
            value, kind = f"{_words(rng, BACKGROUND_TOKENS, 1)[0]}{rng.integers(1000)}.example", "domain"
    elif category == "payload delivery":
        digest = rng.bytes(32).hex()
        if rng.random() < 0.5:
            value, kind = digest, "sha256"
        else:
            value, kind = f"{_words(rng, BACKGROUND_TOKENS, 1)[0]}.exe|{digest[:32]}", "filename|md5"
    else:
        value, kind = f"https://reports.example/{rng.integers(10**6)}", "link"
    return IoC(attr_id=f"a{idx}", category=category, attr_type=kind, value=value,
               timestamp=ts, comment=comment)


def make_corpus(
    n_events: int = 2000,
    n_feeds: int = 5,
    positive_rate: float = 0.18,
    seed: int = 0,
    signal_category: Optional[str] = None,
    start_ts: int = 1_600_000_000,
    span_days: int = 730,
    noise: float = 0.03,
    planted_range: tuple[int, int] = (2, 4),
    positive_tokens: tuple[str, ...] = POSITIVE_TOKENS,
) -> Corpus:
    """Generate a labeled corpus (labels are attached with source Manual).

    Exactly ``round(positive_rate * n_events)`` events are exploitation.
    Each one gets ``planted_range`` (half-open) planted tokens. With ``signal_category`` the
    planted tokens appear only in comments of IoCs of that category (and the
    event description stays neutral); otherwise they are spread over the
    description and comments. A fraction ``noise`` of non-exploitation events
    also receives one planted token.
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(positive_rate * n_events))
    is_pos = np.zeros(n_events, dtype=bool)
    is_pos[rng.choice(n_events, n_pos, replace=False)] = True
    created = np.sort(rng.integers(start_ts, start_ts + span_days * 86400, n_events))
    feeds = [f"Feed {i + 1}" for i in range(n_feeds)]
    shared_ips = [f"198.51.{rng.integers(256)}.{rng.integers(256)}" for _ in range(400)]

    events = []
    for i in range(n_events):
        pos = bool(is_pos[i])
        ts = int(created[i])
        n_iocs = int(rng.integers(1, 7))
        cats = [CATEGORIES[j] for j in rng.integers(0, len(CATEGORIES), n_iocs)]
        if signal_category is not None and signal_category not in cats:
            cats[0] = signal_category
        planted = _words(rng, positive_tokens, int(rng.integers(*planted_range))) if pos else (
            _words(rng, positive_tokens, 1) if rng.random() < noise else [])

        info_words = _words(rng, BACKGROUND_TOKENS, int(rng.integers(3, 8)))
        comments = [" ".join(_words(rng, BACKGROUND_TOKENS, int(rng.integers(1, 4))))
                    for _ in range(n_iocs)]
        if signal_category is None:
            for w in planted:
                if rng.random() < 0.5:
                    info_words.insert(int(rng.integers(len(info_words) + 1)), w)
                else:
                    j = int(rng.integers(n_iocs))
                    comments[j] = f"{comments[j]} {w}"
        else:
            slots = [j for j, c in enumerate(cats) if c == signal_category]
            for w in planted:
                j = slots[int(rng.integers(len(slots)))]
                comments[j] = f"{comments[j]} {w}"

        attrs = tuple(
            _ioc(rng, cats[j], ts + int(rng.integers(0, 3 * 86400)), shared_ips,
                 comments[j] if rng.random() < 0.8 or planted else None, j)
            for j in range(n_iocs)
        )
        tag_pool = POSITIVE_TAGS if pos else NEGATIVE_TAGS
        tags = [parse_tag("tlp:white")] + [parse_tag(t) for t in
                                            sorted(set(_words(rng, tag_pool, int(rng.integers(1, 4)))))]
        events.append(TiEvent(
            event_id=_event_id(rng),
            feed_id=feeds[int(rng.integers(n_feeds))],
            info=" ".join(info_words).capitalize(),
            created_ts=ts,
            modified_ts=max([ts] + [a.timestamp for a in attrs]),
            threat_level=int(rng.integers(1, 5)),
            tags=tuple(tags),
            attributes=attrs,
            label=Label.EXPLOITATION if pos else Label.NON_EXPLOITATION,
            label_source=LabelSource.MANUAL,
        ))
    return Corpus.from_events(events)
