"""Label bootstrapping: tag-set -> Exploitation association rules mined with
Apriori on manually labeled events, then propagated to the rest of a corpus.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Optional

from .errors import NoPositives, UnknownEventId
from .ingest import Corpus, Label, LabelSource, Tag, TiEvent

logger = logging.getLogger(__name__)

DEFAULT_EXCLUDED_NAMESPACES = frozenset({"tlp"})


@dataclass(frozen=True)
class AssociationRule:
    antecedent: frozenset[str]
    support: float
    confidence: float
    lift: float

    def sort_key(self):
        return (-self.confidence, -self.lift, tuple(sorted(self.antecedent)))

    def to_dict(self) -> dict:
        return {
            "antecedent": sorted(self.antecedent),
            "support": self.support,
            "confidence": self.confidence,
            "lift": self.lift,
        }


@dataclass(frozen=True)
class MiningParams:
    min_support: float = 0.001
    min_confidence: float = 0.5
    min_lift: float = 1.0
    max_antecedent: Optional[int] = 4


@dataclass
class RuleSet:
    rules: list[AssociationRule]
    mining_params: MiningParams = field(default_factory=MiningParams)
    excluded_namespaces: frozenset[str] = DEFAULT_EXCLUDED_NAMESPACES
    positive_prior: Optional[float] = None

    def __len__(self):
        return len(self.rules)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.rules)

    @classmethod
    def from_jsonl(cls, text: str, excluded_namespaces=DEFAULT_EXCLUDED_NAMESPACES) -> "RuleSet":
        rules = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if "meta" in d:
                continue
            rules.append(AssociationRule(
                frozenset(canonical_tag(t) for t in d["antecedent"]),
                float(d["support"]), float(d["confidence"]), float(d["lift"]),
            ))
        rules.sort(key=AssociationRule.sort_key)
        return cls(rules=rules, excluded_namespaces=frozenset(excluded_namespaces))


@dataclass(frozen=True)
class LabelReport:
    counts: dict[str, int]
    source_counts: dict[str, int]
    feed_exploitation_fraction: dict[str, float]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def fraction(self, label: Label) -> float:
        return self.counts.get(label.value, 0) / self.total if self.total else 0.0


def canonical_tag(raw: str) -> str:
    return raw.strip().lower()


def filter_tags(tags: Iterable[Tag], excluded_namespaces=DEFAULT_EXCLUDED_NAMESPACES) -> list[Tag]:
    excluded = {ns.lower() for ns in excluded_namespaces}
    return [t for t in tags if t.namespace.lower() not in excluded]


def event_items(event: TiEvent, excluded_namespaces=DEFAULT_EXCLUDED_NAMESPACES) -> frozenset[str]:
    return frozenset(t.canonical() for t in filter_tags(event.tags, excluded_namespaces))


def _passes(count_both: int, count_ante: int, n: int, n_pos: int, p: MiningParams) -> bool:
    # exact rational comparison so rules sitting on a threshold are kept deterministically
    return (
        Fraction(count_both, n) >= Fraction(p.min_support)
        and Fraction(count_both, count_ante) >= Fraction(p.min_confidence)
        and Fraction(count_both * n, count_ante * n_pos) >= Fraction(p.min_lift)
    )


def mine_rules(
    labeled: Iterable[TiEvent],
    params: MiningParams = MiningParams(),
    excluded_namespaces=DEFAULT_EXCLUDED_NAMESPACES,
    labels: Optional[Mapping[str, Label]] = None,
) -> RuleSet:
    """Apriori over tag transactions, keeping rules ``tags -> Exploitation``.

    The class is treated as an extra item in each transaction, so only
    itemsets containing it are grown: the frequent-set search runs level-wise
    over the positive transactions, pruning any candidate with an infrequent
    subset. Events whose tag set is empty after filtering are skipped.
    ``labels`` overrides ``event.label`` when given.
    """
    transactions = []
    for ev in labeled:
        label = labels[ev.event_id] if labels is not None else ev.label
        if label is None:
            raise ValueError(f"event {ev.event_id} has no label")
        items = event_items(ev, excluded_namespaces)
        if not items:
            logger.warning("event %s: empty transaction after tag filtering, ignored", ev.event_id)
            continue
        transactions.append((items, label is Label.EXPLOITATION))

    n = len(transactions)
    positives = [items for items, pos in transactions if pos]
    n_pos = len(positives)
    if n_pos == 0:
        raise NoPositives("no Exploitation-labeled events to mine from")

    min_count = Fraction(params.min_support) * n
    max_len = params.max_antecedent

    # level 1
    c1 = Counter(t for items in positives for t in items)
    frequent = {frozenset([t]): c for t, c in c1.items() if c >= min_count}
    all_frequent = dict(frequent)
    size = 1
    while frequent and (max_len is None or size < max_len):
        size += 1
        prev = sorted(tuple(sorted(s)) for s in frequent)
        prev_set = set(frequent)
        candidates = set()
        for i, a in enumerate(prev):
            for b in prev[i + 1:]:
                if a[:-1] != b[:-1]:
                    break
                cand = frozenset(a) | {b[-1]}
                if all(cand - {x} in prev_set for x in cand):
                    candidates.add(cand)
        counts = Counter()
        for items in positives:
            if len(items) < size:
                continue
            for cand in candidates:
                if cand <= items:
                    counts[cand] += 1
        frequent = {c: k for c, k in counts.items() if k >= min_count}
        all_frequent.update(frequent)

    ante_counts = Counter()
    for items, _ in transactions:
        for s in all_frequent:
            if s <= items:
                ante_counts[s] += 1

    rules = []
    for s, both in all_frequent.items():
        ante = ante_counts[s]
        if not _passes(both, ante, n, n_pos, params):
            continue
        conf = both / ante
        rules.append(AssociationRule(
            antecedent=s,
            support=both / n,
            confidence=conf,
            lift=conf / (n_pos / n),
        ))
    rules.sort(key=AssociationRule.sort_key)
    return RuleSet(rules=rules, mining_params=params,
                   excluded_namespaces=frozenset(excluded_namespaces),
                   positive_prior=n_pos / n)


def apply_rules(event: TiEvent, rules: RuleSet) -> Label:
    items = event_items(event, rules.excluded_namespaces)
    for r in rules.rules:
        if r.antecedent <= items:
            return Label.EXPLOITATION
    return Label.NON_EXPLOITATION


def label_report(corpus: Corpus) -> LabelReport:
    counts = Counter()
    sources = Counter()
    per_feed = defaultdict(lambda: [0, 0])
    for ev in corpus.events:
        if ev.label is not None:
            counts[ev.label.value] += 1
        sources[ev.label_source.value] += 1
        per_feed[ev.feed_id][1] += 1
        if ev.label is Label.EXPLOITATION:
            per_feed[ev.feed_id][0] += 1
    return LabelReport(
        counts={lab.value: counts.get(lab.value, 0) for lab in Label},
        source_counts={s.value: sources.get(s.value, 0) for s in LabelSource},
        feed_exploitation_fraction={f: p / t for f, (p, t) in sorted(per_feed.items())},
    )


def label_corpus(corpus: Corpus, manual: Mapping[str, Label], rules: RuleSet):
    """Return ``(labeled_corpus, report)``; manual labels outrank rule matches."""
    ids = {e.event_id for e in corpus.events}
    missing = sorted(set(manual) - ids)
    if missing:
        raise UnknownEventId(f"manual labels reference unknown events: {missing[:5]}")
    events = []
    for ev in corpus.events:
        if ev.event_id in manual:
            ev = replace(ev, label=manual[ev.event_id], label_source=LabelSource.MANUAL)
        else:
            ev = replace(ev, label=apply_rules(ev, rules), label_source=LabelSource.RULE_MINED)
        events.append(ev)
    out = Corpus(events=tuple(events), feeds=corpus.feeds,
                 failures=corpus.failures, warnings=corpus.warnings)
    return out, label_report(out)


def attach_labels(corpus: Corpus, labels: Mapping[str, Label],
                  source: LabelSource = LabelSource.MANUAL) -> Corpus:
    """Set labels on the events listed in ``labels``; others are left untouched."""
    missing = sorted(set(labels) - {e.event_id for e in corpus.events})
    if missing:
        raise UnknownEventId(f"labels reference unknown events: {missing[:5]}")
    events = tuple(
        replace(e, label=labels[e.event_id], label_source=source) if e.event_id in labels else e
        for e in corpus.events
    )
    return Corpus(events=events, feeds=corpus.feeds, failures=corpus.failures, warnings=corpus.warnings)


def read_labels_csv(path) -> dict[str, Label]:
    """Read ``event_id,label`` rows; ``#`` lines and a header row are skipped."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        for row in rows:
            if not row or row == ["event_id", "label"]:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: expected 'event_id,label', got {row!r}")
            out[row[0]] = Label.parse(row[1])
    return out


def write_labels_csv(labels: Mapping[str, Label], path, header=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_id", "label"])
        for eid, lab in labels.items():
            w.writerow([eid, lab.value])
