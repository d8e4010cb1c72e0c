"""Extending a small set of manual labels with mined tag rules.

A handful of events carry analyst labels. Association rules between tags and
the exploitation class are mined from them and then applied to the rest of
the corpus. The mined labels are compared with the generator's ground truth.
"""

from tifeed.ingest import Label
from tifeed.labeler import MiningParams, label_corpus, mine_rules
from tifeed.synthetic import make_corpus

corpus = make_corpus(1000, seed=3)
truth = {e.event_id: e.label for e in corpus.events}

# pretend only the first 150 events were reviewed by hand
manual = {e.event_id: e.label for e in corpus.events[:150]}
reviewed = [e for e in corpus.events if e.event_id in manual]

rules = mine_rules(reviewed, MiningParams(min_support=0.01, min_confidence=0.8, min_lift=1.2))
print(f"{len(rules)} rules mined; strongest:")
for r in rules.rules[:5]:
    print(f"  {' & '.join(sorted(r.antecedent)):45s} conf={r.confidence:.2f} lift={r.lift:.2f}")

labeled, report = label_corpus(corpus, manual, rules)
print(f"\nlabel distribution: {report.counts}")
print(f"label sources: {report.source_counts}")

unseen = [e for e in labeled.events if e.event_id not in manual]
agree = sum(e.label is truth[e.event_id] for e in unseen)
print(f"\nagreement with ground truth on {len(unseen)} unreviewed events: {agree / len(unseen):.1%}")
missed = sum(truth[e.event_id] is Label.EXPLOITATION and e.label is not Label.EXPLOITATION
             for e in unseen)
print(f"exploitation events the rules did not catch: {missed}")
