"""Which indicator category carries the signal?

In this corpus the telltale words for exploitation events only ever appear in
comments on network-activity indicators. Rebuilding the text from one category
at a time shows that only that category supports a useful classifier.
"""

from tifeed.harness import ClassifierConfig, ExperimentConfig, FeatureConfig, feature_ablation, run_experiment
from tifeed.synthetic import CATEGORIES, make_corpus

corpus = make_corpus(1100, seed=5, signal_category="network activity", planted_range=(3, 6))
config = ExperimentConfig(
    features=FeatureConfig(kind="binary", top_k=300),
    classifier=ClassifierConfig(kind="cart", max_depth=4),
)

full = run_experiment(corpus, config)
print(f"{'all text':20s} F1 {full.avg_f1:.2f}")
for category in CATEGORIES:
    report = feature_ablation(corpus, config, category)
    avg = "NaN" if report.avg_f1 is None else f"{report.avg_f1:.2f}"
    print(f"{category:20s} F1 {avg}")
