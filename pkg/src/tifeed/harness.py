"""Temporal and temporal+spatial evaluation.

The time-sorted corpus is cut into ``k`` contiguous windows of (near) equal
event count. Split ``i`` tests on window ``i + 1`` and trains either on
window ``i`` (equal window) or on windows ``1..i`` (aggregate window). With
an omitted feed, training never sees that feed and testing sees only it.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .classifiers import predict, train
from .errors import (
    ConfigError,
    LengthMismatch,
    MissingVector,
    TooFewEvents,
    UnknownCategory,
    UnlabeledEvent,
)
from .features import (
    BagOfWords,
    ExternalFeaturizer,
    FeatureKind,
    Ti2VecFeaturizer,
    import_external_vectors,
)
from .ingest import Corpus
from .textprep import ALL_SOURCES, ENGLISH_STOPWORDS, Source, build_docs
from .ti2vec import Hyper

DEFAULT_K = 11


class SplitMode(enum.Enum):
    EQUAL = "equal"
    AGGREGATE = "aggregate"


@dataclass(frozen=True)
class SplitPlan:
    k: int
    bounds: tuple[tuple[int, int], ...]  # half-open index ranges into the sorted corpus
    event_ids: tuple[str, ...]
    feed_ids: tuple[str, ...]

    @property
    def sizes(self) -> list[int]:
        return [b - a for a, b in self.bounds]

    def window_ids(self, w: int) -> list[str]:
        """Event ids of 1-based window ``w``."""
        a, b = self.bounds[w - 1]
        return list(self.event_ids[a:b])


@dataclass(frozen=True)
class SplitCase:
    split_id: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    mode: SplitMode
    omit_feed: Optional[str] = None

    @property
    def empty(self) -> bool:
        return not self.train_ids or not self.test_ids


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]

    @property
    def defined(self) -> bool:
        return self.f1 is not None


def make_windows(corpus: Corpus, k: int = DEFAULT_K) -> SplitPlan:
    n = len(corpus.events)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise TooFewEvents(f"{n} events cannot fill {k} windows")
    base, extra = divmod(n, k)
    bounds, start = [], 0
    for w in range(k):
        size = base + (1 if w < extra else 0)
        bounds.append((start, start + size))
        start += size
    return SplitPlan(
        k=k, bounds=tuple(bounds),
        event_ids=tuple(e.event_id for e in corpus.events),
        feed_ids=tuple(e.feed_id for e in corpus.events),
    )


def enumerate_splits(plan: SplitPlan, mode: SplitMode, omit_feed: Optional[str] = None) -> list[SplitCase]:
    mode = SplitMode(mode)
    feed_of = dict(zip(plan.event_ids, plan.feed_ids))
    cases = []
    for i in range(1, plan.k):
        if mode is SplitMode.EQUAL:
            train_ids = plan.window_ids(i)
        else:
            a, b = plan.bounds[0][0], plan.bounds[i - 1][1]
            train_ids = list(plan.event_ids[a:b])
        test_ids = plan.window_ids(i + 1)
        if omit_feed is not None:
            train_ids = [e for e in train_ids if feed_of[e] != omit_feed]
            test_ids = [e for e in test_ids if feed_of[e] == omit_feed]
        cases.append(SplitCase(i, tuple(train_ids), tuple(test_ids), mode, omit_feed))
    return cases


def compute_metrics(y_true, y_pred) -> Metrics:
    """Exploitation (1) is the positive class.

    Precision, recall and F1 are all undefined (None) when nothing is
    predicted positive or nothing is actually positive. When both sets are
    nonempty but disjoint, all three are 0.0.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.shape} labels vs {y_pred.shape} predictions")
    if y_true.size == 0:
        raise LengthMismatch("no samples")
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return metrics_from_counts(tp, fp, tn, fn)


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> Metrics:
    if tp + fp == 0 or tp + fn == 0:
        return Metrics(tp, fp, tn, fn, None, None, None)
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return Metrics(tp, fp, tn, fn, p, r, f1)


def average_defined(values: Sequence[Optional[float]]) -> Optional[float]:
    """Mean over entries that are not None/NaN; None when nothing is defined."""
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return math.fsum(vals) / len(vals) if vals else None


# -- configuration -------------------------------------------------------------------

EMBEDDING_KINDS = (FeatureKind.TI2VEC, FeatureKind.EXTERNAL)


@dataclass(frozen=True)
class FeatureConfig:
    kind: str = "ti2vec"
    dim: int = 1000
    epochs: int = 15
    initial_lr: float = 0.025
    negative_k: int = 5
    min_count: int = 2
    infer_steps: int = 500
    reinfer_train: bool = True
    top_k: int = 1000
    vectors: Optional[str] = None
    vector_dim: int = 768
    nondeterministic_workers: Optional[int] = None


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "adaboost"
    max_depth: Optional[int] = None  # None: 4 for embeddings, 10 for bag-of-words
    rounds: int = 50
    min_leaf: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    features: FeatureConfig = FeatureConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    mode: str = "equal"
    k: int = DEFAULT_K
    omit_feed: Optional[str] = None
    seed: int = 0
    sources: tuple[str, ...] = tuple(sorted(s.value for s in ALL_SOURCES))
    category: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        try:
            SplitMode(self.mode)
            FeatureKind(self.features.kind)
            [Source(s) for s in self.sources]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.classifier.kind not in ("gnb", "cart", "adaboost"):
            raise ConfigError(f"unknown classifier {self.classifier.kind!r}")
        if self.features.kind == "external" and not self.features.vectors:
            raise ConfigError("external features need a vectors file")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "features" in d:
                d["features"] = FeatureConfig(**d["features"])
            if "classifier" in d:
                d["classifier"] = ClassifierConfig(**d["classifier"])
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        if "sources" in d:
            d["sources"] = tuple(sorted(d["sources"]))
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def resolved_depth(self) -> int:
        if self.classifier.max_depth is not None:
            return self.classifier.max_depth
        return 4 if FeatureKind(self.features.kind) in EMBEDDING_KINDS else 10

    def digest(self) -> str:
        return config_hash(self.to_dict())


def config_hash(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode("utf-8")).hexdigest()[:16]


# -- experiment ----------------------------------------------------------------------

@dataclass
class SplitResult:
    case: SplitCase
    metrics: Optional[Metrics]  # None for empty cases
    n_train: int
    n_test: int
    n_train_positive: int = 0


@dataclass
class EvalReport:
    config: dict
    results: list[SplitResult]
    avg_precision: Optional[float] = None
    avg_recall: Optional[float] = None
    avg_f1: Optional[float] = None

    def __post_init__(self):
        self.recompute_averages()

    def recompute_averages(self):
        ms = [r.metrics for r in self.results if r.metrics is not None and r.metrics.defined]
        self.avg_precision = average_defined([m.precision for m in ms])
        self.avg_recall = average_defined([m.recall for m in ms])
        self.avg_f1 = average_defined([m.f1 for m in ms])

    def f1_values(self) -> list[Optional[float]]:
        return [r.metrics.f1 if r.metrics else None for r in self.results]

    def to_csv(self, header: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["split_id", "mode", "omit_feed", "precision", "recall", "f1", "status"])
        mode = self.config.get("mode", "")
        omit = self.config.get("omit_feed") or ""

        def fmt(v):
            return "NaN" if v is None else repr(float(v))

        for r in self.results:
            m = r.metrics
            status = "empty" if r.case.empty else ("ok" if m.defined else "undefined")
            w.writerow([r.case.split_id, mode, omit,
                        fmt(m and m.precision), fmt(m and m.recall), fmt(m and m.f1), status])
        w.writerow(["AVG", mode, omit, fmt(self.avg_precision), fmt(self.avg_recall),
                    fmt(self.avg_f1), ""])
        return buf.getvalue()

    def to_json(self, extra: Optional[dict] = None) -> str:
        out = {
            "config": self.config,
            "splits": [
                {
                    "split_id": r.case.split_id, "empty": r.case.empty,
                    "n_train": r.n_train, "n_test": r.n_test,
                    "n_train_positive": r.n_train_positive,
                    "metrics": None if r.metrics is None else asdict(r.metrics),
                }
                for r in self.results
            ],
            "average": {"precision": self.avg_precision, "recall": self.avg_recall,
                        "f1": self.avg_f1},
        }
        if extra:
            out.update(extra)
        return json.dumps(out, indent=2, sort_keys=True)


def report_from_f1(values: Sequence[Optional[float]], mode: str = "equal") -> EvalReport:
    """Wrap published per-split F1 values (None/NaN = undefined) in a report.

    Only F1 is meaningful in the resulting report.
    """
    results = []
    for i, v in enumerate(values, 1):
        undefined = v is None or (isinstance(v, float) and math.isnan(v))
        m = Metrics(0, 0, 0, 0, None, None, None) if undefined else Metrics(0, 0, 0, 0, v, v, v)
        case = SplitCase(i, ("train",), ("test",), SplitMode(mode))
        results.append(SplitResult(case, m, 0, 0))
    return EvalReport({"mode": mode}, results)


def make_featurizer(config: ExperimentConfig, external=None):
    fc = config.features
    kind = FeatureKind(fc.kind)
    if kind is FeatureKind.TI2VEC:
        return Ti2VecFeaturizer(
            Hyper(dim=fc.dim, epochs=fc.epochs, initial_lr=fc.initial_lr,
                  negative_k=fc.negative_k, min_count=fc.min_count,
                  seed=config.seed, infer_steps=fc.infer_steps),
            fc.nondeterministic_workers,
            fc.reinfer_train,
        )
    if kind is FeatureKind.EXTERNAL:
        if external is None:
            external = import_external_vectors(fc.vectors, fc.vector_dim)
        return ExternalFeaturizer(external)
    return BagOfWords(kind, fc.top_k)


def classifier_params(config: ExperimentConfig) -> dict:
    cc = config.classifier
    if cc.kind == "gnb":
        return {}
    params = {"max_depth": config.resolved_depth(), "min_leaf": cc.min_leaf}
    if cc.kind == "adaboost":
        params["rounds"] = cc.rounds
    return params


def run_split(case: SplitCase, docs_by_id: dict, labels: dict, config: ExperimentConfig,
              external=None, inspect: Optional[Callable] = None) -> SplitResult:
    if case.empty:
        return SplitResult(case, None, len(case.train_ids), len(case.test_ids))
    train_docs = [docs_by_id[e] for e in case.train_ids]
    test_docs = [docs_by_id[e] for e in case.test_ids]
    # the featurizer only ever sees training documents while fitting
    featurizer = make_featurizer(config, external).fit(train_docs)
    X_train = featurizer.transform(train_docs).rows
    X_test = featurizer.transform(test_docs).rows
    y_train = np.array([labels[e] for e in case.train_ids], dtype=np.int64)
    y_test = np.array([labels[e] for e in case.test_ids], dtype=np.int64)
    model = train(config.classifier.kind, X_train, y_train, **classifier_params(config))
    y_pred = predict(model, X_test)
    if inspect is not None:
        inspect(case, featurizer, model)
    return SplitResult(case, compute_metrics(y_test, y_pred), len(train_docs), len(test_docs),
                       int(y_train.sum()))


def _run_split_star(args):
    return run_split(*args)


def run_experiment(corpus: Corpus, config: ExperimentConfig, labels: Optional[dict] = None,
                   inspect: Optional[Callable] = None, stopwords=ENGLISH_STOPWORDS) -> EvalReport:
    """Evaluate one (features, classifier, split protocol) configuration.

    ``labels`` maps event id to 0/1 or Label; by default each event's own
    label is used. ``inspect(case, featurizer, model)`` is called per split
    (serial runs only).
    """
    if labels is None:
        labels = {}
        for e in corpus.events:
            if e.label is None:
                raise UnlabeledEvent(f"event {e.event_id} has no label")
            labels[e.event_id] = e.label.as_int()
    else:
        labels = {k: (v if isinstance(v, (int, np.integer)) else v.as_int()) for k, v in labels.items()}
        missing = [e.event_id for e in corpus.events if e.event_id not in labels]
        if missing:
            raise UnlabeledEvent(f"{len(missing)} events have no label, e.g. {missing[0]!r}")

    if config.omit_feed is not None and config.omit_feed not in corpus.feeds:
        raise ConfigError(f"omit_feed {config.omit_feed!r} is not a feed of the corpus")
    docs = build_docs(corpus, sources=[Source(s) for s in config.sources],
                      stopwords=stopwords, category_filter=config.category)
    docs_by_id = {d.event_id: d for d in docs}
    external = None
    if FeatureKind(config.features.kind) is FeatureKind.EXTERNAL:
        external = import_external_vectors(config.features.vectors, config.features.vector_dim)
        have = set(external.event_ids)
        missing = [e for e in docs_by_id if e not in have]
        if missing:
            raise MissingVector(f"vectors file lacks {len(missing)} events, e.g. {missing[0]!r}")

    plan = make_windows(corpus, config.k)
    cases = enumerate_splits(plan, SplitMode(config.mode), config.omit_feed)
    jobs = [(c, docs_by_id, labels, config, external, inspect) for c in cases]
    if config.workers > 1 and inspect is None:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_split_star, jobs))
    else:
        results = [run_split(*j) for j in jobs]
    results.sort(key=lambda r: r.case.split_id)
    return EvalReport(config.to_dict(), results)


def feature_ablation(corpus: Corpus, config: ExperimentConfig, category: str,
                     labels: Optional[dict] = None, keep_info: bool = False) -> EvalReport:
    """Re-run an experiment on text from one IoC category only.

    The event description is dropped unless ``keep_info`` so that the
    category's IoCs are the sole text source.
    """
    known = {c.lower() for c in corpus.categories()}
    if category.lower() not in known:
        raise UnknownCategory(f"category {category!r} not present in corpus")
    sources = config.sources if keep_info else tuple(s for s in config.sources if s != Source.INFO.value)
    if not sources:
        raise ConfigError("ablation needs comments or attribute values as a text source")
    return run_experiment(corpus, replace(config, category=category, sources=sources), labels)


def tool_header(config_digest: str) -> list[str]:
    return [f"tifeed {__version__}", f"config_sha256={config_digest}"]
