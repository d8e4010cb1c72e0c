"""Per-event feature matrices: TI2Vec embeddings, binary / TF-IDF baselines
with top-k variance selection, and externally computed vectors."""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimMismatch,
    DuplicateEventId,
    EmptyCorpus,
    MalformedLine,
    MissingVector,
    UndefinedSimilarity,
)
from .ti2vec import EmbeddingModel, Hyper, _seed_for, embed_docs, infer_vectors, train_ti2vec


class FeatureKind(enum.Enum):
    TI2VEC = "ti2vec"
    EXTERNAL = "external"
    BINARY = "binary"
    TFIDF = "tfidf"


@dataclass
class FeatureMatrix:
    event_ids: list[str]
    rows: np.ndarray
    kind: FeatureKind
    columns: Optional[list[str]] = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.event_ids):
            raise DimMismatch(f"{self.rows.shape} rows for {len(self.event_ids)} event ids")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("feature matrix contains non-finite values")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def take(self, event_ids: Sequence[str]) -> np.ndarray:
        index = {e: i for i, e in enumerate(self.event_ids)}
        missing = [e for e in event_ids if e not in index]
        if missing:
            raise MissingVector(f"no vector for {len(missing)} events, e.g. {missing[0]!r}")
        return self.rows[[index[e] for e in event_ids]]

    def to_csv(self, path, header=None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header or ():
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            cols = self.columns or [f"f{i}" for i in range(self.dim)]
            w.writerow(["event_id"] + cols)
            for eid, row in zip(self.event_ids, self.rows):
                w.writerow([eid] + [repr(float(x)) for x in row])


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(f"shapes {u.shape} and {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise UndefinedSimilarity("cosine similarity with a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


# -- bag-of-words baselines -----------------------------------------------------

def select_top_variance(matrix: np.ndarray, names: Sequence[str], top_k: int) -> np.ndarray:
    """Indices of the ``top_k`` highest-variance columns, returned in column order.

    Equal variances are resolved by column name.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    var = matrix.var(axis=0) if matrix.shape[0] else np.zeros(matrix.shape[1])
    order = sorted(range(matrix.shape[1]), key=lambda j: (-var[j], names[j]))
    return np.array(sorted(order[:top_k]), dtype=np.int64)


class BagOfWords:
    """Binary or TF-IDF vectorizer whose vocabulary, IDF and selected columns
    come from the documents passed to :meth:`fit` only."""

    def __init__(self, kind: FeatureKind, top_k: int = 1000):
        if kind not in (FeatureKind.BINARY, FeatureKind.TFIDF):
            raise ValueError(f"not a bag-of-words kind: {kind}")
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        self.kind = kind
        self.top_k = top_k

    def _raw(self, docs) -> np.ndarray:
        index = {w: i for i, w in enumerate(self.vocabulary_)}
        out = np.zeros((len(docs), len(index)))
        for r, d in enumerate(docs):
            for t, c in Counter(d.tokens).items():
                j = index.get(t)
                if j is not None:
                    out[r, j] = c
        if self.kind is FeatureKind.BINARY:
            return (out > 0).astype(np.float64)
        return out * self.idf_

    def fit(self, docs) -> "BagOfWords":
        docs = list(docs)
        if not docs:
            raise EmptyCorpus("no documents")
        df = Counter(t for d in docs for t in set(d.tokens))
        self.vocabulary_ = sorted(df)
        n = len(docs)
        self.idf_ = np.array([math.log(n / df[w]) for w in self.vocabulary_])
        raw = self._raw(docs)
        self.selected_ = select_top_variance(raw, self.vocabulary_, self.top_k)
        self.columns_ = [self.vocabulary_[j] for j in self.selected_]
        return self

    @property
    def vocabulary(self) -> set[str]:
        return set(self.vocabulary_)

    def transform(self, docs) -> FeatureMatrix:
        docs = list(docs)
        rows = self._raw(docs)[:, self.selected_]
        return FeatureMatrix([d.event_id for d in docs], rows, self.kind, list(self.columns_))


def baseline_features(docs, kind: FeatureKind, top_k: int = 1000) -> FeatureMatrix:
    return BagOfWords(kind, top_k).fit(docs).transform(docs)


# -- external vectors -----------------------------------------------------------

def import_external_vectors(path, expected_dim: int = 768) -> FeatureMatrix:
    """Read JSON lines ``{"event_id": ..., "vector": [...]}``."""
    ids, rows = [], []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(f"{path}:{lineno}: {exc}") from exc
            if isinstance(rec, dict) and "meta" in rec and "event_id" not in rec:
                continue
            if not isinstance(rec, dict) or not isinstance(rec.get("event_id"), str) \
                    or not isinstance(rec.get("vector"), list):
                raise MalformedLine(f"{path}:{lineno}: expected event_id and vector")
            vec = rec["vector"]
            if len(vec) != expected_dim:
                raise DimMismatch(f"{path}:{lineno}: vector has {len(vec)} entries, expected {expected_dim}")
            try:
                vec = np.array(vec, dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise MalformedLine(f"{path}:{lineno}: non-numeric vector") from exc
            if not np.all(np.isfinite(vec)):
                raise MalformedLine(f"{path}:{lineno}: non-finite vector entry")
            eid = rec["event_id"]
            if eid in seen:
                raise DuplicateEventId(f"{path}:{lineno}: repeated event_id {eid!r}")
            seen.add(eid)
            ids.append(eid)
            rows.append(vec)
    return FeatureMatrix(ids, np.array(rows).reshape(len(rows), expected_dim), FeatureKind.EXTERNAL)


def write_vectors_jsonl(matrix: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for eid, row in zip(matrix.event_ids, matrix.rows):
            fh.write(json.dumps({"event_id": eid, "vector": row.tolist()}) + "\n")


# -- featurizers used by the evaluation harness ---------------------------------

class Ti2VecFeaturizer:
    """Trains TI2Vec on the fitted documents.

    With ``reinfer_train`` every document, including the training ones, is
    represented by an inferred vector, so classifier training and testing
    see vectors produced by the same procedure.
    """

    def __init__(self, hyper: Hyper = Hyper(), nondeterministic_workers=None,
                 reinfer_train: bool = True):
        self.hyper = hyper
        self.nondeterministic_workers = nondeterministic_workers
        self.reinfer_train = reinfer_train

    def fit(self, docs) -> "Ti2VecFeaturizer":
        self.model_ = train_ti2vec(docs, self.hyper, self.nondeterministic_workers)
        return self

    @property
    def vocabulary(self) -> set[str]:
        return set(self.model_.vocab)

    def transform(self, docs) -> FeatureMatrix:
        docs = list(docs)
        ids = [d.event_id for d in docs]
        if not self.reinfer_train:
            return FeatureMatrix(ids, embed_docs(self.model_, docs), FeatureKind.TI2VEC)
        seeds = [_seed_for(self.hyper.seed, e) for e in ids]
        rows, _ = infer_vectors(self.model_, [d.tokens for d in docs], seeds)
        return FeatureMatrix(ids, rows, FeatureKind.TI2VEC)


class ExternalFeaturizer:
    """Looks vectors up by event id; fitting reads nothing from the documents."""

    vocabulary: set = frozenset()

    def __init__(self, matrix: FeatureMatrix):
        self.matrix = matrix

    def fit(self, docs) -> "ExternalFeaturizer":
        return self

    def transform(self, docs) -> FeatureMatrix:
        ids = [d.event_id for d in docs]
        return FeatureMatrix(ids, self.matrix.take(ids), FeatureKind.EXTERNAL)


def embed_corpus(model: EmbeddingModel, docs, steps: Optional[int] = None) -> FeatureMatrix:
    docs = list(docs)
    return FeatureMatrix([d.event_id for d in docs], embed_docs(model, docs, steps), FeatureKind.TI2VEC)
