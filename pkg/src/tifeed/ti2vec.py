"""TI2Vec: a PV-DBOW paragraph-vector model trained with negative sampling.

Each document vector is trained to predict every word of its document; for
one (document, word) position the loss is::

    -log s(d . u_w) - sum_{n in negatives} log s(-d . u_n)

where ``s`` is the logistic function and ``u`` the output word vectors.
Negatives are drawn from the unigram distribution raised to 0.75. The
learning rate decays linearly from ``initial_lr`` to ``initial_lr / 100``.

Training with the default single worker is bit-reproducible for a given
seed. ``nondeterministic_workers > 1`` trains documents concurrently with
unsynchronized (lock-free) updates of the shared word vectors, and results
then depend on thread scheduling.
"""

from __future__ import annotations

import json
import zlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit, prange

from .errors import DegenerateVocab, EmptyCorpus

FORMAT_VERSION = 1
UNIGRAM_POWER = 0.75


@dataclass(frozen=True)
class Hyper:
    dim: int = 1000
    epochs: int = 15
    initial_lr: float = 0.025
    negative_k: int = 5
    min_count: int = 2
    seed: int = 0
    infer_steps: int = 500

    @property
    def final_lr(self) -> float:
        return self.initial_lr / 100.0


@dataclass
class EmbeddingModel:
    dim: int
    vocab: dict[str, int]
    word_vectors: np.ndarray
    doc_ids: list[str]
    doc_vectors: np.ndarray
    hyper: Hyper
    word_counts: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.word_counts is None:
            self.word_counts = np.ones(len(self.vocab), dtype=np.int64)
        self._doc_index = {d: i for i, d in enumerate(self.doc_ids)}
        self._cum = _unigram_table(self.word_counts)

    def doc_vector(self, event_id: str) -> Optional[np.ndarray]:
        i = self._doc_index.get(event_id)
        return None if i is None else self.doc_vectors[i]

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.vocab[t] for t in tokens if t in self.vocab], dtype=np.int64)

    def to_dict(self) -> dict:
        words = sorted(self.vocab, key=self.vocab.__getitem__)
        return {
            "format": "ti2vec",
            "format_version": FORMAT_VERSION,
            "dim": self.dim,
            "hyper": self.hyper.__dict__,
            "flavor": "pv-dbow",
            "vocab": words,
            "word_counts": self.word_counts.tolist(),
            "word_vectors": self.word_vectors.tolist(),
            "doc_ids": list(self.doc_ids),
            "doc_vectors": self.doc_vectors.tolist(),
        }

    def save(self, path, extra: Optional[dict] = None) -> None:
        """Write JSON, or ``.npz`` when the suffix says so. ``extra`` keys are
        stored alongside the model and ignored on load."""
        path = Path(path)
        d = self.to_dict()
        if extra:
            d.update(extra)
        if path.suffix == ".npz":
            keys = ["format", "format_version", "dim", "hyper", "flavor", "vocab", "doc_ids"]
            keys += sorted(extra or ())
            np.savez(path, meta=json.dumps({k: d[k] for k in keys}, sort_keys=True),
                     word_counts=self.word_counts, word_vectors=self.word_vectors,
                     doc_vectors=self.doc_vectors)
        else:
            path.write_text(json.dumps(d, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        path = Path(path)
        if path.suffix == ".npz":
            with np.load(path) as z:
                meta = json.loads(str(z["meta"]))
                meta.update(word_counts=z["word_counts"], word_vectors=z["word_vectors"],
                            doc_vectors=z["doc_vectors"])
        else:
            meta = json.loads(path.read_text(encoding="utf-8"))
        if meta.get("format") != "ti2vec" or meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"{path}: not a ti2vec v{FORMAT_VERSION} model file")
        dim = int(meta["dim"])
        return cls(
            dim=dim,
            vocab={w: i for i, w in enumerate(meta["vocab"])},
            word_vectors=np.asarray(meta["word_vectors"], dtype=np.float64).reshape(-1, dim),
            doc_ids=list(meta["doc_ids"]),
            doc_vectors=np.asarray(meta["doc_vectors"], dtype=np.float64).reshape(-1, dim),
            hyper=Hyper(**meta["hyper"]),
            word_counts=np.asarray(meta["word_counts"], dtype=np.int64),
        )


def _unigram_table(counts: np.ndarray) -> np.ndarray:
    return np.cumsum(np.asarray(counts, dtype=np.float64) ** UNIGRAM_POWER)


# -- numeric core -------------------------------------------------------------

def dbow_loss(doc: np.ndarray, word_vectors: np.ndarray, target: int, negatives) -> float:
    """Negative-sampling loss of one (document, word) position."""
    def log_sigmoid(x):
        return -np.logaddexp(0.0, -x)

    loss = -log_sigmoid(doc @ word_vectors[target])
    for n in negatives:
        loss -= log_sigmoid(-(doc @ word_vectors[n]))
    return float(loss)


def dbow_doc_gradient(doc: np.ndarray, word_vectors: np.ndarray, target: int, negatives) -> np.ndarray:
    """Analytic gradient of :func:`dbow_loss` with respect to the document vector."""
    def sigmoid(x):
        return 1.0 / (1.0 + np.exp(-x))

    u = word_vectors[target]
    grad = (sigmoid(doc @ u) - 1.0) * u
    for n in negatives:
        u = word_vectors[n]
        grad = grad + sigmoid(doc @ u) * u
    return grad


@njit(cache=True, fastmath=True)
def _sgns_update(doc, out_vecs, words, lr, grad, train_words):
    # words[0] is the observed word, the rest are negatives
    dim = doc.shape[0]
    for i in range(dim):
        grad[i] = 0.0
    for j in range(words.shape[0]):
        w = words[j]
        label = 1.0 if j == 0 else 0.0
        f = 0.0
        for i in range(dim):
            f += doc[i] * out_vecs[w, i]
        g = (label - 1.0 / (1.0 + np.exp(-f))) * lr
        for i in range(dim):
            grad[i] += g * out_vecs[w, i]
        if train_words:
            for i in range(dim):
                out_vecs[w, i] += g * doc[i]
    for i in range(dim):
        doc[i] += grad[i]


@njit(cache=True, fastmath=True)
def _draw_words(target, cum, k, words):
    # returns how many entries of `words` are filled; draws equal to target are skipped
    words[0] = target
    m = 1
    total = cum[cum.shape[0] - 1]
    for _ in range(k):
        n = np.searchsorted(cum, np.random.random() * total, side="right")
        if n >= cum.shape[0]:
            n = cum.shape[0] - 1
        if n != target:
            words[m] = n
            m += 1
    return m


@njit(cache=True, fastmath=True)
def _train_serial(doc_vecs, out_vecs, tokens, offsets, cum, k, lr0, lr1, epochs, seed):
    np.random.seed(seed)
    n_docs = offsets.shape[0] - 1
    total = max(1, epochs * tokens.shape[0])
    done = 0
    grad = np.zeros(doc_vecs.shape[1])
    words = np.zeros(k + 1, dtype=np.int64)
    for _ in range(epochs):
        for d in range(n_docs):
            for p in range(offsets[d], offsets[d + 1]):
                lr = lr0 - (lr0 - lr1) * done / total
                m = _draw_words(tokens[p], cum, k, words)
                _sgns_update(doc_vecs[d], out_vecs, words[:m], lr, grad, True)
                done += 1


@njit(cache=True, parallel=True, fastmath=True)
def _train_hogwild(doc_vecs, out_vecs, tokens, offsets, cum, k, lr0, lr1, epochs, seed):
    np.random.seed(seed)
    n_docs = offsets.shape[0] - 1
    dim = doc_vecs.shape[1]
    for ep in range(epochs):
        for d in prange(n_docs):
            grad = np.zeros(dim)
            words = np.zeros(k + 1, dtype=np.int64)
            lr = lr0 - (lr0 - lr1) * (ep * n_docs + d) / max(1, epochs * n_docs)
            for p in range(offsets[d], offsets[d + 1]):
                m = _draw_words(tokens[p], cum, k, words)
                _sgns_update(doc_vecs[d], out_vecs, words[:m], lr, grad, True)


@njit(cache=True, fastmath=True)
def _infer_batch(out_vecs, tokens, offsets, init, cum, k, steps, lr0, lr1, seeds):
    n_docs = offsets.shape[0] - 1
    out = init.copy()
    grad = np.zeros(out.shape[1])
    words = np.zeros(k + 1, dtype=np.int64)
    for d in range(n_docs):
        np.random.seed(seeds[d])
        n_tok = offsets[d + 1] - offsets[d]
        total = max(1, steps * n_tok)
        done = 0
        for _ in range(steps):
            for p in range(offsets[d], offsets[d + 1]):
                lr = lr0 - (lr0 - lr1) * done / total
                m = _draw_words(tokens[p], cum, k, words)
                _sgns_update(out[d], out_vecs, words[:m], lr, grad, False)
                done += 1
    return out


# -- public API ---------------------------------------------------------------

def _flatten(encoded: list[np.ndarray]):
    offsets = np.zeros(len(encoded) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(e) for e in encoded])
    tokens = np.concatenate(encoded) if encoded else np.zeros(0, dtype=np.int64)
    return tokens.astype(np.int64), offsets


def _seed_for(seed: int, event_id: str) -> int:
    return (zlib.crc32(event_id.encode("utf-8")) ^ (seed * 2654435761)) & 0x7FFFFFFF


def _init_vector(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return (rng.random(dim) - 0.5) / dim


def build_vocab(docs, min_count: int) -> tuple[dict[str, int], np.ndarray]:
    counts = Counter(t for d in docs for t in d.tokens)
    kept = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    return {w: i for i, w in enumerate(kept)}, np.array([counts[w] for w in kept], dtype=np.int64)


def train_ti2vec(docs, hyper: Hyper = Hyper(), nondeterministic_workers: Optional[int] = None) -> EmbeddingModel:
    """Train document and output word vectors on ``docs`` (objects with
    ``event_id`` and ``tokens``).

    Documents with no in-vocabulary token get the zero vector.
    """
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("no documents to train on")
    vocab, counts = build_vocab(docs, hyper.min_count)
    if not vocab:
        raise DegenerateVocab(f"vocabulary empty after min_count={hyper.min_count}")
    encoded = [np.array([vocab[t] for t in d.tokens if t in vocab], dtype=np.int64) for d in docs]
    tokens, offsets = _flatten(encoded)

    rng = np.random.default_rng(hyper.seed)
    doc_vecs = (rng.random((len(docs), hyper.dim)) - 0.5) / hyper.dim
    out_vecs = np.zeros((len(vocab), hyper.dim))
    cum = _unigram_table(counts)
    args = (doc_vecs, out_vecs, tokens, offsets, cum, hyper.negative_k,
            hyper.initial_lr, hyper.final_lr, hyper.epochs, hyper.seed)
    if nondeterministic_workers and nondeterministic_workers > 1:
        from numba import set_num_threads, config
        set_num_threads(min(nondeterministic_workers, config.NUMBA_NUM_THREADS))
        _train_hogwild(*args)
    else:
        _train_serial(*args)

    for i, e in enumerate(encoded):
        if len(e) == 0:
            doc_vecs[i] = 0.0
    return EmbeddingModel(
        dim=hyper.dim, vocab=vocab, word_vectors=out_vecs,
        doc_ids=[d.event_id for d in docs], doc_vectors=doc_vecs,
        hyper=hyper, word_counts=counts,
    )


def infer_vectors(model: EmbeddingModel, token_lists, seeds, steps: Optional[int] = None):
    """Infer vectors for several documents at once; returns ``(matrix, empty_flags)``."""
    steps = model.hyper.infer_steps if steps is None else steps
    encoded = [model.encode(t) for t in token_lists]
    empty = np.array([len(e) == 0 for e in encoded], dtype=bool)
    init = np.array([_init_vector(model.dim, s) for s in seeds]).reshape(len(encoded), model.dim)
    if len(encoded) == 0:
        return init, empty
    tokens, offsets = _flatten(encoded)
    out = _infer_batch(model.word_vectors, tokens, offsets, init, model._cum,
                       model.hyper.negative_k, steps, model.hyper.initial_lr,
                       model.hyper.final_lr, np.asarray(seeds, dtype=np.int64))
    out[empty] = 0.0
    return out, empty


def infer_doc_vector(model: EmbeddingModel, tokens, steps: Optional[int] = None, seed: int = 0):
    """Fit a fresh document vector against frozen word vectors.

    Returns ``(vector, empty)``; with no in-vocabulary tokens the vector is
    zero and ``empty`` is True. ``steps=0`` returns the seeded initialisation.
    """
    out, empty = infer_vectors(model, [tokens], [seed], steps)
    return out[0], bool(empty[0])


def embed_docs(model: EmbeddingModel, docs, steps: Optional[int] = None) -> np.ndarray:
    """Rows for ``docs``: trained vectors where known, inferred otherwise."""
    rows = np.zeros((len(docs), model.dim))
    unseen = []
    for i, d in enumerate(docs):
        v = model.doc_vector(d.event_id)
        if v is None:
            unseen.append(i)
        else:
            rows[i] = v
    if unseen:
        seeds = [_seed_for(model.hyper.seed, docs[i].event_id) for i in unseen]
        inferred, _ = infer_vectors(model, [docs[i].tokens for i in unseen], seeds, steps)
        rows[unseen] = inferred
    return rows
