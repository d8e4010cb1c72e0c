"""Gaussian naive Bayes, CART (Gini) and discrete AdaBoost over CART trees.

Labels are 0 (non-exploitation) and 1 (exploitation). All fitting is
deterministic; nothing here draws random numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numba import njit

from .errors import DimMismatch, EmptyTraining

BUNDLE_VERSION = 1
TIE_TOL = 1e-12
ALPHA_EPS = 1e-10


def _check_xy(X, y, sample_weight=None):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTraining("need at least one training sample")
    if y.shape != (X.shape[0],):
        raise DimMismatch(f"{X.shape[0]} samples but {y.shape} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0/1")
    y = y.astype(np.int64)
    if sample_weight is None:
        w = np.full(X.shape[0], 1.0)
    else:
        w = np.asarray(sample_weight, dtype=np.float64)
        if w.shape != y.shape:
            raise DimMismatch("sample_weight length differs from y")
    return X, y, w


# -- Gaussian naive Bayes ---------------------------------------------------------

@dataclass
class NbModel:
    classes: np.ndarray  # labels present in training, ascending
    class_priors: np.ndarray
    means: np.ndarray  # (n_classes, d)
    variances: np.ndarray
    var_epsilon: float
    n_features: int

    def log_posterior(self, X) -> np.ndarray:
        """Unnormalised log posterior, one column per entry of ``classes``."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], len(self.classes)))
        for c in range(len(self.classes)):
            var = self.variances[c]
            out[:, c] = (
                math.log(self.class_priors[c])
                - 0.5 * np.sum(np.log(2.0 * np.pi * var))
                - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
            )
        return out


def train_gnb(X, y) -> NbModel:
    """Per-class feature means and variances, variances floored at
    ``1e-9 * max feature variance`` (or 1e-9 when every feature is constant)."""
    X, y, _ = _check_xy(X, y)
    max_var = float(X.var(axis=0).max()) if X.shape[1] else 0.0
    eps = 1e-9 * max_var if max_var > 0 else 1e-9
    classes = np.unique(y)
    means = np.array([X[y == c].mean(axis=0) for c in classes])
    variances = np.array([X[y == c].var(axis=0) for c in classes]) + eps
    priors = np.array([np.mean(y == c) for c in classes])
    return NbModel(classes, priors, means, variances, eps, X.shape[1])


# -- CART ---------------------------------------------------------------------------

@dataclass
class TreeModel:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf. Samples with
    ``x[feature] <= threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) weighted class totals
    max_depth: int
    n_features: int
    min_leaf: int = 1

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        def rec(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))
        return rec(0)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node


def split_impurity(y, w, mask_left) -> float:
    """Weighted Gini impurity of a two-way partition, normalised by total weight."""
    total = w.sum()
    out = 0.0
    for part in (mask_left, ~mask_left):
        wp = w[part].sum()
        if wp == 0:
            continue
        pos = w[part & (y == 1)].sum() / wp
        out += wp / total * (1.0 - pos * pos - (1.0 - pos) ** 2)
    return out


def best_split(X, y, w, min_leaf: int = 1):
    """Exhaustive Gini search over features x midpoints.

    Returns ``(feature, threshold, impurity)`` or None when no split leaves
    ``min_leaf`` samples on both sides. Impurities within ``TIE_TOL`` of the
    minimum count as ties, resolved by lower feature index then lower threshold.
    """
    X, y, w = _check_xy(X, y, w)
    order = np.argsort(X, axis=0, kind="stable")
    member = np.ones(X.shape[0], dtype=np.bool_)
    f, thr, imp = _scan_splits(X, y, w, order, member, min_leaf, TIE_TOL)
    return None if f < 0 else (int(f), float(thr), float(imp))


@njit(cache=True)
def _scan_splits(X, y, w, order, member, min_leaf, tol):
    # Two passes over every feature's sorted member samples: the first finds
    # the minimum impurity, the second returns the first candidate within tol.
    n, d = X.shape
    m = 0
    total_w = 0.0
    total_p = 0.0
    for i in range(n):
        if member[i]:
            m += 1
            total_w += w[i]
            if y[i] == 1:
                total_p += w[i]
    best = np.inf
    if m < 2 or m < 2 * min_leaf:
        return -1, 0.0, best
    for sweep in range(2):
        for f in range(d):
            cw = 0.0
            cp = 0.0
            seen = 0
            prev = -1
            for r in range(n):
                i = order[r, f]
                if not member[i]:
                    continue
                if prev >= 0 and X[prev, f] < X[i, f] and seen >= min_leaf and m - seen >= min_leaf:
                    rw = total_w - cw
                    rp = total_p - cp
                    gl = cw - (cp * cp + (cw - cp) * (cw - cp)) / cw if cw > 0 else 0.0
                    gr = rw - (rp * rp + (rw - rp) * (rw - rp)) / rw if rw > 0 else 0.0
                    imp = (gl + gr) / total_w
                    if sweep == 0:
                        if imp < best:
                            best = imp
                    elif imp <= best + tol:
                        return f, (X[prev, f] + X[i, f]) / 2.0, imp
                cw += w[i]
                if y[i] == 1:
                    cp += w[i]
                seen += 1
                prev = i
        if best == np.inf:
            break
    return -1, 0.0, best


def train_cart(X, y, max_depth: int = 10, min_leaf: int = 1, sample_weight=None,
               presorted=None) -> TreeModel:
    """Greedy Gini tree. ``presorted`` may carry ``argsort(X, axis=0)`` to
    skip re-sorting when many trees are grown on the same matrix."""
    X, y, w = _check_xy(X, y, sample_weight)
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    n, d = X.shape
    order = np.asfortranarray(np.argsort(X, axis=0, kind="stable") if presorted is None else presorted)
    Xf = np.asfortranarray(X)
    feature, threshold, left, right, label, counts = [], [], [], [], [], []

    def new_node(idx):
        pos = float(w[idx][y[idx] == 1].sum())
        neg = float(w[idx][y[idx] == 0].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        label.append(1 if pos > neg else 0)
        counts.append((neg, pos))
        return len(feature) - 1

    stack = [(np.arange(n), 0, new_node(np.arange(n)))]
    while stack:
        idx, depth, node = stack.pop()
        if depth >= max_depth or len(np.unique(y[idx])) < 2:
            continue
        member = np.zeros(n, dtype=np.bool_)
        member[idx] = True
        f, thr, _ = _scan_splits(Xf, y, w, order, member, min_leaf, TIE_TOL)
        if f < 0:
            continue
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((ri, depth + 1, right[node]))
        stack.append((li, depth + 1, left[node]))

    return TreeModel(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        label=np.array(label, dtype=np.int64),
        counts=np.array(counts, dtype=np.float64).reshape(-1, 2),
        max_depth=max_depth,
        n_features=d,
        min_leaf=min_leaf,
    )


# -- AdaBoost.M1 --------------------------------------------------------------------

@dataclass
class BoostModel:
    rounds: list[tuple[TreeModel, float]]
    n_rounds_configured: int
    max_depth: int
    n_features: int
    train_errors: list[float] = field(default_factory=list)

    def staged_scores(self, X):
        score = np.zeros(X.shape[0])
        for tree, alpha in self.rounds:
            score = score + alpha * (2 * tree.label[tree.apply(X)] - 1)
            yield score


def adaboost_alpha(err: float) -> float:
    err = min(max(err, ALPHA_EPS), 1.0 - ALPHA_EPS)
    return 0.5 * math.log((1.0 - err) / err)


def train_adaboost(X, y, max_depth: int = 10, rounds: int = 50, min_leaf: int = 1) -> BoostModel:
    """Discrete AdaBoost.M1 with +/-1 targets.

    Stops early when a tree fits the weighted sample perfectly (its weight
    is then capped) or when its weighted error reaches 0.5 (that tree is
    dropped).
    """
    X, y, _ = _check_xy(X, y)
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    n = X.shape[0]
    signed = 2 * y - 1
    w = np.full(n, 1.0 / n)
    model = BoostModel([], rounds, max_depth, X.shape[1])
    score = np.zeros(n)
    order = np.asfortranarray(np.argsort(X, axis=0, kind="stable"))
    for _ in range(rounds):
        tree = train_cart(X, y, max_depth, min_leaf, sample_weight=w, presorted=order)
        h = 2 * tree.label[tree.apply(X)] - 1
        err = float(w[h != signed].sum() / w.sum())
        if err >= 0.5:
            break
        alpha = adaboost_alpha(err)
        model.rounds.append((tree, alpha))
        score += alpha * h
        model.train_errors.append(float(np.mean(np.where(score > 0, 1, -1) != signed)))
        if err <= ALPHA_EPS:
            break
        w = w * np.exp(-alpha * signed * h)
        w /= w.sum()
    return model


# -- prediction and persistence -------------------------------------------------------

Model = Union[NbModel, TreeModel, BoostModel]


def decision_scores(model: Model, X) -> np.ndarray:
    """Margin per row; positive means exploitation."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimMismatch(f"expected {model.n_features} features, got shape {X.shape}")
    if isinstance(model, NbModel):
        if len(model.classes) == 1:
            return np.full(X.shape[0], 1.0 if model.classes[0] == 1 else -1.0)
        lp = model.log_posterior(X)
        return lp[:, 1] - lp[:, 0]
    if isinstance(model, TreeModel):
        c = model.counts[model.apply(X)]
        return (c[:, 1] - c[:, 0]) / np.maximum(c.sum(axis=1), np.finfo(float).tiny)
    if isinstance(model, BoostModel):
        score = np.zeros(X.shape[0])
        for score in model.staged_scores(X):
            pass
        return score
    raise TypeError(f"unknown model type {type(model).__name__}")


def predict(model: Model, X, return_scores: bool = False):
    """0/1 labels; a score of exactly 0 predicts non-exploitation."""
    scores = decision_scores(model, X)
    labels = (scores > 0).astype(np.int64)
    return (labels, scores) if return_scores else labels


def _tree_to_dict(t: TreeModel) -> dict:
    return {
        "feature": t.feature.tolist(), "threshold": t.threshold.tolist(),
        "left": t.left.tolist(), "right": t.right.tolist(), "label": t.label.tolist(),
        "counts": t.counts.tolist(), "max_depth": t.max_depth,
        "n_features": t.n_features, "min_leaf": t.min_leaf,
    }


def _tree_from_dict(d: dict) -> TreeModel:
    return TreeModel(
        feature=np.array(d["feature"], dtype=np.int64),
        threshold=np.array(d["threshold"], dtype=np.float64),
        left=np.array(d["left"], dtype=np.int64),
        right=np.array(d["right"], dtype=np.int64),
        label=np.array(d["label"], dtype=np.int64),
        counts=np.array(d["counts"], dtype=np.float64).reshape(-1, 2),
        max_depth=d["max_depth"], n_features=d["n_features"], min_leaf=d.get("min_leaf", 1),
    )


def model_to_dict(model: Model) -> dict:
    if isinstance(model, NbModel):
        return {
            "bundle_version": BUNDLE_VERSION, "kind": "gnb",
            "params": {"var_epsilon": model.var_epsilon},
            "classes": model.classes.tolist(), "class_priors": model.class_priors.tolist(),
            "means": model.means.tolist(), "variances": model.variances.tolist(),
            "n_features": model.n_features,
        }
    if isinstance(model, TreeModel):
        return {"bundle_version": BUNDLE_VERSION, "kind": "cart",
                "params": {"max_depth": model.max_depth, "min_leaf": model.min_leaf},
                "tree": _tree_to_dict(model)}
    if isinstance(model, BoostModel):
        return {
            "bundle_version": BUNDLE_VERSION, "kind": "adaboost",
            "params": {"variant": "M1", "max_depth": model.max_depth,
                       "rounds": model.n_rounds_configured},
            "rounds": [{"alpha": a, "tree": _tree_to_dict(t)} for t, a in model.rounds],
            "n_features": model.n_features, "train_errors": model.train_errors,
        }
    raise TypeError(f"unknown model type {type(model).__name__}")


def model_from_dict(d: dict) -> Model:
    if d.get("bundle_version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported model bundle version {d.get('bundle_version')!r}")
    kind = d.get("kind")
    if kind == "gnb":
        return NbModel(
            classes=np.array(d["classes"], dtype=np.int64),
            class_priors=np.array(d["class_priors"]),
            means=np.array(d["means"]).reshape(len(d["classes"]), -1),
            variances=np.array(d["variances"]).reshape(len(d["classes"]), -1),
            var_epsilon=d["params"]["var_epsilon"], n_features=d["n_features"],
        )
    if kind == "cart":
        return _tree_from_dict(d["tree"])
    if kind == "adaboost":
        return BoostModel(
            rounds=[(_tree_from_dict(r["tree"]), r["alpha"]) for r in d["rounds"]],
            n_rounds_configured=d["params"]["rounds"], max_depth=d["params"]["max_depth"],
            n_features=d["n_features"], train_errors=d.get("train_errors", []),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model: Model, path, extra: Optional[dict] = None) -> None:
    d = model_to_dict(model)
    if extra:
        d.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d, fh, sort_keys=True)


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def train(kind: str, X, y, **params) -> Model:
    if kind == "gnb":
        return train_gnb(X, y)
    if kind == "cart":
        return train_cart(X, y, **params)
    if kind == "adaboost":
        return train_adaboost(X, y, **params)
    raise ValueError(f"unknown classifier {kind!r}")
