"""Independent brute-force reference implementations.

None of these share code with the package: they enumerate everything and
use the textbook definitions directly.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

import numpy as np


def apriori_bruteforce(transactions, labels, min_support, min_confidence, min_lift):
    """All antecedents (nonempty tag subsets) whose rule -> positive passes.

    ``transactions`` are sets of tag strings; empty ones are dropped first.
    Returns {frozenset: (support, confidence, lift)}.
    """
    rows = [(set(t), y) for t, y in zip(transactions, labels) if t]
    n = len(rows)
    n_pos = sum(1 for _, y in rows if y)
    items = sorted(set().union(*[t for t, _ in rows])) if rows else []
    out = {}
    for size in range(1, len(items) + 1):
        for combo in combinations(items, size):
            s = set(combo)
            cover = [y for t, y in rows if s <= t]
            both = sum(cover)
            if not cover or both == 0:
                continue
            support = both / n
            confidence = both / len(cover)
            lift = confidence / (n_pos / n)
            if Fraction(both, n) >= Fraction(min_support) and \
                    Fraction(both, len(cover)) >= Fraction(min_confidence) and \
                    Fraction(both * n, len(cover) * n_pos) >= Fraction(min_lift):
                out[frozenset(combo)] = (support, confidence, lift)
    return out


def gini(counts):
    total = sum(counts)
    if total == 0:
        return 0.0
    return 1.0 - sum((c / total) ** 2 for c in counts)


def best_split_bruteforce(X, y, min_leaf=1):
    """Weighted-Gini optimum over every feature and every midpoint.

    Returns (impurity, feature, threshold): among candidates within 1e-12 of
    the global minimum, the lowest feature then the lowest threshold. None
    when no valid split exists.
    """
    n, d = X.shape
    cands = []
    for f in range(d):
        values = sorted(set(X[:, f].tolist()))
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2.0
            left = X[:, f] <= thr
            nl, nr = int(left.sum()), int((~left).sum())
            if nl < min_leaf or nr < min_leaf:
                continue
            gl = gini([int(np.sum(y[left] == 0)), int(np.sum(y[left] == 1))])
            gr = gini([int(np.sum(y[~left] == 0)), int(np.sum(y[~left] == 1))])
            cands.append(((nl * gl + nr * gr) / n, f, thr))
    if not cands:
        return None
    lowest = min(c[0] for c in cands)
    return min((c for c in cands if c[0] <= lowest + 1e-12), key=lambda c: (c[1], c[2]))


def gaussian_log_density(x, mean, var):
    return -0.5 * math.log(2 * math.pi * var) - (x - mean) ** 2 / (2 * var)


def nb_log_joint(x, X, y, eps):
    """log P(c) + sum_j log N(x_j | mean_cj, var_cj + eps) for each class present."""
    out = {}
    for c in sorted(set(y.tolist())):
        Xc = X[y == c]
        lp = math.log(len(Xc) / len(X))
        for j in range(X.shape[1]):
            col = Xc[:, j].tolist()
            mean = sum(col) / len(col)
            var = sum((v - mean) ** 2 for v in col) / len(col) + eps
            lp += gaussian_log_density(float(x[j]), mean, var)
        out[c] = lp
    return out


def overlap_bruteforce(value_sets):
    """Overlap_ij = |F_i & F_j| / |union_{k != i} (F_k & F_i)|, None when the denominator is 0."""
    feeds = sorted(value_sets)
    out = {}
    for i in feeds:
        denom = set()
        for k in feeds:
            if k != i:
                denom |= value_sets[k] & value_sets[i]
        for j in feeds:
            if i == j or not denom:
                out[(i, j)] = None
            else:
                out[(i, j)] = len(value_sets[i] & value_sets[j]) / len(denom)
    return out


def flow_bruteforce(first_seen):
    """``first_seen[value][feed] = ts`` -> (edges, simultaneous) count dicts."""
    edges, simultaneous = {}, {}
    for per_feed in first_seen.values():
        for a, b in combinations(sorted(per_feed), 2):
            ta, tb = per_feed[a], per_feed[b]
            if ta == tb:
                simultaneous[(a, b)] = simultaneous.get((a, b), 0) + 1
            else:
                key = (a, b) if ta < tb else (b, a)
                edges[key] = edges.get(key, 0) + 1
    return edges, simultaneous
