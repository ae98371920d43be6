"""CART classification trees (Gini impurity) and the bootstrap random forest.

Trees are stored as flat node arrays; node 0 is the root and ``left == -1``
marks a leaf. A sample goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from ..errors import DimensionMismatch

LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    max_depth: Optional[int] = None          # None: grow until pure / min_samples_leaf
    min_samples_leaf: int = 1
    features_per_split: object = "sqrt"      # int, or one of "sqrt", "log2", "all"

    def resolve_features(self, n_features: int) -> int:
        f = self.features_per_split
        if f == "sqrt":
            k = int(math.isqrt(n_features))
        elif f == "log2":
            k = int(math.log2(n_features)) if n_features > 0 else 1
        elif f in ("all", None):
            k = n_features
        else:
            k = int(f)
        return max(1, min(k, n_features))


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    n_positive: np.ndarray
    n_features: int

    @property
    def value(self) -> np.ndarray:
        return self.n_positive / self.n_samples

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for node in range(self.node_count):
            if self.left[node] != LEAF:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        return _predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X)

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "n_samples": self.n_samples.tolist(),
            "n_positive": self.n_positive.tolist(),
        }

    @classmethod
    def from_dict(cls, doc) -> "Tree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int64),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.int64),
            right=np.asarray(doc["right"], dtype=np.int64),
            n_samples=np.asarray(doc["n_samples"], dtype=np.int64),
            n_positive=np.asarray(doc["n_positive"], dtype=np.int64),
            n_features=int(doc["n_features"]),
        )


def _as_matrix(X, n_features=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or (n_features is not None and X.shape[1] != n_features):
        raise DimensionMismatch(f"expected vectors of length {n_features}, got shape {X.shape}")
    return np.ascontiguousarray(X)


def check_xy(X, y):
    X = _as_matrix(X)
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(X):
        raise DimensionMismatch(f"{len(X)} vectors but {y.size} labels")
    if len(X) == 0:
        raise DimensionMismatch("empty training set")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 (pristine) or 1 (manipulated)")
    return X, y.astype(np.int64)


def gini(n_positive, n):
    p = n_positive / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


# -- jitted kernels ----------------------------------------------------------

@numba.njit(cache=True)
def _splitmix(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _sort_pairs(keys, labs, m, qstack):
    """In-place ascending sort of ``keys[:m]`` carrying ``labs`` along
    (quicksort, median-of-three pivot, insertion sort for short runs)."""
    top = 0
    lo = 0
    hi = m - 1
    while True:
        while hi - lo > 16:
            mid = (lo + hi) >> 1
            if keys[mid] < keys[lo]:
                keys[mid], keys[lo] = keys[lo], keys[mid]
                labs[mid], labs[lo] = labs[lo], labs[mid]
            if keys[hi] < keys[lo]:
                keys[hi], keys[lo] = keys[lo], keys[hi]
                labs[hi], labs[lo] = labs[lo], labs[hi]
            if keys[hi] < keys[mid]:
                keys[hi], keys[mid] = keys[mid], keys[hi]
                labs[hi], labs[mid] = labs[mid], labs[hi]
            pivot = keys[mid]
            i = lo
            j = hi
            while i <= j:
                while keys[i] < pivot:
                    i += 1
                while keys[j] > pivot:
                    j -= 1
                if i <= j:
                    keys[i], keys[j] = keys[j], keys[i]
                    labs[i], labs[j] = labs[j], labs[i]
                    i += 1
                    j -= 1
            # recurse into the smaller side first to bound the stack depth
            if j - lo < hi - i:
                qstack[top] = i
                qstack[top + 1] = hi
                hi = j
            else:
                qstack[top] = lo
                qstack[top + 1] = j
                lo = i
            top += 2
        for a in range(lo + 1, hi + 1):
            k = keys[a]
            lab = labs[a]
            b = a - 1
            while b >= lo and keys[b] > k:
                keys[b + 1] = keys[b]
                labs[b + 1] = labs[b]
                b -= 1
            keys[b + 1] = k
            labs[b + 1] = lab
        if top == 0:
            return
        top -= 2
        lo = qstack[top]
        hi = qstack[top + 1]


@numba.njit(cache=True)
def _build_tree(X, y, rows, max_depth, min_leaf, max_features, seed):
    n = rows.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    n_samples = np.zeros(cap, dtype=np.int64)
    n_positive = np.zeros(cap, dtype=np.int64)

    idx = rows.copy()
    perm = np.arange(d)
    vals = np.empty(n, dtype=np.float64)
    labs = np.empty(n, dtype=np.int64)
    qstack = np.empty(2 * 64, dtype=np.int64)
    state = np.uint64(seed)

    stack = np.empty((cap, 4), dtype=np.int64)  # node, start, end, depth
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start
        pos = 0
        for t in range(start, end):
            pos += y[idx[t]]
        n_samples[node] = m
        n_positive[node] = pos
        if pos == 0 or pos == m or (max_depth >= 0 and depth >= max_depth) or m < 2 * min_leaf:
            continue

        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        evaluated = 0
        for j in range(d):
            perm[j] = j
        for j in range(d):
            if evaluated >= max_features:
                break
            state, r = _splitmix(state)
            k = j + np.int64(r % np.uint64(d - j))
            tmp = perm[j]
            perm[j] = perm[k]
            perm[k] = tmp
            f = perm[j]
            lo = np.inf
            hi = -np.inf
            for t in range(m):
                v = X[idx[start + t], f]
                vals[t] = v
                labs[t] = y[idx[start + t]]
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            if lo == hi:
                continue
            evaluated += 1
            # ties are skipped below, so the order within equal values is irrelevant
            _sort_pairs(vals, labs, m, qstack)
            left_pos = 0
            for t in range(m - 1):
                left_pos += labs[t]
                nl = t + 1
                nr = m - nl
                a = vals[t]
                b = vals[t + 1]
                if a == b or nl < min_leaf or nr < min_leaf:
                    continue
                right_pos = pos - left_pos
                ln = nl - left_pos
                rn = nr - right_pos
                # maximizing this minimizes the weighted child Gini impurity
                score = (left_pos * left_pos + ln * ln) / nl + (right_pos * right_pos + rn * rn) / nr
                thr = a + (b - a) * 0.5
                if thr >= b:
                    thr = a
                if score > best_score or (score == best_score and (
                        f < best_f or (f == best_f and thr < best_thr))):
                    best_score = score
                    best_f = f
                    best_thr = thr
        if best_f < 0:
            continue

        mid = start
        for t in range(start, end):
            if X[idx[t], best_f] <= best_thr:
                tmp = idx[t]
                idx[t] = idx[mid]
                idx[mid] = tmp
                mid += 1
        feature[node] = best_f
        threshold[node] = best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        stack[top, 0] = right_id
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = left_id
        stack[top + 1, 1] = start
        stack[top + 1, 2] = mid
        stack[top + 1, 3] = depth + 1
        top += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), n_samples[:n_nodes].copy(), n_positive[:n_nodes].copy())


@numba.njit(cache=True)
def _predict_tree(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0], dtype=np.float64)
    for i in range(X.shape[0]):
        node = 0
        while left[node] != -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _seed_of(rng_stream) -> int:
    if isinstance(rng_stream, np.random.SeedSequence):
        return int(rng_stream.generate_state(1, dtype=np.uint64)[0])
    if isinstance(rng_stream, np.random.Generator):
        return int(rng_stream.integers(0, 2**63, dtype=np.int64))
    return int(rng_stream) & (2**64 - 1)


def train_tree(X, y, params: TreeParams = TreeParams(), rng_stream=0, rows=None) -> Tree:
    """Grow one CART tree.

    ``rows`` is the (possibly repeated) list of training row indices; the
    default uses every row once. ``rng_stream`` seeds split-feature sampling.
    """
    X, y = check_xy(X, y)
    if rows is None:
        rows = np.arange(len(X), dtype=np.int64)
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    k = params.resolve_features(X.shape[1])
    arrays = _build_tree(X, y, np.asarray(rows, dtype=np.int64), max_depth,
                         int(params.min_samples_leaf), k, np.uint64(_seed_of(rng_stream)))
    return Tree(*arrays, n_features=X.shape[1])


def predict_tree(tree: Tree, x) -> float:
    return float(tree.predict(x)[0])


# -- forest ------------------------------------------------------------------

@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    features_per_split: object = "sqrt"

    def tree_params(self) -> TreeParams:
        return TreeParams(self.max_depth, self.min_samples_leaf, self.features_per_split)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    params: ForestParams
    seed: int
    n_features: int
    in_bag: tuple = field(default=(), compare=False, repr=False)

    def predict_proba(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += _predict_tree(tree.feature, tree.threshold, tree.left, tree.right, tree.value, X)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "kind": "forest",
            "seed": self.seed,
            "n_features": self.n_features,
            "params": {
                "n_trees": self.params.n_trees,
                "max_depth": self.params.max_depth,
                "min_samples_leaf": self.params.min_samples_leaf,
                "features_per_split": self.params.features_per_split,
            },
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc) -> "ForestModel":
        return cls(
            trees=tuple(Tree.from_dict(t) for t in doc["trees"]),
            params=ForestParams(**doc["params"]),
            seed=int(doc["seed"]),
            n_features=int(doc["n_features"]),
        )


@numba.njit(cache=True)
def _build_forest(X, y, seeds, max_depth, min_leaf, max_features):
    """Grow one tree per seed. The seed's splitmix stream first draws the
    bootstrap rows, then continues into that tree's feature sampling."""
    n = X.shape[0]
    n_trees = seeds.shape[0]
    bags = np.empty((n_trees, n), dtype=np.int64)
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    parts = []
    for t in range(n_trees):
        state = np.uint64(seeds[t])
        for i in range(n):
            state, r = _splitmix(state)
            bags[t, i] = np.int64(r % np.uint64(n))
        arrays = _build_tree(X, y, bags[t], max_depth, min_leaf, max_features, state)
        offsets[t + 1] = offsets[t] + arrays[0].shape[0]
        parts.append(arrays)
    total = offsets[n_trees]
    feature = np.empty(total, dtype=np.int64)
    threshold = np.empty(total, dtype=np.float64)
    left = np.empty(total, dtype=np.int64)
    right = np.empty(total, dtype=np.int64)
    n_samples = np.empty(total, dtype=np.int64)
    n_positive = np.empty(total, dtype=np.int64)
    for t in range(n_trees):
        a = offsets[t]
        b = offsets[t + 1]
        f, th, lf, rt, ns, npos = parts[t]
        feature[a:b] = f
        threshold[a:b] = th
        left[a:b] = lf
        right[a:b] = rt
        n_samples[a:b] = ns
        n_positive[a:b] = npos
    return offsets, feature, threshold, left, right, n_samples, n_positive, bags


def train_forest(X, y, params: ForestParams = ForestParams(), seed: int = 0) -> ForestModel:
    """Bootstrap-aggregated CART trees.

    Tree ``t`` is driven by word ``t`` of ``SeedSequence(seed)``'s state,
    which fixes both its bootstrap sample and its split-feature draws.
    """
    X, y = check_xy(X, y)
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    d = X.shape[1]
    tree_params = params.tree_params()
    max_depth = -1 if tree_params.max_depth is None else int(tree_params.max_depth)
    seeds = np.random.SeedSequence(seed).generate_state(params.n_trees, dtype=np.uint64)
    offsets, *arrays, bags = _build_forest(X, y, seeds, max_depth, int(tree_params.min_samples_leaf),
                                           tree_params.resolve_features(d))
    trees = tuple(
        Tree(*(a[offsets[t]:offsets[t + 1]] for a in arrays), n_features=d)
        for t in range(params.n_trees)
    )
    return ForestModel(trees, params, int(seed), d, tuple(bags))


def predict_forest(model: ForestModel, x) -> float:
    return float(model.predict_proba(x)[0])
