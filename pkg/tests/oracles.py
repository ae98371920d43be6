"""Independent reference implementations used by the tests.

Everything here is written from the definitions with plain loops and does
not import the package, so agreement is meaningful.
"""

import math

import numpy as np


def confusion_at(scores, labels, threshold):
    tp = fp = fn = 0
    for s, y in zip(scores, labels):
        flagged = s >= threshold
        if flagged and y == 1:
            tp += 1
        elif flagged:
            fp += 1
        elif y == 1:
            fn += 1
    return tp, fp, fn


def brute_pr_curve(scores, labels):
    """(threshold, recall, precision) at every distinct score, high to low."""
    n_pos = sum(1 for y in labels if y == 1)
    points = []
    for t in sorted(set(scores), reverse=True):
        tp, fp, _ = confusion_at(scores, labels, t)
        points.append((t, tp / n_pos, tp / (tp + fp)))
    return points


def brute_average_precision(scores, labels):
    total, prev_recall = 0.0, 0.0
    for _, recall, precision in brute_pr_curve(scores, labels):
        total += (recall - prev_recall) * precision
        prev_recall = recall
    return total


def brute_pr_auc(scores, labels):
    points = brute_pr_curve(scores, labels)
    area, r0, p0 = 0.0, 0.0, points[0][2]
    for _, r, p in points:
        area += (r - r0) * (p + p0) / 2
        r0, p0 = r, p
    return area


def brute_f1(scores, labels, threshold=0.5):
    tp = sum(1 for s, y in zip(scores, labels) if s > threshold and y == 1)
    fp = sum(1 for s, y in zip(scores, labels) if s > threshold and y != 1)
    fn = sum(1 for s, y in zip(scores, labels) if s <= threshold and y == 1)
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def random_scored_set(rng, n_max=20):
    n = int(rng.integers(2, n_max + 1))
    labels = rng.integers(0, 2, n)
    labels[rng.integers(n)] = 1
    # coarse grid so ties are common
    scores = rng.integers(0, 8, n) / 7.0 if rng.random() < 0.5 else rng.random(n)
    return scores, labels


def best_split(X, y, min_leaf=1):
    """Exhaustive search for the (feature, threshold) minimizing weighted Gini."""
    n = len(y)
    best = (math.inf, None, None)
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f].tolist()))
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2
            left = y[X[:, f] <= thr]
            right = y[X[:, f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            impurity = 0.0
            for side in (left, right):
                p = side.mean()
                impurity += len(side) / n * (1 - p * p - (1 - p) * (1 - p))
            if impurity < best[0] - 1e-15:
                best = (impurity, f, thr)
    return best


def jittered_xor(n_per_corner=10, jitter=0.15, seed=0):
    rng = np.random.default_rng(seed)
    X, y = [], []
    for cx, cy, label in ((1, 1, 0), (-1, -1, 0), (1, -1, 1), (-1, 1, 1)):
        pts = np.c_[np.full(n_per_corner, cx), np.full(n_per_corner, cy)] + rng.normal(0, jitter, (n_per_corner, 2))
        X.append(pts)
        y += [label] * n_per_corner
    return np.vstack(X), np.array(y)


# log-spaced grid spanning the default SVM search box
C_GRID = [1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3]
GAMMA_GRID = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
