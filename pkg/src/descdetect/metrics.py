"""Precision-recall evaluation: PR curve, average precision, PR-AUC, F1 and
the prevalence baseline.

"AUC" throughout means area under the precision-recall curve. A random
scorer's PR-AUC equals the positive prevalence, which is how the baseline
triple ends up at the prevalence on all three metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NoPositives


@dataclass(frozen=True)
class PrCurve:
    recall: np.ndarray
    precision: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self):
        return list(zip(self.recall.tolist(), self.precision.tolist()))

    def __len__(self):
        return len(self.thresholds)


@dataclass(frozen=True)
class EvaluationReport:
    f1: float
    pr_auc: float
    ap: float
    baseline: float
    n_pos: int
    n_total: int
    curve: PrCurve | None = field(default=None, compare=False)

    def summary(self) -> dict:
        return {"f1": self.f1, "pr_auc": self.pr_auc, "ap": self.ap, "baseline": self.baseline,
                "n_pos": self.n_pos, "n_total": self.n_total}


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DimensionMismatch(f"{scores.size} scores but {labels.size} labels")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    return scores, (labels == 1).astype(np.int64)


def pr_curve(scores, labels) -> PrCurve:
    """One (recall, precision) point per distinct score, highest score first."""
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise NoPositives("precision-recall needs at least one manipulated example")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    tp = np.cumsum(labels[order])
    # last index of each tie group
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), len(s) - 1]
    tp = tp[last]
    predicted = last + 1
    return PrCurve(recall=tp / n_pos, precision=tp / predicted, thresholds=s[last])


def average_precision(scores, labels) -> float:
    """Step integral ``sum (R_n - R_{n-1}) P_n`` with ``R_0 = 0``."""
    curve = pr_curve(scores, labels)
    return float(np.sum(np.diff(curve.recall, prepend=0.0) * curve.precision))


def pr_auc(scores, labels) -> float:
    """Trapezoidal area under the PR points, extended left to recall 0 at the
    first point's precision."""
    curve = pr_curve(scores, labels)
    r = np.r_[0.0, curve.recall]
    p = np.r_[curve.precision[0], curve.precision]
    return float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))


def f1_score(scores, labels, threshold: float = 0.5) -> float:
    """F1 of the hard decisions ``score > threshold``; 0 with no positive predictions."""
    scores, labels = _check(scores, labels)
    predicted = scores > threshold
    tp = int(np.sum(predicted & (labels == 1)))
    n_pred = int(predicted.sum())
    n_pos = int(labels.sum())
    if n_pred == 0 or n_pos == 0 or tp == 0:
        return 0.0
    precision = tp / n_pred
    recall = tp / n_pos
    return 2 * precision * recall / (precision + recall)


def evaluate(scores, labels, threshold: float = 0.5) -> EvaluationReport:
    scores, labels = _check(scores, labels)
    n_pos, n_total = int(labels.sum()), len(labels)
    curve = pr_curve(scores, labels)
    return EvaluationReport(
        f1=f1_score(scores, labels, threshold),
        pr_auc=pr_auc(scores, labels),
        ap=average_precision(scores, labels),
        baseline=n_pos / n_total,
        n_pos=n_pos,
        n_total=n_total,
        curve=curve,
    )


def baseline_report(n_pos: int, n_total: int, seeds: int = 100, seed: int = 0) -> EvaluationReport:
    """Mean metrics of a predictor that flags each video as manipulated with
    probability ``n_pos / n_total``, simulated as hard 0/1 scores."""
    if not 0 < n_pos < n_total:
        raise ValueError("need 0 < n_pos < n_total")
    p = n_pos / n_total
    labels = np.r_[np.ones(n_pos, dtype=np.int64), np.zeros(n_total - n_pos, dtype=np.int64)]
    f1s, aucs, aps = [], [], []
    for child in np.random.SeedSequence(seed).spawn(seeds):
        rng = np.random.default_rng(child)
        scores = (rng.random(n_total) < p).astype(np.float64)
        f1s.append(f1_score(scores, labels))
        aucs.append(pr_auc(scores, labels))
        aps.append(average_precision(scores, labels))
    return EvaluationReport(
        f1=float(np.mean(f1s)), pr_auc=float(np.mean(aucs)), ap=float(np.mean(aps)),
        baseline=p, n_pos=n_pos, n_total=n_total,
    )
