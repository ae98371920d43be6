"""Stratified splitting, training-budget subsampling and random-search CV.

All randomness is derived from explicit seeds through
:class:`numpy.random.SeedSequence`, keyed by (seed, split index) or
(seed, trial index), so splits and trials can run in any order or in
parallel and still produce the same results.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DegenerateStratum, DescDetectError
from .metrics import average_precision, f1_score

BUDGETS = (0.10, 0.25, 0.50, 0.75)
VALIDATION_FRACTION = 0.25

# stream tags keep the different consumers of one user seed independent
_SPLIT_STREAM = 1
_BUDGET_STREAM = 2
_SEQUESTER_STREAM = 3
_TRIAL_STREAM = 4
_FIT_STREAM = 5


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _class_members(labels):
    labels = np.asarray(labels)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    if len(pos) + len(neg) != len(labels):
        raise ValueError("labels must be 0 or 1")
    if len(pos) == 0 or len(neg) == 0:
        raise DegenerateStratum("both pristine and manipulated examples are required")
    return pos, neg


def stratified_counts(n_pos: int, n_neg: int, fraction: float) -> tuple:
    """Per-class draw sizes for a stratified cut of ``fraction``.

    The total is ``round(fraction * n)``; the minority class gets its own
    rounded share and the majority class absorbs the residual.
    """
    total = round_half_away(fraction * (n_pos + n_neg))
    if n_pos <= n_neg:
        k_pos = round_half_away(fraction * n_pos)
        k_neg = total - k_pos
    else:
        k_neg = round_half_away(fraction * n_neg)
        k_pos = total - k_neg
    return k_pos, k_neg


@dataclass(frozen=True)
class SplitPlan:
    splits: tuple          # ((train_idx, eval_idx), ...)
    n_splits: int
    eval_fraction: float
    seed: int


def stratified_shuffle_split(labels, n_splits: int = 10, eval_fraction: float = 0.25, seed: int = 0) -> SplitPlan:
    """Each class is shuffled and cut at ``round(class_count * eval_fraction)``
    independently; split ``k`` shuffles with stream (seed, k)."""
    if not 0 < eval_fraction < 1:
        raise ValueError("eval_fraction must lie in (0, 1)")
    pos, neg = _class_members(labels)
    cuts = []
    for members in (pos, neg):
        k = round_half_away(len(members) * eval_fraction)
        if k < 1 or k >= len(members):
            raise DegenerateStratum(
                f"a class of {len(members)} cannot appear on both sides of a {eval_fraction} cut")
        cuts.append(k)
    splits = []
    for i in range(n_splits):
        rng = _rng(seed, _SPLIT_STREAM, i)
        train, held = [], []
        for members, k in zip((pos, neg), cuts):
            shuffled = members[rng.permutation(len(members))]
            held.append(shuffled[:k])
            train.append(shuffled[k:])
        splits.append((np.sort(np.concatenate(train)), np.sort(np.concatenate(held))))
    return SplitPlan(tuple(splits), n_splits, eval_fraction, seed)


def _stratified_draw(labels, fraction, rng, reference=None):
    pos, neg = _class_members(labels)
    ref_pos, ref_neg = (len(pos), len(neg)) if reference is None else _class_sizes(reference)
    k_pos, k_neg = stratified_counts(ref_pos, ref_neg, fraction)
    if reference is not None:
        # both cuts rounding half up can ask for one row more than the pool holds;
        # the other class takes up the slack when it can
        if k_pos > len(pos):
            k_neg = min(len(neg), k_neg + k_pos - len(pos))
            k_pos = len(pos)
        if k_neg > len(neg):
            k_pos = min(len(pos), k_pos + k_neg - len(neg))
            k_neg = len(neg)
    if not (1 <= k_pos <= len(pos) and 1 <= k_neg <= len(neg)):
        raise DegenerateStratum(
            f"cannot draw {k_pos} manipulated + {k_neg} pristine from {len(pos)} + {len(neg)}")
    chosen = np.concatenate([pos[rng.permutation(len(pos))[:k_pos]], neg[rng.permutation(len(neg))[:k_neg]]])
    return np.sort(chosen)


def _class_sizes(labels):
    labels = np.asarray(labels)
    return int((labels == 1).sum()), int((labels == 0).sum())


def subsample_budget(labels, fraction: float, seed: int = 0, reference=None) -> np.ndarray:
    """Stratified draw of ``round(fraction * n)`` indices into ``labels``.

    ``reference`` (a label list) sets the population the fraction refers to
    when drawing from a sub-pool, e.g. 10% of all training videos drawn from
    the non-sequestered remainder.
    """
    if fraction not in BUDGETS:
        raise ConfigError(f"budget {fraction} is not one of {BUDGETS}")
    return _stratified_draw(labels, fraction, _rng(seed, _BUDGET_STREAM), reference)


def sequester_validation(labels, seed: int = 0, fraction: float = VALIDATION_FRACTION):
    """Single stratified cut returning ``(train_indices, validation_indices)``."""
    held = _stratified_draw(labels, fraction, _rng(seed, _SEQUESTER_STREAM))
    train = np.setdiff1d(np.arange(len(labels)), held)
    if len(np.unique(np.asarray(labels)[train])) < 2:
        raise DegenerateStratum("sequestering left a single class for training")
    return train, held


# -- search spaces -----------------------------------------------------------

@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0 < self.lo < self.hi and math.isfinite(self.hi)):
            raise ConfigError(f"log-uniform bounds must satisfy 0 < lo < hi, got {self.lo}, {self.hi}")

    def sample(self, rng):
        return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))

    def to_dict(self):
        return {"log_uniform": [self.lo, self.hi]}


@dataclass(frozen=True)
class IntUniform:
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"int-uniform bounds must satisfy lo < hi, got {self.lo}, {self.hi}")

    def sample(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))

    def to_dict(self):
        return {"int_uniform": [self.lo, self.hi]}


@dataclass(frozen=True)
class Categorical:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ConfigError("categorical distribution needs at least one value")

    def sample(self, rng):
        return self.values[int(rng.integers(len(self.values)))]

    def to_dict(self):
        return {"choice": list(self.values)}


def distribution_from_dict(doc):
    if isinstance(doc, dict) and len(doc) == 1:
        (kind, args), = doc.items()
        if kind == "log_uniform":
            return LogUniform(float(args[0]), float(args[1]))
        if kind == "int_uniform":
            return IntUniform(int(args[0]), int(args[1]))
        if kind == "choice":
            return Categorical(tuple(args))
        if kind == "choice_range":
            # {"choice_range": [extra..., lo, hi]}: extras plus every int in lo..hi
            *extra, lo, hi = args
            return Categorical(tuple(extra) + tuple(range(int(lo), int(hi) + 1)))
    raise ConfigError(f"cannot read search distribution {doc!r}")


SearchSpace = Mapping[str, object]

FOREST_SPACE = {
    "n_trees": IntUniform(10, 300),
    "max_depth": Categorical((None,) + tuple(range(2, 33))),
    "min_samples_leaf": IntUniform(1, 8),
    "features_per_split": Categorical(("sqrt", "log2", "all")),
}
SVM_SPACE = {
    "C": LogUniform(1e-2, 1e3),
    "gamma": LogUniform(1e-4, 1e1),
}


def sample_params(space: SearchSpace, seed: int, trial: int) -> dict:
    rng = _rng(seed, _TRIAL_STREAM, trial)
    return {name: space[name].sample(rng) for name in sorted(space)}


# -- random search -----------------------------------------------------------

SCORERS = {
    "average_precision": average_precision,
    "f1": f1_score,
}


@dataclass(frozen=True)
class TrialResult:
    trial: int
    params: dict
    scores: tuple
    mean_score: float
    error: str = ""


def fit_seed(seed: int, trial: int, split: int) -> int:
    return int(np.random.SeedSequence([seed, _FIT_STREAM, trial, split]).generate_state(1)[0])


def _run_trial(args):
    fit, X, y, splits, params, score, seed, trial = args
    scores = []
    error = ""
    for k, (train, held) in enumerate(splits):
        try:
            model = fit(X[train], y[train], params, fit_seed(seed, trial, k))
            scores.append(float(score(model.predict_proba(X[held]), y[held])))
        except (DescDetectError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            scores.append(-math.inf)
            error = f"{type(exc).__name__}: {exc}"
    mean = float(np.mean(scores)) if scores else -math.inf
    return TrialResult(trial, params, tuple(scores), mean, error)


def random_search(X, y, plan: SplitPlan, space: SearchSpace, n_trials: int, fit: Callable,
                  score="average_precision", seed: int = 0, workers: int = 1):
    """Score ``n_trials`` sampled assignments on every split of ``plan``.

    ``fit(X_train, y_train, params, seed)`` must return an object with
    ``predict_proba``. A trial that raises scores ``-inf`` on that split and
    is kept in the log. Returns ``(best_params, trials)``; ties on the mean
    go to the earliest trial.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    scorer = SCORERS[score] if isinstance(score, str) else score
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    jobs = [(fit, X, y, plan.splits, sample_params(space, seed, t), scorer, seed, t) for t in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_trial, jobs, chunksize=max(1, n_trials // (4 * workers))))
    else:
        trials = [_run_trial(job) for job in jobs]
    best = trials[0]
    for trial in trials[1:]:
        if trial.mean_score > best.mean_score:
            best = trial
    return best.params, trials


def trial_log(trials: Sequence[TrialResult], delimiter=",") -> str:
    """Delimiter-separated table: trial, params (JSON), per-split scores, mean."""
    n_splits = max((len(t.scores) for t in trials), default=0)
    out = io.StringIO()
    writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["trial", "params"] + [f"split{k}" for k in range(n_splits)] + ["mean", "error"])
    for t in trials:
        writer.writerow([t.trial, json.dumps(t.params, sort_keys=True)]
                        + [repr(s) for s in t.scores] + [repr(t.mean_score), t.error])
    return out.getvalue()
