"""Soft-margin RBF support vector machine trained by SMO, with Platt scaling.

The dual ``min 1/2 a'Qa - e'a  s.t.  0 <= a <= C, s'a = 0`` (``s`` the +-1
labels, ``Q_ij = s_i s_j K_ij``) is solved by pairwise updates on the
maximal-violating pair, with the second index chosen by second-order gain.
Training stops once the KKT violation gap drops below ``tol``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from ..errors import DimensionMismatch, NonConvergenceWarning, SingleClassInput
from .tree import _as_matrix, check_xy

TOL = 1e-3
MAX_ITER = 1_000_000
TAU = 1e-12
PLATT_FOLDS = 3


def rbf_kernel(X, Z, gamma: float) -> np.ndarray:
    """``K[i, j] = exp(-gamma * ||X_i - Z_j||^2)``."""
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    sq = (X * X).sum(1)[:, None] + (Z * Z).sum(1)[None, :] - 2.0 * (X @ Z.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def default_gamma(X) -> float:
    """``1 / (n_features * var(X))``, or 1.0 for constant inputs."""
    X = np.asarray(X, dtype=np.float64)
    var = X.var()
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


@numba.njit(cache=True)
def _smo(K, s, C, tol, max_iter, trace):
    n = s.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    n_trace = trace.shape[0]
    it = 0
    converged = False
    while it < max_iter:
        if it < n_trace:
            obj = 0.0
            for t in range(n):
                obj += alpha[t] * (grad[t] - 1.0)
            trace[it] = 0.5 * obj

        gmax = -np.inf
        i = -1
        for t in range(n):
            if (s[t] > 0 and alpha[t] < C) or (s[t] < 0 and alpha[t] > 0):
                v = -s[t] * grad[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmax2 = -np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (s[t] > 0 and alpha[t] > 0) or (s[t] < 0 and alpha[t] < C):
                v = s[t] * grad[t]
                if v >= gmax2:
                    gmax2 = v
                if i >= 0:
                    diff = gmax + v
                    if diff > 0:
                        quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if quad <= 0:
                            quad = TAU
                        gain = -(diff * diff) / quad
                        if gain <= best:
                            best = gain
                            j = t
        if i < 0 or j < 0 or gmax + gmax2 < tol:
            converged = True
            break
        it += 1

        old_i = alpha[i]
        old_j = alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        if s[i] != s[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        for t in range(n):
            grad[t] += s[t] * (s[i] * K[t, i] * di + s[j] * K[t, j] * dj)

    # rho: mean of s*grad over free vectors, else the midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    acc = 0.0
    n_free = 0
    for t in range(n):
        yg = s[t] * grad[t]
        if alpha[t] >= C:
            if s[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if s[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            acc += yg
            n_free += 1
    rho = acc / n_free if n_free > 0 else (ub + lb) / 2.0
    return alpha, -rho, it, converged


@dataclass
class SmoResult:
    alpha: np.ndarray       # unsigned multipliers, 0 <= alpha <= C
    bias: float
    n_iter: int
    converged: bool
    objective: np.ndarray   # per-iteration dual objective (only when traced)


def solve_smo(K, y, C: float, tol: float = TOL, max_iter: int = MAX_ITER, trace: int = 0) -> SmoResult:
    """Solve the dual for a precomputed kernel matrix and 0/1 labels."""
    s = np.where(np.asarray(y) > 0, 1.0, -1.0)
    buf = np.zeros(trace)
    alpha, bias, it, converged = _smo(np.ascontiguousarray(K, dtype=np.float64), s, float(C),
                                      float(tol), int(max_iter), buf)
    return SmoResult(alpha, float(bias), int(it), bool(converged), buf[:min(trace, it + 1)])


def fit_platt(decision, y, max_iter: int = 100):
    """Fit ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by regularized maximum likelihood.

    Newton's method with backtracking line search on the negative
    log-likelihood against smoothed targets (Platt's prior correction).
    """
    f = np.asarray(decision, dtype=np.float64)
    y = np.asarray(y)
    prior1 = float((y == 1).sum())
    prior0 = float(len(y) - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(y == 1, hi, lo)
    A, B = 0.0, math.log((prior0 + 1.0) / (prior1 + 1.0))
    sigma, min_step, eps = 1e-12, 1e-10, 1e-5

    def objective(a, b):
        z = a * f + b
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)), (t - 1) * z + np.log1p(np.exp(z)))))

    fval = objective(A, B)
    for _ in range(max_iter):
        z = A * f + B
        ez = np.exp(-np.abs(z))
        p = np.where(z >= 0, ez / (1 + ez), 1 / (1 + ez))
        q = 1 - p
        d2 = p * q
        h11 = sigma + float(np.sum(f * f * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(f * d2))
        d1 = t - p
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA, newB = A + step * dA, B + step * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        else:
            break
    return A, B


def sigmoid_probability(decision, A: float, B: float):
    z = A * np.asarray(decision, dtype=np.float64) + B
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, ez / (1 + ez), 1 / (1 + ez))


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray          # signed: label * multiplier
    bias: float
    gamma: float
    C: float
    platt_a: float
    platt_b: float
    converged: bool = True
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.alphas + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid_probability(self.decision_function(X), self.platt_a, self.platt_b)

    def to_dict(self) -> dict:
        return {
            "kind": "svm",
            "gamma": self.gamma,
            "C": self.C,
            "bias": self.bias,
            "platt": {"A": self.platt_a, "B": self.platt_b},
            "converged": self.converged,
            "n_iter": self.n_iter,
            "alphas": self.alphas.tolist(),
            "support_vectors": self.support_vectors.tolist(),
        }

    @classmethod
    def from_dict(cls, doc) -> "SvmModel":
        sv = np.asarray(doc["support_vectors"], dtype=np.float64)
        return cls(
            support_vectors=sv.reshape(len(doc["alphas"]), -1),
            alphas=np.asarray(doc["alphas"], dtype=np.float64),
            bias=float(doc["bias"]),
            gamma=float(doc["gamma"]),
            C=float(doc["C"]),
            platt_a=float(doc["platt"]["A"]),
            platt_b=float(doc["platt"]["B"]),
            converged=bool(doc["converged"]),
            n_iter=int(doc["n_iter"]),
        )


def _stratified_folds(y, k, rng):
    fold = np.empty(len(y), dtype=np.int64)
    for label in (0, 1):
        members = np.flatnonzero(y == label)
        members = members[rng.permutation(len(members))]
        fold[members] = np.arange(len(members)) % k
    return fold


def _decision_from_kernel(K_rows, y_train, result: SmoResult):
    signed = np.where(y_train > 0, 1.0, -1.0) * result.alpha
    return K_rows @ signed + result.bias


def train_svm(X, y, C: float = 1.0, gamma: float | None = None, seed: int = 0,
              tol: float = TOL, max_iter: int = MAX_ITER) -> SvmModel:
    """Train the SVM and calibrate it on out-of-fold decision values.

    Calibration uses an internal stratified 3-fold split; if any fold's
    training side holds a single class, in-sample decisions are used.
    Hitting ``max_iter`` emits :class:`NonConvergenceWarning` and sets
    ``converged=False`` on the returned model.
    """
    X, y = check_xy(X, y)
    if len(np.unique(y)) < 2:
        raise SingleClassInput("SVM training needs both pristine and manipulated examples")
    if C <= 0:
        raise ValueError("C must be positive")
    gamma = default_gamma(X) if gamma is None else float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    K = rbf_kernel(X, X, gamma)
    full = solve_smo(K, y, C, tol, max_iter)
    converged = full.converged

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    fold = _stratified_folds(y, PLATT_FOLDS, rng)
    decision = np.empty(len(y))
    usable = True
    for k in range(PLATT_FOLDS):
        train = np.flatnonzero(fold != k)
        test = np.flatnonzero(fold == k)
        if len(test) == 0:
            continue
        if len(np.unique(y[train])) < 2:
            usable = False
            break
        part = solve_smo(K[np.ix_(train, train)], y[train], C, tol, max_iter)
        decision[test] = _decision_from_kernel(K[np.ix_(test, train)], y[train], part)
    if not usable:
        decision = _decision_from_kernel(K, y, full)
    A, B = fit_platt(decision, y)

    if not converged:
        warnings.warn(f"SMO stopped at the {max_iter}-iteration cap", NonConvergenceWarning, stacklevel=2)
    sv = full.alpha > 0
    signs = np.where(y > 0, 1.0, -1.0)
    return SvmModel(
        support_vectors=X[sv].copy(),
        alphas=(signs * full.alpha)[sv],
        bias=full.bias,
        gamma=gamma,
        C=float(C),
        platt_a=float(A),
        platt_b=float(B),
        converged=converged,
        n_iter=full.n_iter,
    )


def predict_svm(model: SvmModel, x) -> float:
    return float(model.predict_proba(x)[0])
