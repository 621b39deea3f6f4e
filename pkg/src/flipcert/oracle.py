"""Brute-force references for tiny instances.

These enumerate the search spaces outright and share no code with the greedy
and dynamic-programming paths beyond score computation and the tie rule.
"""
from __future__ import annotations

import itertools
from typing import Optional

import numpy as np

from .core import (
    INF,
    FlipCostMatrix,
    FlipCount,
    InstanceTooLarge,
    NumericFailure,
    ValidationError,
    VoteConfig,
    as_labels,
    as_row,
    as_signed,
    class_scores,
    from_one_hot,
    predict,
)

MAX_SAMPLES = 12
MAX_CLASSES = 4
MAX_CONFIGS = 5_000_000
MAX_SVM_SAMPLES = 200


def oracle_binary_min_flips(y, q, max_budget: Optional[int] = None) -> FlipCount:
    """Smallest Hamming distance to a labeling whose margin has the opposite sign or is zero."""
    y = as_signed(y)
    row = as_row(q, y.size)
    n = y.size
    if n > MAX_SAMPLES:
        raise InstanceTooLarge(f"binary oracle limited to n <= {MAX_SAMPLES}, got {n}")
    sign = np.sign(np.dot(y, row))
    if sign == 0:
        raise ValidationError("zero margin")
    budget = n if max_budget is None else min(n, max_budget)
    for k in range(budget + 1):
        for flip in itertools.combinations(range(n), k):
            yt = y.copy()
            yt[list(flip)] *= -1
            if sign * np.dot(yt, row) <= 0:
                return k
    return INF


def oracle_targeted_min_flips(
    labels, q, target: int, num_classes: int, max_budget: Optional[int] = None
) -> FlipCount:
    """Fewest label changes after which ``target`` is the predicted class.

    Searches relabelings in order of Hamming distance from ``labels``.
    """
    y = np.asarray(labels)
    if y.ndim == 2:
        y = from_one_hot(y)
    y = as_labels(y, num_classes)
    row = as_row(q, y.size)
    n = y.size
    if n > MAX_SAMPLES or num_classes > MAX_CLASSES:
        raise InstanceTooLarge(
            f"targeted oracle limited to n <= {MAX_SAMPLES}, K <= {MAX_CLASSES}; got n={n}, K={num_classes}"
        )
    if not 0 <= target < num_classes:
        raise ValidationError(f"target {target} outside [0, {num_classes})")
    budget = n if max_budget is None else min(n, max_budget)
    for k in range(budget + 1):
        for positions in itertools.combinations(range(n), k):
            choices = [[c for c in range(num_classes) if c != y[i]] for i in positions]
            for new in itertools.product(*choices):
                yt = y.copy()
                yt[list(positions)] = new
                if predict(class_scores(yt, row, num_classes)) == target:
                    return k
    return INF


def oracle_ensemble_p1(rho: FlipCostMatrix, votes: VoteConfig, target: int) -> FlipCount:
    """Cheapest vote configuration in which ``target`` wins the (smaller-index) majority."""
    rho.check_votes(votes)
    np_, k = votes.num_partitions, votes.num_classes
    if k ** np_ > MAX_CONFIGS:
        raise InstanceTooLarge(f"{k}^{np_} vote configurations exceed {MAX_CONFIGS}")
    best = INF
    for config in itertools.product(range(k), repeat=np_):
        counts = np.bincount(config, minlength=k)
        if int(np.argmax(counts)) != target:
            continue
        cost = sum(rho.rho[i, c] for i, c in enumerate(config))
        if cost < best:
            best = cost
    return best if best == INF else int(best)


def oracle_svm_dual(
    q, y, C: float, tol: float = 1e-10, max_sweeps: int = 100_000
) -> np.ndarray:
    """Solve the box-constrained SVM dual by cyclic projected coordinate descent.

    Minimizes ``-sum(a) + 0.5 a^T (y y^T * Q) a`` over ``0 <= a <= C``; stops when
    the largest projected-gradient magnitude drops to ``tol``.
    """
    q = np.asarray(q, dtype=np.float64)
    y = as_signed(y)
    n = y.size
    if q.shape != (n, n):
        raise ValidationError(f"kernel shape {q.shape} does not match {n} labels")
    if n > MAX_SVM_SAMPLES:
        raise InstanceTooLarge(f"SVM oracle limited to n <= {MAX_SVM_SAMPLES}")
    if not C > 0:
        raise ValidationError("C must be positive")
    h = (y[:, None] * y[None, :]) * q
    alpha = np.zeros(n)
    grad = -np.ones(n)
    for _ in range(max_sweeps):
        for i in range(n):
            g = grad[i]
            if h[i, i] > 0:
                new = min(max(alpha[i] - g / h[i, i], 0.0), C)
            elif g < 0:
                new = C
            elif g > 0:
                new = 0.0
            else:
                new = alpha[i]
            delta = new - alpha[i]
            if delta != 0.0:
                alpha[i] = new
                grad += delta * h[:, i]
        grad = h @ alpha - 1.0
        proj = np.where(alpha <= 0, np.minimum(grad, 0), np.where(alpha >= C, np.maximum(grad, 0), grad))
        if np.abs(proj).max() <= tol:
            return alpha
    raise NumericFailure(f"coordinate descent did not converge in {max_sweeps} sweeps")
