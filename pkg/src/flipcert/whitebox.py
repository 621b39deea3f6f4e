"""White-box flip counts for a single kernel classifier whose scores are linear in the labels.

Applies to the small-C kernel SVM (raw kernel rows) and to kernel ridge
regression (effective kernel rows). Class ``c`` scores ``p_c = sum_i y_i^c q_i``.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import (
    INF,
    AmbiguousPrediction,
    CertificateOutcome,
    FlipCostMatrix,
    FlipCount,
    SizeMismatch,
    ValidationError,
    VoteConfig,
    as_labels,
    as_row,
    as_signed,
    class_scores,
    from_one_hot,
    predict,
)


def _labels(labels, num_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim == 2:
        y = from_one_hot(y)
    return as_labels(y, num_classes)


def _check_target(target: int, num_classes: int) -> int:
    if not (0 <= int(target) < num_classes):
        raise ValidationError(f"target class {target} outside [0, {num_classes})")
    return int(target)


def greedy_min_count(reductions: np.ndarray, gap: float, strict: bool, tol: float = 0.0) -> FlipCount:
    """Fewest of the largest ``reductions`` whose sum passes ``gap``.

    ``strict`` demands the sum exceed the gap, otherwise reaching it suffices.
    A positive ``tol`` counts any sum within ``tol`` of the gap as passing.
    Equal reductions are taken in index order.
    """
    gap = float(gap) - tol
    if (gap < 0) if strict else (gap <= 0):
        return 0
    pos = np.flatnonzero(reductions > 0)
    if pos.size == 0:
        return INF
    ordered = reductions[pos][np.argsort(-reductions[pos], kind="stable")]
    remaining = gap - np.cumsum(ordered)
    hit = np.flatnonzero(remaining < 0 if strict else remaining <= 0)
    return int(hit[0]) + 1 if hit.size else INF


def binary_exact_min_flips(y, q, tol: float = 0.0) -> FlipCount:
    """Minimum label flips that zero or reverse the sign of ``sum_i y_i q_i``.

    Reaching a zero margin counts as a successful attack.
    """
    y = as_signed(y)
    row = as_row(q, y.size)
    margin = float(np.dot(y, row))
    if margin == 0:
        raise AmbiguousPrediction("zero margin: the clean prediction is undefined")
    contrib = np.sign(margin) * y * row
    # flipping sample i moves the margin by 2*a_i
    return greedy_min_count(2.0 * contrib, abs(margin), strict=False, tol=tol)


def sample_reductions(y: np.ndarray, q: np.ndarray, top: int, target: int) -> np.ndarray:
    """Largest cut in ``p_top - p_target`` obtainable by relabeling each sample alone.

    Samples of class ``top`` help by moving to ``target`` when ``q > 0``, samples
    of ``target`` by moving to ``top`` when ``q < 0``; any other sample moves to
    whichever of the two its sign favours.
    """
    r = np.abs(q)
    r = np.where(y == top, np.maximum(2.0 * q, 0.0), r)
    r = np.where(y == target, np.maximum(-2.0 * q, 0.0), r)
    return r


def targeted_flips_lower(labels, q, target: int, num_classes: int, tol: float = 0.0) -> FlipCount:
    """Fewest flips making ``target`` beat the clean prediction (ignoring other classes).

    This is exact for the relaxed problem and a lower bound on the flips needed
    to make ``target`` the predicted class.
    """
    y = _labels(labels, num_classes)
    row = as_row(q, y.size)
    target = _check_target(target, num_classes)
    scores = class_scores(y, row, num_classes)
    top = predict(scores)
    if target == top:
        return 0
    gap = scores[top] - scores[target]
    r = sample_reductions(y, row, top, target)
    return greedy_min_count(r, gap, strict=target > top, tol=tol)


def targeted_flips_upper(labels, q, target: int, num_classes: int) -> FlipCount:
    """Flip count of a feasible attack that makes ``target`` the predicted class.

    Each round flips the sample with the largest damage to the current leader's
    margin over ``target``; the damage of a leader-class sample is capped by how
    far the runner-up trails the leader.
    """
    y0 = _labels(labels, num_classes)
    row = as_row(q, y0.size)
    target = _check_target(target, num_classes)
    y = y0.copy()
    n = y.size
    scores = class_scores(y, row, num_classes)
    top = predict(scores)
    flips = 0
    while top != target:
        if flips >= n:
            return INF
        others = np.delete(scores, top)
        lead = scores[top] - others.max()
        mag = np.abs(row)
        capped = np.minimum(2.0 * mag, mag + lead)
        damage = np.zeros(n)
        case1 = (y == top) & (row > 0)
        case2 = ~case1 & (y == target) & (row < 0)
        case3 = (y != top) & (y != target) & (row > 0)
        damage[case1 | case2] = capped[case1 | case2]
        damage[case3] = row[case3]
        pick = int(np.argmax(damage))
        if damage[pick] <= 0:
            return INF
        y[pick] = top if y[pick] == target else target
        flips += 1
        scores = class_scores(y, row, num_classes)
        top = predict(scores)
    return int(np.count_nonzero(y != y0))


def standalone_exact_radius(
    labels,
    q,
    num_classes: int,
    index: int = 0,
    true_label: Optional[int] = None,
    tol: float = 0.0,
) -> CertificateOutcome:
    """Exact certified radius of one unpartitioned classifier for one test row."""
    y = _labels(labels, num_classes)
    row = as_row(q, y.size)
    top = predict(class_scores(y, row, num_classes))
    best = min(
        targeted_flips_lower(y, row, c, num_classes, tol=tol)
        for c in range(num_classes)
        if c != top
    )
    radius = best - 1 if best != INF else INF
    correct = None if true_label is None else bool(top == true_label)
    return CertificateOutcome(index, top, radius, radius, correct)


def flip_cost_matrix(
    partition_labels: Sequence,
    partition_rows: Sequence,
    num_classes: int,
    bound_kind: str = "lower",
    tol: float = 0.0,
) -> tuple[FlipCostMatrix, VoteConfig]:
    """Flip-cost matrix and base-classifier votes of an ensemble for one test sample.

    Entry ``[i, c]`` bounds the flips inside partition ``i`` that move its vote to ``c``.
    """
    if len(partition_labels) != len(partition_rows):
        raise SizeMismatch("need exactly one kernel row per partition")
    if bound_kind not in ("lower", "upper"):
        raise ValidationError(f"bound kind must be 'lower' or 'upper', got {bound_kind!r}")
    votes = []
    rho = np.zeros((len(partition_labels), num_classes))
    for i, (labels, q) in enumerate(zip(partition_labels, partition_rows)):
        y = _labels(labels, num_classes)
        row = as_row(q, y.size)
        votes.append(predict(class_scores(y, row, num_classes)))
        for c in range(num_classes):
            if bound_kind == "lower":
                rho[i, c] = targeted_flips_lower(y, row, c, num_classes, tol=tol)
            else:
                rho[i, c] = targeted_flips_upper(y, row, c, num_classes)
    return FlipCostMatrix(rho, bound_kind), VoteConfig(np.array(votes), num_classes)
