"""Ensemble certificates for partition-aggregation voting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    INF,
    ConsistencyError,
    FlipCostMatrix,
    FlipCount,
    ValidationError,
    VoteConfig,
)

R_MAX = 2


def ssdpa_radius(votes: VoteConfig) -> int:
    """Black-box radius: every base classifier is assumed to flip with one label."""
    counts = votes.counts
    top = votes.winner
    runner = max(counts[c] + (c < top) for c in range(votes.num_classes) if c != top)
    return max(0, (int(counts[top]) - int(runner)) // 2)


@dataclass(frozen=True)
class MckpInstance:
    """Multiple-choice knapsack for making ``target`` overtake the current winner.

    ``options[i]`` lists ``(cost, reduction)`` pairs for classifier ``i``; the first is
    always ``(0, 0)`` (leave it alone). A solution picks one option per classifier
    with total reduction at least ``threshold`` and minimum total cost.
    """

    options: tuple
    threshold: int

    @property
    def rho_max(self) -> int:
        return max(c for opts in self.options for c, _ in opts)

    def effective(self):
        """Options as ``(profit, weight)`` with ``profit = rho_max - cost``, ``weight = 2 - reduction``."""
        top = self.rho_max
        return [[(top - c, R_MAX - r) for c, r in opts] for opts in self.options]

    @property
    def capacity(self) -> int:
        return len(self.options) * R_MAX - self.threshold


def build_mckp(rho: FlipCostMatrix, votes: VoteConfig, target: int) -> MckpInstance:
    rho.check_votes(votes)
    top = votes.winner
    if not (0 <= target < votes.num_classes) or target == top:
        raise ValidationError(f"target {target} must be a class other than the winner {top}")
    counts = votes.counts
    threshold = int(counts[top] - counts[target]) + int(top < target)
    options = []
    for i, v in enumerate(votes.votes):
        opts = [(0, 0)]
        if v == top:
            to_target = rho.entry(i, target)
            if to_target != INF:
                opts.append((to_target, 2))
            row = np.array(rho.rho[i], copy=True)
            row[top] = np.inf
            cheapest = int(np.argmin(row))
            if cheapest != target and np.isfinite(row[cheapest]):
                opts.append((int(row[cheapest]), 1))
        elif v != target:
            to_target = rho.entry(i, target)
            if to_target != INF:
                opts.append((to_target, 1))
        options.append(tuple(opts))
    return MckpInstance(tuple(options), threshold)


def solve_mckp(instance: MckpInstance) -> FlipCount:
    """Minimum cost reaching the reduction threshold, by DP over capped reduction."""
    need = instance.threshold
    if need <= 0:
        return 0
    best = [INF] * (need + 1)
    best[0] = 0
    for opts in instance.options:
        nxt = [INF] * (need + 1)
        for s, base in enumerate(best):
            if base == INF:
                continue
            for cost, red in opts:
                j = min(need, s + red)
                if base + cost < nxt[j]:
                    nxt[j] = base + cost
        best = nxt
    return best[need]


def mckp_p2(rho: FlipCostMatrix, votes: VoteConfig, target: int) -> FlipCount:
    """Fewest total flips making ``target`` out-vote the current winner."""
    cost = solve_mckp(build_mckp(rho, votes, target))
    if cost == 0:
        raise ConsistencyError("target already wins without any flips")
    return cost


def ensemble_radius(rho: FlipCostMatrix, votes: VoteConfig) -> FlipCount:
    """Flips the ensemble vote provably withstands given per-classifier flip costs.

    Exact when ``rho`` is exact; a lower (upper) bound when ``rho`` is.
    """
    rho.check_votes(votes)
    top = votes.winner
    best = min(mckp_p2(rho, votes, c) for c in range(votes.num_classes) if c != top)
    return INF if best == INF else max(0, best - 1)


def rs_targeted_radius(p: float, q_noise: float) -> float:
    """Targeted radius of a label-smoothed classifier from a switching-probability bound ``p``."""
    if not 0 < p < 1:
        raise ValidationError(f"switching probability must lie in (0, 1), got {p}")
    if not 0 < q_noise < 0.5:
        raise ValidationError(f"label noise must lie in (0, 0.5), got {q_noise}")
    value = math.log(4 * p * (1 - p)) / (2 * (1 - 2 * q_noise) * math.log(q_noise / (1 - q_noise)))
    return value + 0.0  # p = 1/2 gives -0.0


def rs_certified_flips(p: float, q_noise: float) -> int:
    value = rs_targeted_radius(p, q_noise)
    return math.floor(value) if value > 0 else 0
