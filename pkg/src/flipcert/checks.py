"""Randomized cross-checks of the fast certificates against the brute-force oracles."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import INF, FlipCostMatrix, VoteConfig, class_scores, predict
from .ensemble import ensemble_radius, mckp_p2, ssdpa_radius
from .oracle import oracle_binary_min_flips, oracle_ensemble_p1, oracle_targeted_min_flips
from .whitebox import binary_exact_min_flips, targeted_flips_lower, targeted_flips_upper

log = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    trials: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, msg: str) -> None:
        self.failures.append(msg)
        log.warning("%s: %s", self.name, msg)


def random_kernel_row(rng: np.random.Generator, n: int, integer: bool = False) -> np.ndarray:
    if integer:
        return rng.integers(-3, 4, size=n).astype(np.float64)
    return rng.uniform(-1.0, 1.0, size=n)


def random_binary_instance(rng, max_n: int = 12, integer: bool = False):
    while True:
        n = int(rng.integers(1, max_n + 1))
        y = rng.choice([-1, 1], size=n)
        q = random_kernel_row(rng, n, integer)
        if np.dot(y, q) != 0:
            return y, q


def random_multiclass_instance(rng, max_n: int = 8, max_k: int = 3, integer: bool = False):
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(2, max_k + 1))
    return rng.integers(0, k, size=n), random_kernel_row(rng, n, integer), k


def random_ensemble_instance(rng, max_np: int = 6, max_k: int = 4, max_cost: int = 3, p_inf: float = 0.2):
    np_ = int(rng.integers(1, max_np + 1))
    k = int(rng.integers(2, max_k + 1))
    votes = rng.integers(0, k, size=np_)
    rho = rng.integers(1, max_cost + 1, size=(np_, k)).astype(np.float64)
    rho[rng.random((np_, k)) < p_inf] = np.inf
    rho[np.arange(np_), votes] = 0
    return FlipCostMatrix(rho, "exact"), VoteConfig(votes, k)


def check_binary(rng, trials: int) -> CheckResult:
    res = CheckResult("binary exact vs Hamming-ball oracle")
    for t in range(trials):
        y, q = random_binary_instance(rng, integer=bool(t % 4 == 3))
        got, want = binary_exact_min_flips(y, q), oracle_binary_min_flips(y, q)
        res.trials += 1
        if got != want:
            res.fail(f"y={y.tolist()} q={q.tolist()}: greedy {got}, oracle {want}")
    return res


def check_targeted(rng, trials: int) -> CheckResult:
    res = CheckResult("targeted lower <= oracle <= upper, min-lower == min-oracle")
    for t in range(trials):
        y, q, k = random_multiclass_instance(rng, integer=bool(t % 4 == 3))
        top = predict(class_scores(y, q, k))
        lows, exacts = [], []
        for c in range(k):
            lo = targeted_flips_lower(y, q, c, k)
            ex = oracle_targeted_min_flips(y, q, c, k)
            hi = targeted_flips_upper(y, q, c, k)
            if not lo <= ex <= hi:
                res.fail(f"y={y.tolist()} q={q.tolist()} target={c}: {lo} <= {ex} <= {hi} fails")
            if c != top:
                lows.append(lo)
                exacts.append(ex)
        if min(lows) != min(exacts):
            res.fail(f"y={y.tolist()} q={q.tolist()}: min lower {min(lows)} != min oracle {min(exacts)}")
        res.trials += 1
    return res


def check_knapsack_vs_program(rng, trials: int) -> CheckResult:
    res = CheckResult("min over targets: knapsack DP == exhaustive integer program")
    for _ in range(trials):
        rho, votes = random_ensemble_instance(rng)
        top = votes.winner
        p1 = [oracle_ensemble_p1(rho, votes, c) for c in range(votes.num_classes) if c != top]
        p2 = [mckp_p2(rho, votes, c) for c in range(votes.num_classes) if c != top]
        if min(p1) != min(p2):
            res.fail(f"rho={rho.rho.tolist()} votes={votes.votes.tolist()}: P1 {min(p1)} != P2 {min(p2)}")
        for a, b in zip(p1, p2):
            if b > a:
                res.fail(f"rho={rho.rho.tolist()} votes={votes.votes.tolist()}: P2 {b} > P1 {a}")
        res.trials += 1
    return res


def check_blackbox(rng, trials: int, max_np: int = 50, max_k: int = 10) -> CheckResult:
    res = CheckResult("unit flip costs reproduce the black-box radius")
    for _ in range(trials):
        np_ = int(rng.integers(1, max_np + 1))
        k = int(rng.integers(2, max_k + 1))
        votes = VoteConfig(rng.integers(0, k, size=np_), k)
        ones = np.ones((np_, k))
        ones[np.arange(np_), votes.votes] = 0
        bb = ssdpa_radius(votes)
        got = ensemble_radius(FlipCostMatrix(ones), votes)
        if got != bb:
            res.fail(f"votes={votes.votes.tolist()}: unit-cost radius {got} != black-box {bb}")
        heavy = rng.integers(1, 6, size=(np_, k)).astype(np.float64)
        heavy[rng.random((np_, k)) < 0.1] = INF
        heavy[np.arange(np_), votes.votes] = 0
        wb = ensemble_radius(FlipCostMatrix(heavy), votes)
        if wb < bb:
            res.fail(f"votes={votes.votes.tolist()}: white-box {wb} < black-box {bb}")
        res.trials += 1
    return res


def run_all(seed: int, trials: int) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_binary(rng, trials),
        check_targeted(rng, trials),
        check_knapsack_vs_program(rng, trials),
        check_blackbox(rng, trials),
    ]
