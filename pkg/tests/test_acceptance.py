"""Exit criteria. Each test prints one ``[ACCEPT n] PASS|FAIL`` line.

Run alone with ``pytest tests/test_acceptance.py -s -m acceptance``.
"""
import json
import time

import numpy as np
import pytest

from flipcert import cli
from flipcert.checks import (
    random_binary_instance,
    random_ensemble_instance,
    random_multiclass_instance,
)
from flipcert.core import INF, CertConfig, FlipCostMatrix, VoteConfig, class_scores, predict, save_dataset
from flipcert.ensemble import ensemble_radius, mckp_p2, rs_targeted_radius, ssdpa_radius
from flipcert.kernels import EffectiveKernel, check_small_c, max_small_c
from flipcert.oracle import (
    oracle_binary_min_flips,
    oracle_ensemble_p1,
    oracle_svm_dual,
    oracle_targeted_min_flips,
)
from flipcert.pipeline import evaluate, make_two_gaussians
from flipcert.whitebox import binary_exact_min_flips, targeted_flips_lower, targeted_flips_upper

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPT {num}] {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def test_binary_exactness(report):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    mismatches = []
    trials = 500
    for _ in range(trials):
        y, q = random_binary_instance(rng, max_n=12)
        got, want = binary_exact_min_flips(y, q), oracle_binary_min_flips(y, q)
        if got != want:
            mismatches.append((y.tolist(), q.tolist(), got, want))
    elapsed = time.perf_counter() - start
    report(1, not mismatches and elapsed < 30,
           f"binary greedy == Hamming oracle on {trials} instances, {len(mismatches)} mismatches, {elapsed:.1f}s (<30s)")


def test_targeted_sandwich(report):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    trials, sandwich_bad, min_bad = 300, 0, 0
    for _ in range(trials):
        y, q, k = random_multiclass_instance(rng, max_n=8, max_k=3)
        top = predict(class_scores(y, q, k))
        lows, exact = [], []
        for c in range(k):
            lo = targeted_flips_lower(y, q, c, k)
            ex = oracle_targeted_min_flips(y, q, c, k)
            hi = targeted_flips_upper(y, q, c, k)
            sandwich_bad += not (lo <= ex <= hi)
            if c != top:
                lows.append(lo)
                exact.append(ex)
        min_bad += min(lows) != min(exact)
    elapsed = time.perf_counter() - start
    ok = sandwich_bad == 0 and min_bad == 0 and elapsed < 60
    report(2, ok, f"lower <= oracle <= upper on {trials} instances ({sandwich_bad} violations), "
                  f"min-lower == min-oracle ({min_bad} mismatches), {elapsed:.1f}s (<60s)")


def test_knapsack_matches_integer_program(report):
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    trials, bad = 300, 0
    for _ in range(trials):
        rho, votes = random_ensemble_instance(rng, max_np=6, max_k=4, max_cost=3)
        targets = [c for c in range(votes.num_classes) if c != votes.winner]
        p1 = min(oracle_ensemble_p1(rho, votes, c) for c in targets)
        p2 = min(mckp_p2(rho, votes, c) for c in targets)
        bad += p1 != p2
    elapsed = time.perf_counter() - start
    report(3, bad == 0 and elapsed < 60,
           f"min P1 (exhaustive) == min P2 (knapsack DP) on {trials} instances, {bad} mismatches, {elapsed:.1f}s (<60s)")


def test_black_box_consistency(report):
    rng = np.random.default_rng(404)
    trials, unit_bad, dom_bad = 1000, 0, 0
    for _ in range(trials):
        np_ = int(rng.integers(1, 51))
        k = int(rng.integers(2, 11))
        votes = VoteConfig(rng.integers(0, k, np_), k)
        rows = np.arange(np_)
        ones = np.ones((np_, k))
        ones[rows, votes.votes] = 0
        bb = ssdpa_radius(votes)
        unit_bad += ensemble_radius(FlipCostMatrix(ones), votes) != bb
        heavy = rng.integers(1, 10, (np_, k)).astype(float)
        heavy[rng.random((np_, k)) < 0.1] = np.inf
        heavy[rows, votes.votes] = 0
        dom_bad += ensemble_radius(FlipCostMatrix(heavy), votes) < bb
    report(4, unit_bad == 0 and dom_bad == 0,
           f"unit costs reproduce black-box radius ({unit_bad} mismatches), "
           f"random costs >= 1 never below it ({dom_bad} violations) over {trials} vote configurations")


def test_small_c_duals_saturate(report):
    rng = np.random.default_rng(505)
    trials, held, violated, worst, nonvacuous = 100, 0, 0, 0.0, False
    for t in range(trials):
        n = int(rng.integers(2, 51))
        a = rng.standard_normal((n, int(rng.integers(1, n + 1))))
        q = a @ a.T
        y = rng.choice([-1, 1], n)
        c = max_small_c(q) * (rng.uniform(0.2, 1.0) if t % 4 else rng.uniform(3.0, 10.0))
        alpha = oracle_svm_dual(q, y, c)
        if check_small_c(q, c):
            held += 1
            worst = max(worst, float(np.abs(alpha - c).max()))
        else:
            violated += 1
            nonvacuous |= bool(np.any(np.abs(alpha - c) > 1e-6))
    ok = held > 0 and worst <= 1e-8 and nonvacuous
    report(5, ok, f"{held} small-C instances: max |alpha - C| = {worst:.2e} (<=1e-8); "
                  f"{violated} violating instances, some alpha_i != C: {nonvacuous}")


def test_effective_kernel_residual(report):
    rng = np.random.default_rng(606)
    trials, worst = 100, 0.0
    for t in range(trials):
        m = int(rng.integers(1, 101))
        rank = int(rng.integers(1, m + 1))
        a = rng.standard_normal((m, rank))
        q = a @ a.T
        lam = [1e-3, 0.1, 1.0, 100.0][t % 4]
        b = rng.standard_normal(m) * 10 ** rng.uniform(-2, 2)
        solver = EffectiveKernel(q, lam)
        z = solver.row(b)
        resid = np.abs((q + lam * np.eye(m)) @ z - b).max() / (1 + np.abs(b).max())
        worst = max(worst, float(resid))
    report(6, worst <= 1e-10, f"worst scaled multiply-back residual over {trials} systems = {worst:.2e} (<=1e-10)")


def test_smoothing_spot_values(report):
    import mpmath

    zero = rs_targeted_radius(0.5, 0.1)
    with mpmath.workdps(50):
        p, qn = mpmath.mpf("1e-6"), mpmath.mpf("0.1")
        ref = float(mpmath.log(4 * p * (1 - p)) / (2 * (1 - 2 * qn) * mpmath.log(qn / (1 - qn))))
    got = rs_targeted_radius(1e-6, 0.1)
    ok = zero == 0 and abs(got - ref) <= 1e-6
    report(7, ok, f"p=0.5 -> {zero} (exactly 0); p=1e-6,q=0.1 -> {got:.9f} vs high-precision {ref:.9f} (tol 1e-6)")


def test_desk_scale_trend(report):
    start = time.perf_counter()
    train = make_two_gaussians(400, 4, 3.0, seed=7)
    test = make_two_gaussians(200, 4, 3.0, seed=8)
    cfg = CertConfig("regression", lam=1.0)
    reports = {np_: evaluate(train, test, np_, cfg, mode="both") for np_ in (1, 5, 10, 20)}
    standalone = evaluate(train, test, 1, cfg, mode="standalone")
    elapsed = time.perf_counter() - start

    mcr = {np_: (r.mcr("lb"), r.mcr("blackbox")) for np_, r in reports.items()}
    dominates = all(lb >= bb for lb, bb in mcr.values())
    strict = all(mcr[np_][0] > mcr[np_][1] for np_ in (5, 10))
    bb_curve = reports[20].curve("blackbox")
    collapse = next(r for r, acc in enumerate(bb_curve + [0.0]) if acc == 0)
    sa_acc = reports[1].curve("lb", collapse)[collapse]
    sa_exact = [o.radius_lower for o in standalone.outcomes] == [o.radius_lower for o in reports[1].outcomes]
    ok = dominates and strict and sa_acc > 0 and sa_exact and elapsed < 120
    detail = ", ".join(f"Np={k}: MCR-LB {v[0]} vs black-box {v[1]}" for k, v in mcr.items())
    report(8, ok, f"{detail}; standalone cert. acc. at black-box collapse r={collapse}: {sa_acc:.3f} (>0); "
                  f"{elapsed:.1f}s (<120s)")


def test_cli_determinism(report, tmp_path):
    save_dataset(make_two_gaussians(120, 4, 3.0, seed=1), tmp_path / "train.json")
    save_dataset(make_two_gaussians(30, 4, 3.0, seed=2), tmp_path / "test.json")
    outs = []
    for i, threads in enumerate((1, 4)):
        out = tmp_path / f"results{i}.json"
        code = cli.main(
            ["certify", "--train", str(tmp_path / "train.json"), "--test", str(tmp_path / "test.json"),
             "--partitions", "6", "--loss", "regression", "--lambda", "1", "--kernel", "linear",
             "--mode", "both", "--out", str(out), "--threads", str(threads)]
        )
        assert code == 0
        outs.append(out.read_bytes())
    n = len(json.loads(outs[0])["results"])
    report(9, outs[0] == outs[1], f"two certify runs ({n} samples) produce byte-identical results.json")
