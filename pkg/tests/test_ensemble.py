import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipcert.checks import random_ensemble_instance
from flipcert.core import INF, ConsistencyError, FlipCostMatrix, ValidationError, VoteConfig
from flipcert.ensemble import (
    build_mckp,
    ensemble_radius,
    mckp_p2,
    rs_certified_flips,
    rs_targeted_radius,
    solve_mckp,
    ssdpa_radius,
)
from flipcert.oracle import oracle_ensemble_p1


def votes_7_3():
    return VoteConfig([0] * 7 + [1] * 3, 2)


def off_vote(votes, value):
    rho = np.full((votes.num_partitions, votes.num_classes), float(value))
    rho[np.arange(votes.num_partitions), votes.votes] = 0
    return FlipCostMatrix(rho)


class TestBlackBox:
    def test_seven_three(self):
        assert ssdpa_radius(votes_7_3()) == 2

    def test_five_five(self):
        v = VoteConfig([0] * 5 + [1] * 5, 2)
        assert v.winner == 0
        assert ssdpa_radius(v) == 0

    def test_smaller_index_runner_up(self):
        assert ssdpa_radius(VoteConfig([2, 2, 2], 3)) == 1

    def test_single_partition(self):
        assert ssdpa_radius(VoteConfig([0], 2)) == 0
        assert ssdpa_radius(VoteConfig([1], 2)) == 0


class TestKnapsack:
    def test_three_partition_example(self):
        votes = VoteConfig([0, 0, 1], 2)
        rho = FlipCostMatrix([[0, 2], [0, 5], [3, 0]])
        assert oracle_ensemble_p1(rho, votes, 1) == 2
        assert mckp_p2(rho, votes, 1) == 2

    def test_seven_three_unit_costs(self):
        votes = votes_7_3()
        rho = off_vote(votes, 1)
        assert build_mckp(rho, votes, 1).threshold == 5
        assert oracle_ensemble_p1(rho, votes, 1) == 3
        assert mckp_p2(rho, votes, 1) == 3

    def test_single_partition(self):
        votes = VoteConfig([0], 2)
        rho = FlipCostMatrix([[0, 4]])
        assert mckp_p2(rho, votes, 1) == 4

    def test_options_structure(self):
        # classifier 0 votes for the winner, 1 for another class, 2 for the target
        votes = VoteConfig([0, 2, 1, 0], 3)
        rho = FlipCostMatrix([[0, 4, 1], [2, 3, 0], [5, 0, 6], [0, 1, 9]])
        inst = build_mckp(rho, votes, 1)
        assert inst.options[0] == ((0, 0), (4, 2), (1, 1))
        assert inst.options[1] == ((0, 0), (3, 1))
        assert inst.options[2] == ((0, 0),)
        # cheapest non-winner class is the target itself: no duplicate option
        assert inst.options[3] == ((0, 0), (1, 2))
        assert inst.threshold == 2 - 1 + 1
        assert all(p >= 0 and w >= 0 for opts in inst.effective() for p, w in opts)
        assert inst.capacity == 4 * 2 - inst.threshold

    def test_c_min_tie_prefers_smaller_class(self):
        votes = VoteConfig([0, 3], 4)
        rho = FlipCostMatrix([[0, 2, 2, 5], [1, 1, 1, 0]])
        assert build_mckp(rho, votes, 3).options[0] == ((0, 0), (5, 2), (2, 1))

    def test_infinite_options_dropped(self):
        votes = VoteConfig([0, 0], 2)
        rho = FlipCostMatrix([[0, np.inf], [0, np.inf]])
        assert build_mckp(rho, votes, 1).options == (((0, 0),), ((0, 0),))
        assert mckp_p2(rho, votes, 1) == INF
        assert oracle_ensemble_p1(rho, votes, 1) == INF
        assert ensemble_radius(rho, votes) == INF

    def test_target_must_differ(self):
        with pytest.raises(ValidationError):
            mckp_p2(off_vote(votes_7_3(), 1), votes_7_3(), 0)

    def test_zero_cost_flip_is_inconsistent(self):
        votes = VoteConfig([0], 2)
        with pytest.raises(ConsistencyError):
            mckp_p2(FlipCostMatrix([[0, 0]]), votes, 1)

    def test_missing_zero_at_vote(self):
        with pytest.raises(ConsistencyError):
            mckp_p2(FlipCostMatrix([[1, 1]]), VoteConfig([0], 2), 1)

    def test_solver_zero_threshold(self):
        from flipcert.ensemble import MckpInstance
        assert solve_mckp(MckpInstance((((0, 0),),), 0)) == 0

    def test_relaxation_never_exceeds_program(self, rng):
        for _ in range(200):
            rho, votes = random_ensemble_instance(rng, max_np=5, max_k=3)
            for c in range(votes.num_classes):
                if c != votes.winner:
                    assert mckp_p2(rho, votes, c) <= oracle_ensemble_p1(rho, votes, c)


class TestEnsembleRadius:
    def test_unit_costs_match_black_box(self):
        votes = votes_7_3()
        assert ensemble_radius(off_vote(votes, 1), votes) == 2 == ssdpa_radius(votes)

    def test_expensive_flips(self):
        votes = votes_7_3()
        rho = off_vote(votes, 5)
        assert oracle_ensemble_p1(rho, votes, 1) == 15
        assert ensemble_radius(rho, votes) == 14

    def test_single_partition(self):
        votes = VoteConfig([1], 3)
        rho = FlipCostMatrix([[3, 0, 7]])
        assert ensemble_radius(rho, votes) == 2

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_black_box_consistency(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 8))
        votes = VoteConfig(rng.integers(0, k, int(rng.integers(1, 30))), k)
        assert ensemble_radius(off_vote(votes, 1), votes) == ssdpa_radius(votes)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_dominance(self, seed):
        rng = np.random.default_rng(seed)
        rho, votes = random_ensemble_instance(rng, max_np=20, max_k=5, max_cost=6)
        assert ensemble_radius(rho, votes) >= ssdpa_radius(votes)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_monotone_in_costs(self, seed):
        rng = np.random.default_rng(seed)
        rho, votes = random_ensemble_instance(rng, max_np=8, max_k=4, max_cost=5)
        base = ensemble_radius(rho, votes)
        i = int(rng.integers(0, votes.num_partitions))
        c = int(rng.integers(0, votes.num_classes))
        if c == votes.votes[i]:
            return
        up = rho.rho.copy()
        up[i, c] = up[i, c] + 1
        assert ensemble_radius(FlipCostMatrix(up), votes) >= base
        if np.isfinite(rho.rho[i, c]) and rho.rho[i, c] > 1:
            down = rho.rho.copy()
            down[i, c] -= 1
            assert ensemble_radius(FlipCostMatrix(down), votes) <= base

    def test_matches_program_minimum(self, rng):
        for _ in range(200):
            rho, votes = random_ensemble_instance(rng)
            p1 = min(oracle_ensemble_p1(rho, votes, c) for c in range(votes.num_classes) if c != votes.winner)
            want = INF if p1 == INF else p1 - 1
            assert ensemble_radius(rho, votes) == want


def highprec(p, qn):
    with mpmath.workdps(50):
        p, qn = mpmath.mpf(p), mpmath.mpf(qn)
        return float(mpmath.log(4 * p * (1 - p)) / (2 * (1 - 2 * qn) * mpmath.log(qn / (1 - qn))))


class TestSmoothingRadius:
    def test_half(self):
        assert rs_targeted_radius(0.5, 0.1) == 0
        assert rs_certified_flips(0.5, 0.1) == 0

    def test_small_p(self):
        value = rs_targeted_radius(1e-6, 0.1)
        assert abs(value - highprec(1e-6, 0.1)) <= 1e-6
        assert math.isclose(value, 3.5354, abs_tol=1e-3)
        assert rs_certified_flips(1e-6, 0.1) == 3

    def test_large_p(self):
        value = rs_targeted_radius(0.9, 0.1)
        assert abs(value - highprec(0.9, 0.1)) <= 1e-9
        assert math.isclose(value, 0.2906, abs_tol=1e-3)
        assert rs_certified_flips(0.9, 0.1) == 0

    @pytest.mark.parametrize("p, qn", [(0, 0.1), (1, 0.1), (0.3, 0), (0.3, 0.5), (0.3, 0.7)])
    def test_domain(self, p, qn):
        with pytest.raises(ValidationError):
            rs_targeted_radius(p, qn)
