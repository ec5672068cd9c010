from __future__ import annotations

import math
import time

import numpy as np
import pytest

from wish_ilp.gf2 import ParitySystem, rref
from wish_ilp.hashing import SeededRng, sample_toeplitz
from wish_ilp.map_solvers import Budget, LpResult, branch_and_bound, build_ilp, solve_lp, solve_root_lp
from wish_ilp.map_solvers.bnb import most_fractional, round_half_down
from wish_ilp.model import FactorGraph, GridSpec, MapResult, build_ising_grid, exact_map_with_parity


def test_lp_single_variable():
    model = FactorGraph([[0.3, -1.2]])
    res = solve_lp(build_ilp(model, ParitySystem(1)))
    assert res.status == LpResult.OPTIMAL and res.value == pytest.approx(0.3)


def test_lp_infeasible_parity():
    s = ParitySystem.from_rows(2, [("10", 1), ("10", 0)])
    res = solve_lp(build_ilp(FactorGraph(np.zeros((2, 2))), s))
    assert res.status == LpResult.INFEASIBLE


def test_lp_bounds_the_constrained_map():
    for seed in range(8):
        model = build_ising_grid(GridSpec(3, 1.0, 3.0, seed))
        s = sample_toeplitz(9, seed % 6, SeededRng(seed))
        truth = exact_map_with_parity(model, s)
        if truth.status == MapResult.INFEASIBLE:
            continue
        assert solve_lp(build_ilp(model, s)).value >= truth.lower - 1e-7


def test_rounding_helpers():
    assert round_half_down(np.array([0.5, 0.51, 0.2, 1.0])).tolist() == [0, 1, 0, 1]
    assert most_fractional(np.array([0.0, 1.0, 1e-9])) is None
    assert most_fractional(np.array([0.1, 0.4, 0.6])) == 1


def test_integral_root_is_immediately_optimal():
    res = branch_and_bound(build_ilp(FactorGraph([[0.0, 1.0], [0.5, 0.0]]), ParitySystem(2)))
    assert res.status == MapResult.OPTIMAL
    assert res.nodes == 1
    assert res.lower == pytest.approx(1.5)
    assert len(res.trace) == 1


def test_three_by_three_four_toeplitz_rows():
    model = build_ising_grid(GridSpec(3, 1.0, 3.0, 4))
    s = sample_toeplitz(9, 4, SeededRng(4, (4, 1)))
    truth = exact_map_with_parity(model, s)
    res = branch_and_bound(build_ilp(model, s))
    assert res.closed
    assert res.lower == pytest.approx(truth.lower, abs=1e-6)
    assert s.satisfied_by(res.incumbent)


@pytest.mark.parametrize("encoding", ["jeroslow", "feldman", "yannakakis"])
def test_encodings_agree_on_value(encoding):
    model = build_ising_grid(GridSpec(3, 0.1, 3.0, 12))
    s = rref(sample_toeplitz(9, 3, SeededRng(12)))
    truth = exact_map_with_parity(model, s)
    res = branch_and_bound(build_ilp(model, s, encoding))
    assert res.lower == pytest.approx(truth.lower, abs=1e-6)


def test_inconsistent_system_is_infeasible():
    model = build_ising_grid(GridSpec(2, 1.0, 1.0))
    s = ParitySystem.from_rows(4, [("1100", 1), ("1100", 0)])
    res = branch_and_bound(build_ilp(model, s))
    assert res.status == MapResult.INFEASIBLE and res.lower == -math.inf


def test_node_budget_keeps_valid_bounds():
    model = build_ising_grid(GridSpec(4, 1.0, 3.0, 3))
    s = sample_toeplitz(16, 8, SeededRng(3))
    truth = exact_map_with_parity(model, s).lower
    res = branch_and_bound(build_ilp(model, s), Budget(nodes=2))
    assert res.nodes <= 3
    assert res.lower <= truth + 1e-9 <= res.upper + 2e-9
    if res.status == MapResult.BUDGET_EXHAUSTED:
        assert res.upper > res.lower


def test_time_budget_is_respected():
    model = build_ising_grid(GridSpec(8, 1.0, 3.0, 0))
    s = sample_toeplitz(64, 20, SeededRng(0))
    start = time.perf_counter()
    res = branch_and_bound(build_ilp(model, s), Budget(seconds=0.5))
    assert time.perf_counter() - start < 3.0
    assert res.lower <= res.upper


def test_round_only_incumbents_are_feasible_or_absent():
    model = build_ising_grid(GridSpec(3, 1.0, 3.0, 5))
    s = sample_toeplitz(9, 5, SeededRng(5))
    res = branch_and_bound(build_ilp(model, s), Budget(nodes=1), incumbent_rounding="round")
    if res.incumbent is None:
        assert res.lower == -math.inf
    else:
        assert s.satisfied_by(res.incumbent)


def test_root_lp_gives_upper_bound():
    model = build_ising_grid(GridSpec(3, 1.0, 3.0, 6))
    s = sample_toeplitz(9, 3, SeededRng(6))
    truth = exact_map_with_parity(model, s).lower
    res = solve_root_lp(build_ilp(model, s))
    assert res.upper >= truth - 1e-7
    assert res.lower <= truth + 1e-9
    assert res.nodes == 1


def test_events_are_monotone():
    events = []
    model = build_ising_grid(GridSpec(4, 1.0, 3.0, 8))
    s = rref(sample_toeplitz(16, 6, SeededRng(8)))
    res = branch_and_bound(build_ilp(model, s), on_event=lambda *e: events.append(e))
    assert events == res.trace
    uppers = [u for _, u, _ in events]
    lowers = [l for _, _, l in events]
    assert all(a >= b for a, b in zip(uppers, uppers[1:]))
    assert all(a <= b for a, b in zip(lowers, lowers[1:]))
