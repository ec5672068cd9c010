from __future__ import annotations

import math

import numpy as np
import pytest

from wish_ilp.hashing import Family
from wish_ilp.model import FactorGraph, GridSpec, build_ising_grid, exact_log_partition
from wish_ilp.wish import (
    DESK_ALPHA,
    THEORY_ALPHA,
    Guarantee,
    Mode,
    QueryNotClosedError,
    WishConfig,
    assemble_estimate,
    compute_T,
    median_aggregate,
    query_system,
    wish_run,
)


@pytest.mark.parametrize(
    "delta, alpha, n, T",
    [(0.3679, 1.0, 3, 2), (0.1, THEORY_ALPHA, 100, 2525), (0.1, DESK_ALPHA, 16, 52)],
)
def test_compute_T(delta, alpha, n, T):
    assert compute_T(delta, alpha, n) == T


def test_compute_T_rejects_bad_arguments():
    for args in ((0.0, 0.1, 5), (1.0, 0.1, 5), (0.1, 0.0, 5), (0.1, 0.1, 1)):
        with pytest.raises(ValueError):
            compute_T(*args)


def test_median_convention():
    assert median_aggregate([3.5]) == 3.5
    assert median_aggregate([1, -math.inf, 0]) == 0
    assert median_aggregate([4, 1, 3, 2]) == 2
    with pytest.raises(ValueError):
        median_aggregate([])


def test_assemble_uniform_recovers_cube_size():
    n = 6
    assert assemble_estimate([0.0] * (n + 1)) == pytest.approx(n * math.log(2))


def test_assemble_edge_cases():
    assert assemble_estimate([1.7] + [-math.inf] * 4) == pytest.approx(1.7)
    assert assemble_estimate([-math.inf] * 3) == -math.inf
    assert assemble_estimate([0.0, math.inf]) == math.inf


def test_config_validation():
    with pytest.raises(ValueError):
        WishConfig(mode=Mode.SHORTXOR, family=Family.TOEPLITZ)
    with pytest.raises(ValueError):
        WishConfig(mode=Mode.EXACT, family=Family.SPARSE, k=3)
    with pytest.raises(ValueError):
        WishConfig(mode=Mode.EXACT, solver="mp")
    with pytest.raises(ValueError):
        WishConfig(mode=Mode.UPPER, solver="mp")
    with pytest.raises(ValueError):
        WishConfig(mode=Mode.LOWER, family=Family.SPARSE)
    assert "desk-scale" in WishConfig().alpha_regime
    assert "guarantee regime" in WishConfig(alpha=THEORY_ALPHA).alpha_regime


def test_query_systems_are_labelled():
    cfg = WishConfig(seed=3, preprocess="none")
    assert query_system(9, 4, 2, cfg) == query_system(9, 4, 2, cfg)
    assert query_system(9, 4, 2, cfg).m == 4
    assert query_system(9, 0, 1, cfg).m == 0


def test_uniform_model_recovers_exact_count():
    model = FactorGraph(np.zeros((4, 2)))
    est = wish_run(model, WishConfig(family=Family.DENSE, T_override=7, seed=2))
    if all(np.isfinite(r.value) for r in est.records):
        assert est.log_estimate == pytest.approx(4 * math.log(2))
    assert est.log_estimate <= 4 * math.log(2) + 1e-12


def test_two_variable_model_within_factor_four():
    model = FactorGraph([[0.0, 1.5], [0.0, -0.4]], ((0, 1),), [[[0, 0], [0, 2.0]]])
    est = wish_run(model, WishConfig(T_override=41, seed=5))
    assert abs(est.log_estimate - exact_log_partition(model)) <= math.log(4)


def test_records_and_guarantees():
    model = build_ising_grid(GridSpec(3, 1.0, 3.0, 1))
    est = wish_run(model, WishConfig(T_override=3, seed=1))
    assert est.guarantee is Guarantee.SIXTEEN_APPROX
    assert len(est.records) == 10 * 3
    assert len(est.medians) == 10
    lower = wish_run(model, WishConfig(mode=Mode.LOWER, solver="mp", T_override=3, seed=1))
    assert lower.guarantee is Guarantee.LOWER_ONLY
    upper = wish_run(model, WishConfig(mode=Mode.UPPER, solver="lp", T_override=3, seed=1))
    assert upper.guarantee is Guarantee.UPPER_ONLY
    exact = exact_log_partition(model)
    assert lower.log_estimate <= est.log_estimate + 1e-9
    assert upper.log_estimate >= est.log_estimate - 1e-9
    assert abs(est.log_estimate - exact) <= math.log(16)


def test_bnb_matches_brute_force_in_exact_mode():
    model = build_ising_grid(GridSpec(3, 1.0, 3.0, 2))
    a = wish_run(model, WishConfig(T_override=3, seed=4, solver="brute"))
    b = wish_run(model, WishConfig(T_override=3, seed=4, solver="bnb"))
    assert a.medians == pytest.approx(b.medians, abs=1e-6)


def test_unclosed_query_fails_exact_mode():
    model = build_ising_grid(GridSpec(4, 1.0, 3.0, 0))
    with pytest.raises(QueryNotClosedError):
        wish_run(model, WishConfig(T_override=2, solver="bnb", budget_nodes=1, seed=0))


def test_parallel_run_equals_serial():
    model = build_ising_grid(GridSpec(3, 1.0, 3.0, 3))
    serial = wish_run(model, WishConfig(T_override=3, seed=9))
    parallel = wish_run(model, WishConfig(T_override=3, seed=9, workers=2))
    assert serial.log_estimate == parallel.log_estimate
    assert [r.value for r in serial.records] == [r.value for r in parallel.records]
