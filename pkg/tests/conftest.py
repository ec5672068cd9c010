from __future__ import annotations

import itertools

import numpy as np
import pytest

from wish_ilp.gf2 import ParitySystem
from wish_ilp.model import GridSpec, build_ising_grid


def cube(n: int):
    return [tuple(x) for x in itertools.product((0, 1), repeat=n)]


def brute_solutions(system: ParitySystem) -> set[tuple[int, ...]]:
    """Reference solution set straight from the definition, one point at a time."""
    A, b = system.A.astype(int), system.b.astype(int)
    return {x for x in cube(system.n) if np.all((A @ np.array(x, dtype=int)) % 2 == b)}


def random_system(rng: np.random.Generator, n: int, m: int, max_len: int | None = None) -> ParitySystem:
    rows = []
    for _ in range(m):
        if max_len is None:
            coef = rng.integers(0, 2, size=n)
        else:
            length = int(rng.integers(0, min(max_len, n) + 1))
            coef = np.zeros(n, dtype=int)
            coef[rng.choice(n, size=length, replace=False)] = 1
        rows.append((coef.tolist(), int(rng.integers(0, 2))))
    return ParitySystem.from_rows(n, rows)


@pytest.fixture
def grid3():
    return build_ising_grid(GridSpec(3, 1.0, 3.0, 7))


def milp_feasible_mu(ilp, points, columns):
    """The subset of ``points`` (values for ``mu`` at ``columns``) that the ILP admits.

    Feasibility is decided by scipy's MILP solver with those ``mu`` fixed, an
    engine independent of the LP/branch-and-bound code under test.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    a = ilp.arrays()
    cons = []
    if a["A_ub"] is not None:
        cons.append(LinearConstraint(a["A_ub"], -np.inf, a["b_ub"]))
    if a["A_eq"] is not None:
        cons.append(LinearConstraint(a["A_eq"], a["b_eq"], a["b_eq"]))
    idx = [ilp.mu_index[c] for c in columns]
    found = set()
    for x in points:
        lb, ub = a["lb"].copy(), a["ub"].copy()
        lb[idx] = ub[idx] = x
        res = milp(np.zeros(len(lb)), constraints=cons, integrality=a["integral"].astype(int), bounds=Bounds(lb, ub))
        if res.status == 0:
            found.add(tuple(x))
    return found


def encoding_projection(system: ParitySystem, encoding: str) -> set[tuple[int, ...]]:
    """Integer-feasible ``mu`` of the encoded system, one row at a time.

    Auxiliary variables of different rows are disjoint and an edgeless model
    adds no coupling, so the projection is the intersection of the per-row
    projections (each a cylinder over that row's support).
    """
    from wish_ilp.map_solvers import build_ilp
    from wish_ilp.model import FactorGraph

    n = system.n
    model = FactorGraph(np.zeros((n, 2)))
    allowed = set(cube(n))
    for coef, parity in system.rows:
        cols = [c for c in range(n) if coef >> c & 1]
        ilp = build_ilp(model, ParitySystem(n, ((coef, parity),)), encoding)
        ok = milp_feasible_mu(ilp, cube(len(cols)), cols)
        allowed = {x for x in allowed if tuple(x[c] for c in cols) in ok}
    return allowed


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
