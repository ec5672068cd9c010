"""Quick oracle-equivalence checks, run by ``wish-ilp selftest``.

Each check compares a fast code path with an independent slow one on a few
seeded random inputs and returns a list of failure messages.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from ..gf2 import ParitySystem, greedy_sparsify, rref, solution_set
from ..hashing import Family, HashFamilySpec, SeededRng, independence_audit, sample_toeplitz
from ..map_solvers import branch_and_bound, build_ilp, parity_message_table, parity_message_update
from ..map_solvers.ilp import ENCODINGS
from ..model import GridSpec, brute_force_log_partition, build_ising_grid, eliminate_log_partition, exact_map_with_parity


def _random_system(rng: np.random.Generator, n: int, m: int) -> ParitySystem:
    A = rng.integers(0, 2, size=(m, n))
    b = rng.integers(0, 2, size=m)
    return ParitySystem.from_arrays(A, b)


def check_sparsification(trials: int = 40, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    errors = []
    for t in range(trials):
        n = int(rng.integers(1, 9))
        system = _random_system(rng, n, int(rng.integers(0, n + 2)))
        truth = solution_set(system)
        reduced = rref(system)
        sparse = greedy_sparsify(reduced, 4)
        if solution_set(reduced) != truth or solution_set(sparse) != truth:
            errors.append(f"sparsification changed the solution set (trial {t})")
        if sparse.norm1() > reduced.norm1():
            errors.append(f"greedy increased the 1-norm (trial {t})")
    return errors


def check_encodings(trials: int = 10, seed: int = 1) -> list[str]:
    from scipy.optimize import Bounds, LinearConstraint, milp

    rng = np.random.default_rng(seed)
    errors = []
    model = build_ising_grid(GridSpec(2, 1.0, 1.0, seed))
    for t in range(trials):
        system = _random_system(rng, model.n, int(rng.integers(1, 4)))
        truth = solution_set(system)
        for enc in ENCODINGS:
            ilp = build_ilp(model, system, enc)
            a = ilp.arrays()
            found = set()
            for x in itertools.product((0, 1), repeat=model.n):
                lb, ub = a["lb"].copy(), a["ub"].copy()
                lb[ilp.mu_index] = ub[ilp.mu_index] = x
                cons = []
                if a["A_ub"] is not None:
                    cons.append(LinearConstraint(a["A_ub"], -np.inf, a["b_ub"]))
                if a["A_eq"] is not None:
                    cons.append(LinearConstraint(a["A_eq"], a["b_eq"], a["b_eq"]))
                res = milp(np.zeros(len(lb)), constraints=cons, integrality=a["integral"].astype(int),
                           bounds=Bounds(lb, ub))
                if res.status == 0:
                    found.add(x)
            if found != truth:
                errors.append(f"{enc} encoding disagrees with the solution set (trial {t})")
    return errors


def check_parity_dp(trials: int = 50, seed: int = 2) -> list[str]:
    rng = np.random.default_rng(seed)
    errors = []
    for t in range(trials):
        k = int(rng.integers(1, 9))
        msgs = rng.uniform(0.01, 1.0, size=(k, 2))
        for semiring in ("sum", "max"):
            parity = int(rng.integers(0, 2))
            fast = parity_message_update(msgs, parity, semiring)
            slow = parity_message_table(msgs, parity, semiring)
            if not np.allclose(fast, slow, rtol=1e-9, atol=0.0):
                errors.append(f"parity DP mismatch ({semiring}, k={k}, trial {t})")
    return errors


def check_branch_and_bound(trials: int = 6, seed: int = 3) -> list[str]:
    errors = []
    for t in range(trials):
        model = build_ising_grid(GridSpec(3, 1.0, 3.0, seed + t))
        m = t % (model.n + 1)
        system = rref(sample_toeplitz(model.n, m, SeededRng(seed, (m, t))))
        truth = exact_map_with_parity(model, system)
        got = branch_and_bound(build_ilp(model, system))
        if not got.closed or abs(got.lower - truth.lower) > 1e-6:
            errors.append(f"branch and bound {got.lower} vs oracle {truth.lower} (trial {t})")
    return errors


def check_partition(trials: int = 3, seed: int = 4) -> list[str]:
    errors = []
    for t in range(trials):
        model = build_ising_grid(GridSpec(3 + t % 2, 1.0, 3.0, seed + t))
        a, b = eliminate_log_partition(model), brute_force_log_partition(model)
        if not math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-9):
            errors.append(f"elimination {a} vs brute force {b} (trial {t})")
    return errors


def check_hash_audits() -> list[str]:
    errors = []
    for kind in (Family.DENSE, Family.TOEPLITZ):
        if not independence_audit(HashFamilySpec(kind, 3, 2)).pairwise_independent:
            errors.append(f"{kind.value} family failed the pairwise audit")
    if not independence_audit(HashFamilySpec(Family.SPARSE, 6, 2, 2)).uniform:
        errors.append("sparse family failed the uniformity audit")
    return errors


CHECKS: dict[str, Callable[[], list[str]]] = {
    "sparsification": check_sparsification,
    "encodings": check_encodings,
    "parity-dp": check_parity_dp,
    "branch-and-bound": check_branch_and_bound,
    "partition": check_partition,
    "hash-audits": check_hash_audits,
}


def run_selftest(emit: Callable[[str], None] = print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        errors = check()
        emit(f"{'PASS' if not errors else 'FAIL'} {name}")
        for err in errors:
            emit(f"  {err}")
        ok &= not errors
    return ok
