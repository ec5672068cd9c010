"""LP relaxation of an :class:`IlpModel` (integrality dropped).

The relaxation is solved with HiGHS through :func:`scipy.optimize.linprog`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .ilp import IlpModel

FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-7


class LpNumericalError(RuntimeError):
    """The LP backend stopped without a usable answer (not infeasibility)."""


class LpTimeLimit(RuntimeError):
    pass


@dataclass
class LpResult:
    value: float
    point: np.ndarray | None
    status: str

    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


def solve_lp(
    ilp: IlpModel,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    time_limit: float | None = None,
    feasibility_tol: float = FEASIBILITY_TOL,
    optimality_tol: float = OPTIMALITY_TOL,
) -> LpResult:
    """Maximise the ILP objective over its relaxation.

    ``lb``/``ub`` override the variable bounds (branching fixes ``mu_i``
    this way).  The returned value includes the objective offset.
    """
    a = ilp.arrays()
    lb = a["lb"] if lb is None else lb
    ub = a["ub"] if ub is None else ub
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ValueError("solve_lp needs finite bounds on every variable")
    if np.any(lb > ub):
        return LpResult(-math.inf, None, LpResult.INFEASIBLE)
    options = {
        "primal_feasibility_tolerance": feasibility_tol,
        "dual_feasibility_tolerance": optimality_tol,
        "presolve": True,
    }
    if time_limit is not None:
        options["time_limit"] = max(time_limit, 1e-3)
    res = linprog(
        -a["c"],
        A_ub=a["A_ub"],
        b_ub=a["b_ub"] if a["A_ub"] is not None else None,
        A_eq=a["A_eq"],
        b_eq=a["b_eq"] if a["A_eq"] is not None else None,
        bounds=np.column_stack([lb, ub]),
        method="highs",
        options=options,
    )
    if res.status == 0:
        return LpResult(float(-res.fun + ilp.offset), np.asarray(res.x), LpResult.OPTIMAL)
    if res.status == 2:
        return LpResult(-math.inf, None, LpResult.INFEASIBLE)
    if res.status == 3:
        return LpResult(math.inf, None, LpResult.UNBOUNDED)
    if res.status == 1 and time_limit is not None:
        raise LpTimeLimit(res.message)
    raise LpNumericalError(f"LP solve failed (status {res.status}): {res.message}")
