"""Anytime best-bound branch and bound over the ``mu_i`` variables.

At every moment ``upper`` is a valid bound on the query value (the best LP
bound among open nodes, never below what was pruned within tolerance) and
``lower`` is the true log-weight of the best parity-feasible point seen.
Incumbents are always re-checked against the parity system and re-scored on
the factor graph; the encoding's objective is never trusted for them.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..gf2 import Projector, is_consistent
from ..model import MapResult, log_weight
from .ilp import IlpModel
from .lp import LpResult, LpTimeLimit, solve_lp

INTEGRALITY_TOL = 1e-6
GAP_TOL = 1e-6


@dataclass
class Budget:
    seconds: float | None = None
    nodes: int | None = None

    def exhausted(self, start: float, nodes: int) -> bool:
        if self.nodes is not None and nodes >= self.nodes:
            return True
        return self.seconds is not None and time.perf_counter() - start >= self.seconds

    def remaining(self, start: float) -> float | None:
        if self.seconds is None:
            return None
        return self.seconds - (time.perf_counter() - start)


def round_half_down(values: np.ndarray) -> np.ndarray:
    """Threshold at 0.5 with ties going to 0."""
    return (np.asarray(values) > 0.5).astype(np.uint8)


def most_fractional(values: np.ndarray) -> int | None:
    frac = np.abs(values - np.round(values))
    if frac.max(initial=0.0) <= INTEGRALITY_TOL:
        return None
    # argmin of distance to 1/2; np.argmin picks the lowest index on ties
    return int(np.argmin(np.abs(values - 0.5)))


def branch_and_bound(
    ilp: IlpModel,
    budget: Budget | None = None,
    tol: float = GAP_TOL,
    incumbent_rounding: str = "project",
    on_event: Callable[[float, float, float], None] | None = None,
) -> MapResult:
    """Solve ``ilp`` (built by :func:`build_ilp`) with anytime bounds.

    ``incumbent_rounding="project"`` thresholds the LP ``mu`` and projects
    the result onto the parity solution set, so every LP solve yields a
    feasible candidate.  ``"round"`` keeps a thresholded point only when it
    already satisfies the parity system.

    The returned :class:`MapResult` carries the event trace
    ``(elapsed_ms, upper, lower)`` recorded whenever a bound moved.
    """
    if ilp.model is None or ilp.system is None:
        raise ValueError("branch_and_bound needs an ILP built from a model and a parity system")
    if incumbent_rounding not in ("project", "round"):
        raise ValueError(f"unknown rounding mode {incumbent_rounding!r}")
    budget = budget or Budget()
    model, system = ilp.model, ilp.system
    start = time.perf_counter()
    mu = np.asarray(ilp.mu_index)
    base = ilp.arrays()

    lower = -math.inf
    incumbent: np.ndarray | None = None
    pruned_max = -math.inf
    trace: list[tuple[float, float, float]] = []
    nodes = 0

    def elapsed_ms() -> float:
        return 1000.0 * (time.perf_counter() - start)

    def record(upper: float) -> None:
        point = (elapsed_ms(), max(upper, lower), lower)
        if trace and trace[-1][1:] == point[1:]:
            return
        trace.append(point)
        if on_event is not None:
            on_event(*point)

    def finish(status: str, upper: float) -> MapResult:
        upper = max(upper, lower)
        if status != MapResult.INFEASIBLE and upper - lower <= tol:
            status = MapResult.OPTIMAL
        record(upper)
        return MapResult(lower, upper, incumbent, status, nodes=nodes, runtime_ms=elapsed_ms(), trace=trace)

    if not is_consistent(system):
        record(-math.inf)
        return MapResult.infeasible(nodes=0, runtime_ms=elapsed_ms(), trace=trace)
    projector = Projector(system) if incumbent_rounding == "project" else None

    def consider(point: np.ndarray) -> None:
        nonlocal lower, incumbent
        x = round_half_down(point[mu])
        if projector is not None:
            x = projector(x)
        elif not system.satisfied_by(x):
            return
        value = log_weight(model, x)
        if value > lower:
            lower, incumbent = value, x

    def solve(lb: np.ndarray, ub: np.ndarray) -> LpResult | None:
        nonlocal nodes
        remaining = budget.remaining(start)
        try:
            res = solve_lp(ilp, lb, ub, time_limit=remaining)
        except LpTimeLimit:
            return None
        nodes += 1
        if res.status == LpResult.OPTIMAL:
            consider(res.point)
        return res

    root = solve(base["lb"].copy(), base["ub"].copy())
    if root is None:
        return finish(MapResult.BUDGET_EXHAUSTED, math.inf)
    if root.status == LpResult.INFEASIBLE:
        return finish(MapResult.INFEASIBLE, -math.inf)

    counter = itertools.count()
    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []

    def push(res: LpResult, bound_cap: float, lb: np.ndarray, ub: np.ndarray) -> None:
        nonlocal pruned_max
        bound = min(res.value, bound_cap)
        point = res.point[mu]
        if most_fractional(point) is None:
            # integral mu: the LP point is a configuration, scored exactly in consider()
            x = round_half_down(point)
            if system.satisfied_by(x):
                pruned_max = max(pruned_max, min(bound, log_weight(model, x)))
                return
        if bound <= lower + tol:
            pruned_max = max(pruned_max, bound)
            return
        heapq.heappush(heap, (-bound, next(counter), lb, ub, point))

    push(root, math.inf, base["lb"].copy(), base["ub"].copy())

    def current_upper() -> float:
        top = -heap[0][0] if heap else -math.inf
        return max(top, pruned_max, lower)

    record(current_upper())
    while heap:
        if current_upper() - lower <= tol:
            break
        if budget.exhausted(start, nodes):
            return finish(MapResult.BUDGET_EXHAUSTED, current_upper())
        neg_bound, _, lb, ub, point = heapq.heappop(heap)
        bound = -neg_bound
        if bound <= lower + tol:
            pruned_max = max(pruned_max, bound)
            continue
        var = most_fractional(point)
        if var is None:
            # integral mu but parity-infeasible after rounding: numerically odd node,
            # branch on the least integral coordinate instead of dropping it
            var = int(np.argmax(np.abs(point - np.round(point))))
            if abs(point[var] - round(point[var])) <= 1e-12:
                continue
        idx = mu[var]
        children = []
        for value in (0.0, 1.0):
            child_lb, child_ub = lb.copy(), ub.copy()
            child_lb[idx] = child_ub[idx] = value
            children.append((child_lb, child_ub))
        for pos, (child_lb, child_ub) in enumerate(children):
            res = solve(child_lb, child_ub)
            if res is None:
                # out of time mid-branch: unsolved children keep the parent bound
                for rest_lb, rest_ub in children[pos:]:
                    heapq.heappush(heap, (neg_bound, next(counter), rest_lb, rest_ub, point))
                return finish(MapResult.BUDGET_EXHAUSTED, current_upper())
            if res.status == LpResult.OPTIMAL:
                push(res, bound, child_lb, child_ub)
        record(current_upper())

    upper = current_upper()
    if incumbent is None and not heap:
        return finish(MapResult.INFEASIBLE, -math.inf)
    status = MapResult.OPTIMAL if upper - lower <= tol else MapResult.BUDGET_EXHAUSTED
    return finish(status, upper)


def solve_root_lp(ilp: IlpModel, budget: Budget | None = None, incumbent_rounding: str = "project") -> MapResult:
    """Root relaxation only: LP upper bound plus one rounded incumbent."""
    budget = budget or Budget()
    return branch_and_bound(ilp, Budget(seconds=budget.seconds, nodes=1), incumbent_rounding=incumbent_rounding)
