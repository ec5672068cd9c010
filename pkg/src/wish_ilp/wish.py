"""WISH: estimate ``log Z`` from medians of MAP values under random parity constraints.

For each level ``i = 0..n`` and trial ``t = 1..T`` a hash ``A x = b`` with
``i`` rows is sampled, the parity-constrained MAP value ``w_i^t`` is
computed (or bounded), and the medians ``M_i`` are combined as
``M_0 + sum_i M_{i+1} 2^i``, all in the log domain.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .gf2 import ParitySystem, greedy_sparsify, rref
from .hashing import Family, HashFamilySpec, SeededRng, format_family, sample
from .map_solvers import Budget, branch_and_bound, build_ilp, message_passing_decode, solve_root_lp
from .model import FactorGraph, MapResult, exact_map_with_parity, level_quantile_oracle

log = logging.getLogger(__name__)

THEORY_ALPHA = 0.0042
DESK_ALPHA = 1 / 8
SOLVERS = ("brute", "bnb", "lp", "mp", "bp")
PREPROCESSORS = ("none", "rref", "rref+greedy")

__all__ = [
    "Guarantee",
    "Mode",
    "QueryNotClosedError",
    "QueryRecord",
    "WishConfig",
    "WishEstimate",
    "assemble_estimate",
    "compute_T",
    "level_quantile_oracle",
    "median_aggregate",
    "query_system",
    "solve_query",
    "wish_run",
]


class Mode(str, Enum):
    EXACT = "exact"
    LOWER = "lower"
    UPPER = "upper"
    SHORTXOR = "shortxor"


class Guarantee(str, Enum):
    SIXTEEN_APPROX = "SixteenApprox"
    LOWER_ONLY = "LowerOnly"
    UPPER_ONLY = "UpperOnly"


class QueryNotClosedError(RuntimeError):
    """Exact mode met a query whose optimum was not proven."""


def compute_T(delta: float, alpha: float, n: int) -> int:
    """Repetitions per level, ``ceil(ln(1/delta) / alpha * ln n)``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n < 2:
        raise ValueError("n must be at least 2 (ln n would not be positive)")
    return math.ceil(math.log(1 / delta) / alpha * math.log(n))


def median_aggregate(values: Sequence[float]) -> float:
    """Median; for even counts the lower of the two middle values."""
    if len(values) == 0:
        raise ValueError("median of an empty list")
    ordered = sorted(values)
    return ordered[math.ceil(len(ordered) / 2) - 1]


def assemble_estimate(medians: Sequence[float]) -> float:
    """``log(M_0 + sum_{i<n} M_{i+1} 2^i)`` from log-domain medians."""
    if len(medians) == 0:
        raise ValueError("need at least M_0")
    terms = np.array([medians[0]] + [medians[i + 1] + i * math.log(2.0) for i in range(len(medians) - 1)])
    if np.any(terms == math.inf):
        return math.inf
    if np.all(terms == -math.inf):
        return -math.inf
    return float(logsumexp(terms))


@dataclass
class WishConfig:
    delta: float = 0.1
    alpha: float = DESK_ALPHA
    T_override: int | None = None
    family: Family = Family.TOEPLITZ
    k: int | None = None
    mode: Mode = Mode.EXACT
    solver: str = "brute"
    encoding: str = "auto"
    budget_seconds: float | None = None
    budget_nodes: int | None = None
    seed: int = 0
    workers: int = 1
    preprocess: str = "rref"
    greedy_depth: int = 4
    mp_max_iters: int = 10000

    def __post_init__(self):
        self.family = Family(self.family)
        self.mode = Mode(self.mode)
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")
        if self.preprocess not in PREPROCESSORS:
            raise ValueError(f"unknown preprocessing {self.preprocess!r}")
        if self.mode is Mode.SHORTXOR and self.family is not Family.SPARSE:
            raise ValueError("shortxor mode needs the sparse family")
        if self.mode in (Mode.EXACT, Mode.UPPER) and self.family is Family.SPARSE:
            raise ValueError(f"{self.mode.value} mode needs a pairwise independent family (dense or toeplitz)")
        if self.family is Family.SPARSE and (self.k is None or self.k < 1):
            raise ValueError("sparse family needs a row weight k >= 1")
        if self.mode is Mode.EXACT and self.solver not in ("brute", "bnb"):
            raise ValueError("exact mode needs a solver that proves optimality (brute or bnb)")
        if self.mode is Mode.UPPER and self.solver not in ("brute", "bnb", "lp"):
            raise ValueError("upper mode needs a solver that returns upper bounds (brute, bnb or lp)")
        if self.T_override is not None and self.T_override < 1:
            raise ValueError("T must be positive")

    def T(self, n: int) -> int:
        return self.T_override if self.T_override is not None else compute_T(self.delta, self.alpha, n)

    @property
    def family_label(self) -> str:
        return format_family(self.family, self.k)

    @property
    def alpha_regime(self) -> str:
        if self.T_override is not None:
            return f"explicit T={self.T_override}"
        if self.alpha <= THEORY_ALPHA:
            return f"guarantee regime (alpha={self.alpha:g} <= {THEORY_ALPHA})"
        return f"desk-scale regime (alpha={self.alpha:g} > {THEORY_ALPHA}; T is far below the proven requirement)"


@dataclass
class QueryRecord:
    level: int
    trial: int
    seed: int
    result: MapResult
    runtime_ms: float
    value: float


@dataclass
class WishEstimate:
    medians: list[float]
    log_estimate: float
    guarantee: Guarantee
    T: int
    records: list[QueryRecord] = field(default_factory=list, repr=False)


def query_system(n: int, level: int, trial: int, config: WishConfig) -> ParitySystem:
    """The preprocessed parity system for query ``(level, trial)``."""
    spec = HashFamilySpec(config.family, n, level, config.k if config.family is Family.SPARSE else None)
    system = sample(spec, SeededRng(config.seed, (level, trial)))
    if config.preprocess == "none":
        return system
    system = rref(system)
    if config.preprocess == "rref+greedy":
        system = greedy_sparsify(system, config.greedy_depth)
    return system


def solve_query(model: FactorGraph, system: ParitySystem, config: WishConfig) -> MapResult:
    budget = Budget(config.budget_seconds, config.budget_nodes)
    if config.solver == "brute":
        return exact_map_with_parity(model, system)
    if config.solver == "mp":
        return message_passing_decode(model, system, "max", max_iters=config.mp_max_iters)
    if config.solver == "bp":
        return message_passing_decode(model, system, "sum", max_iters=config.mp_max_iters)
    ilp = build_ilp(model, system, config.encoding)
    if config.solver == "lp":
        return solve_root_lp(ilp, budget)
    return branch_and_bound(ilp, budget)


def query_value(result: MapResult, mode: Mode, label: tuple[int, int]) -> float:
    if mode is Mode.EXACT:
        if not result.closed:
            raise QueryNotClosedError(
                f"query (level {label[0]}, trial {label[1]}) ended with status {result.status}; "
                "exact mode needs every query proven optimal"
            )
        return result.lower
    if mode is Mode.UPPER:
        return result.upper
    return result.lower


def _run_query(args: tuple[FactorGraph, WishConfig, int, int]) -> QueryRecord:
    model, config, level, trial = args
    start = time.perf_counter()
    system = query_system(model.n, level, trial, config)
    result = solve_query(model, system, config)
    runtime = 1000.0 * (time.perf_counter() - start)
    value = query_value(result, config.mode, (level, trial))
    return QueryRecord(level, trial, config.seed, result, runtime, value)


def guarantee_for(mode: Mode) -> Guarantee:
    if mode is Mode.EXACT:
        return Guarantee.SIXTEEN_APPROX
    if mode is Mode.UPPER:
        return Guarantee.UPPER_ONLY
    return Guarantee.LOWER_ONLY


def estimate_from_records(records: Sequence[QueryRecord], n: int, T: int, mode: Mode) -> WishEstimate:
    by_level: dict[int, list[float]] = {i: [] for i in range(n + 1)}
    for rec in records:
        by_level[rec.level].append(rec.value)
    medians = []
    for i in range(n + 1):
        if len(by_level[i]) != T:
            raise ValueError(f"level {i} has {len(by_level[i])} values, expected {T}")
        medians.append(median_aggregate(by_level[i]))
    ordered = sorted(records, key=lambda r: (r.level, r.trial))
    return WishEstimate(medians, assemble_estimate(medians), guarantee_for(mode), T, ordered)


def wish_run(model: FactorGraph, config: WishConfig) -> WishEstimate:
    """Run every ``(level, trial)`` query and assemble the estimate.

    Queries are independent and keyed by their label, so ``workers > 1``
    (a process pool) gives the same output as a serial run.
    """
    n = model.n
    T = config.T(n)
    jobs = [(model, config, i, t) for i in range(n + 1) for t in range(1, T + 1)]
    log.info("WISH: n=%d T=%d family=%s mode=%s solver=%s, %s", n, T, config.family_label,
             config.mode.value, config.solver, config.alpha_regime)
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_query, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        records = [_run_query(job) for job in jobs]
    return estimate_from_records(records, n, T, config.mode)
