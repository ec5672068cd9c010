"""Binary pairwise factor graphs in the log domain, generators and exact oracles.

A configuration ``x`` is a 0/1 vector; as a packed integer, bit ``i`` is
``x_i``.  All weights are natural-log values and weight zero is ``-inf``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .gf2 import EnumerationCapError, ParitySystem, is_consistent, unpack
from .hashing import SeededRng

BRUTE_FORCE_CAP = 25
ELIMINATION_FRONTIER_CAP = 22


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Binary model with node log-potentials ``(theta_i(0), theta_i(1))`` and
    edge tables ``theta_ij[x_i, x_j]``.

    ``grid`` records ``(rows, cols)`` for models laid out row-major on a grid;
    it only steers the exact elimination order.
    """

    node_logpot: np.ndarray
    edges: tuple[tuple[int, int], ...] = ()
    edge_logpot: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    grid: tuple[int, int] | None = None

    def __post_init__(self):
        node = np.array(self.node_logpot, dtype=float).reshape(-1, 2)
        edge = np.array(self.edge_logpot, dtype=float).reshape(-1, 2, 2)
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        if len(edges) != len(edge):
            raise ValueError(f"{len(edges)} edges but {len(edge)} edge tables")
        if not (np.all(np.isfinite(node)) and np.all(np.isfinite(edge))):
            raise ValueError("log-potentials must be finite")
        seen = set()
        for i, j in edges:
            if i == j or not (0 <= i < len(node) and 0 <= j < len(node)):
                raise ValueError(f"bad edge ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        node.setflags(write=False)
        edge.setflags(write=False)
        object.__setattr__(self, "node_logpot", node)
        object.__setattr__(self, "edge_logpot", edge)
        object.__setattr__(self, "edges", edges)

    @property
    def n(self) -> int:
        return len(self.node_logpot)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj


@dataclass(frozen=True)
class GridSpec:
    M: int
    f: float
    w: float
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.f < 0 or self.w < 0:
            raise ValueError(f"invalid grid spec {self}")


def grid_edges(rows: int, cols: int) -> list[tuple[int, int]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return edges


def build_ising_grid(spec: GridSpec, rng: SeededRng | None = None) -> FactorGraph:
    """M x M grid: ``theta_i(1) = f_i ~ U[-f, f]``, ``theta_ij(1, 1) = w_ij ~ U[-w, w]``."""
    rng = SeededRng(spec.seed) if rng is None else rng
    M = spec.M
    edges = grid_edges(M, M)
    fields = rng.uniform(-spec.f, spec.f, M * M)
    couplings = rng.uniform(-spec.w, spec.w, len(edges))
    node = np.zeros((M * M, 2))
    node[:, 1] = fields
    edge = np.zeros((len(edges), 2, 2))
    edge[:, 1, 1] = couplings
    return FactorGraph(node, tuple(edges), edge, grid=(M, M))


def build_decoding_model(n: int) -> FactorGraph:
    """Independent bits with ``theta_i(1) = -1``, so ``log w(x) = -HammingWeight(x)``."""
    if n < 1:
        raise ValueError("n must be positive")
    node = np.zeros((n, 2))
    node[:, 1] = -1.0
    return FactorGraph(node)


def log_weight(model: FactorGraph, x: Sequence[int]) -> float:
    x = np.asarray(x, dtype=np.intp).ravel()
    if x.shape[0] != model.n:
        raise ValueError(f"expected {model.n} values, got {x.shape[0]}")
    total = model.node_logpot[np.arange(model.n), x].sum()
    if model.edges:
        e = np.asarray(model.edges)
        total += model.edge_logpot[np.arange(len(e)), x[e[:, 0]], x[e[:, 1]]].sum()
    return float(total)


def _weights_chunk(model: FactorGraph, configs: np.ndarray) -> np.ndarray:
    out = np.zeros(configs.shape, dtype=float)
    for i in range(model.n):
        bit = (configs >> i) & 1
        t0, t1 = model.node_logpot[i]
        out += np.where(bit == 1, t1, t0)
    for (i, j), table in zip(model.edges, model.edge_logpot):
        idx = ((configs >> i) & 1) * 2 + ((configs >> j) & 1)
        out += table.ravel()[idx]
    return out


@functools.lru_cache(maxsize=4)
def all_log_weights(model: FactorGraph) -> np.ndarray:
    """``log w`` of every configuration, indexed by packed integer."""
    if model.n > BRUTE_FORCE_CAP:
        raise EnumerationCapError(f"n={model.n} exceeds brute-force cap {BRUTE_FORCE_CAP}")
    out = _weights_chunk(model, np.arange(1 << model.n, dtype=np.int64))
    out.setflags(write=False)
    return out


def brute_force_log_partition(model: FactorGraph) -> float:
    return float(logsumexp(all_log_weights(model)))


def _elimination_order(model: FactorGraph) -> list[int]:
    if model.grid is not None:
        rows, cols = model.grid
        # column-major sweep keeps the frontier at one column plus one cell
        return [r * cols + c for c in range(cols) for r in range(rows)]
    return list(range(model.n))


def eliminate_log_partition(model: FactorGraph, order: Sequence[int] | None = None) -> float:
    """Exact ``log Z`` by sequential variable elimination along ``order``.

    The running table covers the frontier: variables already introduced that
    still have a neighbour not yet introduced.  Cost is ``O(n 2^frontier)``.
    """
    order = _elimination_order(model) if order is None else list(order)
    if sorted(order) != list(range(model.n)):
        raise ValueError("order must be a permutation of the variables")
    position = {v: k for k, v in enumerate(order)}
    adj = model.neighbors()
    last_neighbor = [max([position[u] for u in adj[v]], default=-1) for v in range(model.n)]
    edge_table = {}
    for (i, j), table in zip(model.edges, model.edge_logpot):
        edge_table[(i, j)] = table
        edge_table[(j, i)] = table.T

    frontier: list[int] = []
    table = np.zeros(())
    for k, v in enumerate(order):
        new = table[..., None] + model.node_logpot[v]
        for axis, u in enumerate(frontier):
            pair = edge_table.get((u, v))
            if pair is not None:
                shape = [1] * (len(frontier) + 1)
                shape[axis] = 2
                shape[-1] = 2
                new = new + pair.reshape(shape)
        frontier = frontier + [v]
        keep = [a for a, u in enumerate(frontier) if last_neighbor[u] > k]
        drop = tuple(a for a in range(len(frontier)) if a not in keep)
        table = logsumexp(new, axis=drop) if drop else new
        frontier = [frontier[a] for a in keep]
        if len(frontier) > ELIMINATION_FRONTIER_CAP:
            raise EnumerationCapError(f"elimination frontier {len(frontier)} exceeds cap")
    return float(table)


def exact_log_partition(model: FactorGraph) -> float:
    """``log Z`` by brute force for small models, else by elimination.

    Models above 20 variables try elimination first and fall back to brute
    force up to ``BRUTE_FORCE_CAP`` variables.
    """
    if model.n <= 20:
        return brute_force_log_partition(model)
    try:
        return eliminate_log_partition(model)
    except EnumerationCapError:
        if model.n > BRUTE_FORCE_CAP:
            raise
        return brute_force_log_partition(model)


def parity_mask(system: ParitySystem, configs: np.ndarray) -> np.ndarray:
    keep = np.ones(configs.shape, dtype=bool)
    for coef, parity in system.rows:
        keep &= (np.bitwise_count(configs & coef) & 1) == parity
    return keep


@dataclass
class MapResult:
    """Outcome of one parity-constrained MAP query, in log-weight units."""

    lower: float
    upper: float
    incumbent: np.ndarray | None
    status: str
    nodes: int = 0
    runtime_ms: float = 0.0
    trace: list[tuple[float, float, float]] = field(default_factory=list, repr=False)

    OPTIMAL = "Optimal"
    FEASIBLE_LOWER = "FeasibleLower"
    UPPER_ONLY = "UpperOnly"
    INFEASIBLE = "Infeasible"
    BUDGET_EXHAUSTED = "BudgetExhausted"

    @property
    def closed(self) -> bool:
        """True if the query value is proven: optimal, or proven infeasible."""
        return self.status in (self.OPTIMAL, self.INFEASIBLE)

    @classmethod
    def infeasible(cls, **kw) -> "MapResult":
        return cls(-math.inf, -math.inf, None, cls.INFEASIBLE, **kw)


def exact_map_with_parity(model: FactorGraph, system: ParitySystem) -> MapResult:
    """Brute-force ``max log w(x)`` subject to ``A x = b (mod 2)``."""
    if system.n != model.n:
        raise ValueError("system and model disagree on n")
    if not is_consistent(system):
        return MapResult.infeasible()
    weights = all_log_weights(model)
    configs = np.arange(weights.shape[0], dtype=np.int64)
    masked = np.where(parity_mask(system, configs), weights, -np.inf)
    best = int(np.argmax(masked))
    value = float(masked[best])
    return MapResult(value, value, unpack(best, model.n), MapResult.OPTIMAL)


def level_quantile_oracle(model: FactorGraph, i: int) -> float:
    """``log w`` of the ``2^i``-th heaviest configuration (1-based)."""
    if model.n > 20:
        raise EnumerationCapError(f"n={model.n} too large to sort all weights")
    if not 0 <= i <= model.n:
        raise ValueError(f"level {i} outside [0, {model.n}]")
    weights = np.sort(all_log_weights(model))[::-1]
    return float(weights[(1 << i) - 1])


# -- model file format -------------------------------------------------------


def parse_model(text: str) -> FactorGraph:
    """Header ``n e``; ``n`` lines ``theta(0) theta(1)``; ``e`` lines ``i j t00 t01 t10 t11``."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    n, e = int(lines[0][0]), int(lines[0][1])
    if len(lines) != 1 + n + e:
        raise ValueError(f"expected {1 + n + e} non-empty lines, got {len(lines)}")
    node = np.array([[float(v) for v in ln] for ln in lines[1 : 1 + n]]).reshape(n, 2)
    edges, tables = [], []
    for ln in lines[1 + n :]:
        edges.append((int(ln[0]), int(ln[1])))
        tables.append([float(v) for v in ln[2:6]])
    return FactorGraph(node, tuple(edges), np.array(tables).reshape(-1, 2, 2))


def format_model(model: FactorGraph) -> str:
    out = [f"{model.n} {len(model.edges)}"]
    out += [f"{float(t0)!r} {float(t1)!r}" for t0, t1 in model.node_logpot]
    for (i, j), t in zip(model.edges, model.edge_logpot):
        out.append(f"{i} {j} " + " ".join(repr(float(v)) for v in t.ravel()))
    return "\n".join(out) + "\n"
