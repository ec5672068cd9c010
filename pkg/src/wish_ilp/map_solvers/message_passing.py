"""Loopy sum-/max-product on a pairwise model augmented with XOR factors."""

from __future__ import annotations

import math
import time
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from ..gf2 import ParitySystem, Projector, is_consistent, support
from ..model import FactorGraph, MapResult, log_weight

SUM, MAX = "sum", "max"
DEFAULT_MAX_ITERS = 10000
LOG_FLOOR = -1e4


def parity_message_update(incoming: Sequence[Sequence[float]], parity: int, semiring: str = SUM) -> np.ndarray:
    """All factor-to-variable messages of the factor ``[x_1 + ... + x_k = parity]``.

    ``out[i][v]`` combines (sum or max) over assignments of the other
    variables with total parity ``parity - v`` the product of their incoming
    messages.  Prefix and suffix tables over the running parity make this
    ``O(k)`` instead of ``O(2^k)``.
    """
    msgs = np.asarray(incoming, dtype=float).reshape(-1, 2)
    k = len(msgs)
    if k == 0:
        raise ValueError("a parity factor needs at least one variable")
    if semiring not in (SUM, MAX):
        raise ValueError(f"unknown semiring {semiring!r}")
    combine = np.add if semiring == SUM else np.maximum

    # prefix[l, p]: combination over the first l variables having parity p
    prefix = np.zeros((k + 1, 2))
    prefix[0] = (1.0, 0.0)
    for l in range(k):
        m0, m1 = msgs[l]
        prefix[l + 1, 0] = combine(prefix[l, 0] * m0, prefix[l, 1] * m1)
        prefix[l + 1, 1] = combine(prefix[l, 1] * m0, prefix[l, 0] * m1)
    suffix = np.zeros((k + 1, 2))
    suffix[k] = (1.0, 0.0)
    for l in range(k - 1, -1, -1):
        m0, m1 = msgs[l]
        suffix[l, 0] = combine(suffix[l + 1, 0] * m0, suffix[l + 1, 1] * m1)
        suffix[l, 1] = combine(suffix[l + 1, 1] * m0, suffix[l + 1, 0] * m1)

    out = np.zeros((k, 2))
    for i in range(k):
        for v in (0, 1):
            need = parity ^ v
            out[i, v] = combine(prefix[i, 0] * suffix[i + 1, need], prefix[i, 1] * suffix[i + 1, need ^ 1])
    return out


def parity_message_table(incoming: Sequence[Sequence[float]], parity: int, semiring: str = SUM) -> np.ndarray:
    """Reference ``O(k 2^k)`` marginalisation over the explicit factor table."""
    msgs = np.asarray(incoming, dtype=float).reshape(-1, 2)
    k = len(msgs)
    configs = (np.arange(1 << k)[:, None] >> np.arange(k)) & 1
    ok = (configs.sum(axis=1) & 1) == parity
    out = np.zeros((k, 2))
    for i in range(k):
        others = np.ones(len(configs))
        for l in range(k):
            if l != i:
                others = others * msgs[l, configs[:, l]]
        others = np.where(ok, others, 0.0)
        for v in (0, 1):
            sel = others[configs[:, i] == v]
            out[i, v] = sel.sum() if semiring == SUM else sel.max(initial=0.0)
    return out


def _normalize(logm: np.ndarray, semiring: str) -> np.ndarray:
    shift = logsumexp(logm, axis=-1, keepdims=True) if semiring == SUM else logm.max(axis=-1, keepdims=True)
    return np.maximum(logm - shift, LOG_FLOOR)


def message_passing_decode(
    model: FactorGraph,
    system: ParitySystem,
    semiring: str = MAX,
    max_iters: int = DEFAULT_MAX_ITERS,
    damping: float = 0.5,
    tol: float = 1e-8,
    stop_on_feasible: bool = True,
) -> MapResult:
    """Heuristic parity-constrained MAP by loopy message passing.

    Flooding schedule with damped, normalised factor-to-variable messages.
    After every sweep the beliefs are thresholded (ties to 0); a point that
    satisfies the parity system becomes a candidate.  With a nonempty system
    and ``stop_on_feasible`` the first such point ends the run.  If no
    feasible point shows up, the final rounding is projected onto the
    solution set.  The result has ``lower`` only; ``upper`` is ``+inf``.
    """
    start = time.perf_counter()
    if system.n != model.n:
        raise ValueError("system and model disagree on n")
    if not is_consistent(system):
        return MapResult.infeasible(runtime_ms=1000.0 * (time.perf_counter() - start))
    n = model.n
    node = model.node_logpot
    edges = np.asarray(model.edges, dtype=np.intp).reshape(-1, 2)
    E = len(edges)
    rows = [(support(coef), parity) for coef, parity in system.rows if coef]

    # slot s carries the message from one factor into variable slot_var[s];
    # edge e owns slots 2e (into i) and 2e + 1 (into j)
    slot_var = [int(v) for e in edges for v in e]
    row_slices = []
    for cols, parity in rows:
        row_slices.append((len(slot_var), len(slot_var) + len(cols), parity))
        slot_var += cols
    slot_var = np.asarray(slot_var, dtype=np.intp)
    S = len(slot_var)
    fmsg = np.full((S, 2), -math.log(2.0))

    def beliefs() -> np.ndarray:
        total = node.copy()
        if S:
            np.add.at(total, slot_var, fmsg)
        return total

    best_x: np.ndarray | None = None
    best_val = -math.inf
    x = None
    iters = 0
    for iters in range(1, max_iters + 1):
        total = beliefs()
        vmsg = _normalize(total[slot_var] - fmsg, semiring) if S else np.zeros((0, 2))
        new = np.empty_like(fmsg)
        if E:
            tables = model.edge_logpot
            from_i = vmsg[0 : 2 * E : 2]
            from_j = vmsg[1 : 2 * E : 2]
            # into i: combine over x_j of theta(x_i, x_j) + msg_j(x_j); symmetric for j
            cand_i = tables + from_j[:, None, :]
            cand_j = tables + from_i[:, :, None]
            if semiring == SUM:
                new[0 : 2 * E : 2] = logsumexp(cand_i, axis=2)
                new[1 : 2 * E : 2] = logsumexp(cand_j, axis=1)
            else:
                new[0 : 2 * E : 2] = cand_i.max(axis=2)
                new[1 : 2 * E : 2] = cand_j.max(axis=1)
        for lo, hi, parity in row_slices:
            lin = np.exp(vmsg[lo:hi])
            out = parity_message_update(lin, parity, semiring)
            with np.errstate(divide="ignore"):
                new[lo:hi] = np.log(out)
        new = _normalize(new, semiring)
        if damping:
            damped = _normalize(np.logaddexp(math.log(damping) + fmsg, math.log1p(-damping) + new), semiring)
        else:
            damped = new
        change = float(np.max(np.abs(np.exp(damped) - np.exp(fmsg)))) if S else 0.0
        fmsg = damped

        total = beliefs()
        x = (total[:, 1] > total[:, 0]).astype(np.uint8)
        if system.satisfied_by(x):
            value = log_weight(model, x)
            if value > best_val:
                best_val, best_x = value, x
            if stop_on_feasible and rows:
                break
        if change < tol:
            break

    if best_x is None:
        best_x = Projector(system)(x if x is not None else np.zeros(n, dtype=np.uint8))
        best_val = log_weight(model, best_x)
    return MapResult(
        best_val,
        math.inf,
        best_x,
        MapResult.FEASIBLE_LOWER,
        nodes=iters,
        runtime_ms=1000.0 * (time.perf_counter() - start),
    )
