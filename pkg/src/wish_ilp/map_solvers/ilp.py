"""Integer programs for pairwise MAP under parity constraints.

The objective and marginal polytope follow the standard indicator-variable
formulation: ``mu_i`` for ``x_i = 1`` and ``mu_ij(a, b)`` for each edge
state.  Parity rows are then added with one of three encodings of the
parity polytope.  A row with parity bit 1 gets an extra literal ``d``, a
variable fixed to 1, so every encoded row asks for even parity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse

from ..gf2 import ParitySystem, support
from ..model import FactorGraph

LE, EQ, GE = "<=", "==", ">="
ENCODINGS = ("jeroslow", "feldman", "yannakakis")
DEFAULT_LENGTH_CAP = 10


class EncodingError(ValueError):
    """A parity row is too long for an exponential-size encoding."""


@dataclass
class IlpVariable:
    name: str
    lb: float
    ub: float
    integral: bool


@dataclass
class IlpConstraint:
    index: list[int]
    coef: list[float]
    sense: str
    rhs: float


@dataclass
class IlpModel:
    """A maximisation ILP with sparse rows and an objective offset.

    ``model`` and ``system`` keep the source query so that solvers can check
    candidate points against the parity system directly.
    """

    variables: list[IlpVariable] = field(default_factory=list)
    constraints: list[IlpConstraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    offset: float = 0.0
    mu_index: list[int] = field(default_factory=list)
    dummy: int | None = None
    model: FactorGraph | None = None
    system: ParitySystem | None = None
    row_encodings: list[str] = field(default_factory=list)
    _arrays: dict | None = field(default=None, repr=False)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = 1.0, integral: bool = False) -> int:
        self.variables.append(IlpVariable(name, float(lb), float(ub), integral))
        self._arrays = None
        return len(self.variables) - 1

    def add_constraint(self, terms: Iterable[tuple[int, float]], sense: str, rhs: float) -> None:
        if sense not in (LE, EQ, GE):
            raise ValueError(f"unknown sense {sense!r}")
        merged: dict[int, float] = {}
        for idx, c in terms:
            merged[idx] = merged.get(idx, 0.0) + float(c)
        self.constraints.append(IlpConstraint(list(merged), list(merged.values()), sense, float(rhs)))
        self._arrays = None

    def dummy_index(self) -> int:
        """The constant-one literal, created on first use."""
        if self.dummy is None:
            self.dummy = self.add_variable("d", 1.0, 1.0, integral=True)
        return self.dummy

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    def arrays(self) -> dict:
        """Dense objective, CSR constraint blocks and bound vectors (cached)."""
        if self._arrays is not None:
            return self._arrays
        nv = self.num_variables
        c = np.zeros(nv)
        for idx, v in self.objective.items():
            c[idx] += v
        blocks = {}
        for name, senses in (("ub", (LE, GE)), ("eq", (EQ,))):
            rows, cols, vals, rhs = [], [], [], []
            for con in self.constraints:
                if con.sense not in senses:
                    continue
                sign = -1.0 if con.sense == GE else 1.0
                r = len(rhs)
                rows += [r] * len(con.index)
                cols += con.index
                vals += [sign * v for v in con.coef]
                rhs.append(sign * con.rhs)
            mat = sparse.csr_matrix((vals, (rows, cols)), shape=(len(rhs), nv)) if rhs else None
            blocks[name] = (mat, np.array(rhs))
        self._arrays = {
            "c": c,
            "A_ub": blocks["ub"][0],
            "b_ub": blocks["ub"][1],
            "A_eq": blocks["eq"][0],
            "b_eq": blocks["eq"][1],
            "lb": np.array([v.lb for v in self.variables]),
            "ub": np.array([v.ub for v in self.variables]),
            "integral": np.array([v.integral for v in self.variables], dtype=bool),
        }
        return self._arrays

    def objective_value(self, point: np.ndarray) -> float:
        return float(self.arrays()["c"] @ point + self.offset)

    def is_feasible(self, point: np.ndarray, tol: float = 1e-7) -> bool:
        a = self.arrays()
        if np.any(point < a["lb"] - tol) or np.any(point > a["ub"] + tol):
            return False
        if a["A_ub"] is not None and np.any(a["A_ub"] @ point > a["b_ub"] + tol):
            return False
        if a["A_eq"] is not None and np.any(np.abs(a["A_eq"] @ point - a["b_eq"]) > tol):
            return False
        return True


def build_objective_and_marginal_polytope(model: FactorGraph) -> IlpModel:
    """Objective plus the four marginalisation equalities per edge.

    ``mu_i`` are integral in ``[0, 1]``; edge indicators are continuous in
    ``[0, 1]`` since the equalities pin them down once every ``mu_i`` is 0/1.
    """
    ilp = IlpModel(model=model)
    for i in range(model.n):
        ilp.mu_index.append(ilp.add_variable(f"mu[{i}]", 0.0, 1.0, integral=True))
    for i, (t0, t1) in enumerate(model.node_logpot):
        ilp.objective[ilp.mu_index[i]] = t1 - t0
        ilp.offset += t0
    for e, ((i, j), table) in enumerate(zip(model.edges, model.edge_logpot)):
        pair = {}
        for a, b in itertools.product((0, 1), repeat=2):
            pair[a, b] = ilp.add_variable(f"mu[{i},{j}]({a},{b})", 0.0, 1.0)
            if table[a, b] != 0.0:
                ilp.objective[pair[a, b]] = float(table[a, b])
        mi, mj = ilp.mu_index[i], ilp.mu_index[j]
        # sum_xj mu_ij(0, xj) = 1 - mu_i, and the three siblings
        ilp.add_constraint([(pair[0, 0], 1), (pair[0, 1], 1), (mi, 1)], EQ, 1)
        ilp.add_constraint([(pair[1, 0], 1), (pair[1, 1], 1), (mi, -1)], EQ, 0)
        ilp.add_constraint([(pair[0, 0], 1), (pair[1, 0], 1), (mj, 1)], EQ, 1)
        ilp.add_constraint([(pair[0, 1], 1), (pair[1, 1], 1), (mj, -1)], EQ, 0)
    return ilp


def _attach(ilp: IlpModel, system: ParitySystem) -> None:
    if ilp.system is None:
        ilp.system = system
    else:
        ilp.system = ParitySystem(system.n, ilp.system.rows + system.rows)


def _row_literals(ilp: IlpModel, coef: int, parity: int) -> list[int]:
    literals = [ilp.mu_index[c] for c in support(coef)]
    if parity:
        literals.append(ilp.dummy_index())
    return literals


def _subsets(literals: list[int], odd: bool):
    for size in range(1 if odd else 0, len(literals) + 1, 2):
        yield from itertools.combinations(literals, size)


def _jeroslow_row(ilp: IlpModel, literals: list[int]) -> None:
    # sum_{S} mu + sum_{N \ S} (1 - mu) <= |N| - 1, rearranged to
    # sum_{S} mu - sum_{N \ S} mu <= |S| - 1
    for subset in _subsets(literals, odd=True):
        chosen = set(subset)
        terms = [(v, 1.0 if v in chosen else -1.0) for v in literals]
        ilp.add_constraint(terms, LE, len(subset) - 1)


def _feldman_row(ilp: IlpModel, j: int, literals: list[int]) -> None:
    weights = []
    for subset in _subsets(literals, odd=False):
        name = "{" + ",".join(ilp.variables[v].name for v in subset) + "}"
        weights.append((set(subset), ilp.add_variable(f"w[{j},{name}]", 0.0, 1.0, integral=True)))
    ilp.add_constraint([(w, 1.0) for _, w in weights], EQ, 1)
    for v in literals:
        ilp.add_constraint([(v, 1.0)] + [(w, -1.0) for s, w in weights if v in s], EQ, 0)


def _yannakakis_row(ilp: IlpModel, j: int, literals: list[int]) -> None:
    evens = range(0, len(literals) + 1, 2)
    alpha = {k: ilp.add_variable(f"alpha[{j},{k}]", 0.0, 1.0, integral=True) for k in evens}
    z = {}
    for k in evens:
        for v in literals:
            z[v, k] = ilp.add_variable(f"z[{ilp.variables[v].name},{j},{k}]", 0.0, 1.0)
            ilp.add_constraint([(z[v, k], 1.0), (alpha[k], -1.0)], LE, 0)
    ilp.add_constraint([(a, 1.0) for a in alpha.values()], EQ, 1)
    for v in literals:
        ilp.add_constraint([(v, 1.0)] + [(z[v, k], -1.0) for k in evens], EQ, 0)
    for k in evens:
        ilp.add_constraint([(z[v, k], 1.0) for v in literals] + [(alpha[k], -float(k))], EQ, 0)


def _check_cap(literals: list[int], cap: int | None, j: int, name: str) -> None:
    if cap is not None and len(literals) > cap:
        raise EncodingError(f"row {j} has {len(literals)} literals, over the {name} cap of {cap}")


def encode_jeroslow(ilp: IlpModel, system: ParitySystem, cap: int | None = DEFAULT_LENGTH_CAP) -> IlpModel:
    """Add every odd-subset cut of every row (``2^(L-1)`` rows for ``L`` literals)."""
    _attach(ilp, system)
    for j, (coef, parity) in enumerate(system.rows):
        literals = _row_literals(ilp, coef, parity)
        _check_cap(literals, cap, j, "jeroslow")
        _jeroslow_row(ilp, literals)
        ilp.row_encodings.append("jeroslow")
    return ilp


def encode_feldman(ilp: IlpModel, system: ParitySystem, cap: int | None = DEFAULT_LENGTH_CAP) -> IlpModel:
    """One binary per even subset of each row, convex-combining to the ``mu``."""
    _attach(ilp, system)
    for j, (coef, parity) in enumerate(system.rows):
        literals = _row_literals(ilp, coef, parity)
        _check_cap(literals, cap, j, "feldman")
        _feldman_row(ilp, j, literals)
        ilp.row_encodings.append("feldman")
    return ilp


def encode_yannakakis(ilp: IlpModel, system: ParitySystem) -> IlpModel:
    """Compact encoding: one binary ``alpha`` per even count, split variables ``z``."""
    _attach(ilp, system)
    for j, (coef, parity) in enumerate(system.rows):
        _yannakakis_row(ilp, j, _row_literals(ilp, coef, parity))
        ilp.row_encodings.append("yannakakis")
    return ilp


def build_ilp(
    model: FactorGraph,
    system: ParitySystem,
    policy: str = "auto",
    cap: int = DEFAULT_LENGTH_CAP,
) -> IlpModel:
    """Marginal polytope plus encoded parity rows.

    ``policy="auto"`` uses Jeroslow for rows of at most ``cap`` literals
    (the constant literal included) and Yannakakis for longer ones; any other
    value forces that encoding on every row.
    """
    if system.n != model.n:
        raise ValueError("system and model disagree on n")
    if policy not in ("auto",) + ENCODINGS:
        raise ValueError(f"unknown encoding policy {policy!r}")
    ilp = build_objective_and_marginal_polytope(model)
    ilp.system = system
    for j, (coef, parity) in enumerate(system.rows):
        if coef == 0 and parity == 0:
            ilp.row_encodings.append("none")
            continue
        literals = _row_literals(ilp, coef, parity)
        choice = policy
        if policy == "auto":
            choice = "jeroslow" if len(literals) <= cap else "yannakakis"
        if choice == "jeroslow":
            _check_cap(literals, cap, j, choice)
            _jeroslow_row(ilp, literals)
        elif choice == "feldman":
            _check_cap(literals, cap, j, choice)
            _feldman_row(ilp, j, literals)
        else:
            _yannakakis_row(ilp, j, literals)
        ilp.row_encodings.append(choice)
    return ilp
