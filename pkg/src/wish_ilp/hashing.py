"""Random hash functions ``h(x) = A x + b (mod 2)`` and exact family audits.

Three families are provided: dense (every entry of ``A`` a fair coin),
Toeplitz (``A`` constant along diagonals, pairwise independent with only
``n + m - 1`` matrix bits) and sparse (every row has exactly ``k`` ones;
uniform but not pairwise independent).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .gf2 import ParitySystem, pack


class Family(str, Enum):
    DENSE = "dense"
    TOEPLITZ = "toeplitz"
    SPARSE = "sparse"


@dataclass(frozen=True)
class HashFamilySpec:
    kind: Family
    n: int
    m: int
    k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Family(self.kind))
        if not 0 <= self.m <= self.n:
            raise ValueError(f"range bits m={self.m} must lie in [0, n={self.n}]")
        if self.kind is Family.SPARSE:
            if self.k is None or not 1 <= self.k <= self.n:
                raise ValueError(f"sparse family needs 1 <= k <= n, got k={self.k}")

    @property
    def pairwise_independent(self) -> bool:
        return self.kind is not Family.SPARSE


def parse_family(text: str) -> tuple[Family, int | None]:
    """Parse ``dense``, ``toeplitz`` or ``sparse:<k>``."""
    kind, _, k = text.strip().lower().partition(":")
    family = Family(kind)
    if family is Family.SPARSE:
        if not k:
            raise ValueError("sparse family needs a row weight, e.g. sparse:4")
        return family, int(k)
    if k:
        raise ValueError(f"family {kind!r} takes no row weight")
    return family, None


def format_family(kind: Family, k: int | None) -> str:
    kind = Family(kind)
    return f"sparse:{k}" if kind is Family.SPARSE else kind.value


class SeededRng:
    """Counter-based random stream keyed by a master seed and a label.

    The stream for ``(seed, label)`` does not depend on what other streams
    were drawn before it, so queries can be dispatched in any order.
    ``bits_used`` counts fair coin flips handed out by :meth:`bits`.
    """

    def __init__(self, seed: int, label: Sequence[int] = ()):
        self.seed = int(seed)
        self.label = tuple(int(v) for v in label)
        seq = np.random.SeedSequence(self.seed & ((1 << 64) - 1), spawn_key=self.label)
        self._gen = np.random.Generator(np.random.Philox(seq))
        self.bits_used = 0

    def bits(self, count: int) -> np.ndarray:
        self.bits_used += count
        return self._gen.integers(0, 2, size=count, dtype=np.uint8)

    def integers(self, low: int, high: int) -> int:
        return int(self._gen.integers(low, high))

    def uniform(self, low: float, high: float, size: int) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)


def sample_dense(n: int, m: int, rng: SeededRng) -> ParitySystem:
    """Every entry of ``A`` and ``b`` an independent fair coin; ``n m + m`` bits."""
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    A = rng.bits(n * m).reshape(m, n)
    b = rng.bits(m)
    return ParitySystem.from_arrays(A, b) if m else ParitySystem(n)


def toeplitz_from_boundary(first_row: Sequence[int], first_col: Sequence[int]) -> np.ndarray:
    """Copy the first row and column down their diagonals.

    ``first_col[0]`` must equal ``first_row[0]``.
    """
    first_row = np.asarray(first_row, dtype=np.uint8)
    first_col = np.asarray(first_col, dtype=np.uint8)
    if first_col[0] != first_row[0]:
        raise ValueError("first row and first column disagree on the corner entry")
    m, n = len(first_col), len(first_row)
    r = np.arange(m)[:, None]
    c = np.arange(n)[None, :]
    diag = c - r
    return np.where(diag >= 0, first_row[np.clip(diag, 0, None)], first_col[np.clip(-diag, 0, None)]).astype(np.uint8)


def sample_toeplitz(n: int, m: int, rng: SeededRng) -> ParitySystem:
    """Random Toeplitz ``A`` from ``n + m - 1`` bits, then ``m`` bits for ``b``.

    The first row is drawn first, then the remaining ``m - 1`` entries of the
    first column.
    """
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    if m == 0:
        return ParitySystem(n)
    first_row = rng.bits(n)
    first_col = np.concatenate([first_row[:1], rng.bits(m - 1)])
    A = toeplitz_from_boundary(first_row, first_col)
    b = rng.bits(m)
    return ParitySystem.from_arrays(A, b)


def sample_sparse(n: int, m: int, k: int, rng: SeededRng) -> ParitySystem:
    """Rows with exactly ``k`` ones at a uniformly random ``k``-subset of columns."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    rows = []
    for _ in range(m):
        cols = list(range(n))
        # partial Fisher-Yates: the first k slots end up a uniform k-subset
        for s in range(k):
            pick = rng.integers(s, n)
            cols[s], cols[pick] = cols[pick], cols[s]
        word = 0
        for c in cols[:k]:
            word |= 1 << c
        rows.append(word)
    b = rng.bits(m)
    return ParitySystem(n, tuple((w, int(p)) for w, p in zip(rows, b)))


def sample(spec: HashFamilySpec, rng: SeededRng) -> ParitySystem:
    if spec.kind is Family.DENSE:
        return sample_dense(spec.n, spec.m, rng)
    if spec.kind is Family.TOEPLITZ:
        return sample_toeplitz(spec.n, spec.m, rng)
    return sample_sparse(spec.n, spec.m, spec.k, rng)


def eval_hash(system: ParitySystem, x: Sequence[int]) -> np.ndarray:
    """``A x + b (mod 2)`` as a length-``m`` bit-vector."""
    word = pack(x, system.n)
    return np.array([((coef & word).bit_count() + parity) & 1 for coef, parity in system.rows], dtype=np.uint8)


# -- exact audits ------------------------------------------------------------

MAX_AUDIT_MEMBERS = 1 << 20


def family_members(spec: HashFamilySpec) -> tuple[np.ndarray, np.ndarray]:
    """All ``(A, b)`` in the family, as arrays of shape ``(F, m, n)`` and ``(F, m)``.

    Each member appears once per parameter assignment, so uniform sampling of
    parameters is uniform sampling of this list.
    """
    n, m = spec.n, spec.m
    if spec.kind is Family.DENSE:
        count = 1 << (n * m + m)
    elif spec.kind is Family.TOEPLITZ:
        count = 1 << (n + 2 * m - 1) if m else 1
    else:
        count = len(list(itertools.combinations(range(n), spec.k))) ** m << m
    if count > MAX_AUDIT_MEMBERS:
        raise ValueError(f"{spec} has {count} members, too many to enumerate")

    b_all = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.uint8).reshape(-1, m)
    if spec.kind is Family.DENSE:
        mats = np.array(list(itertools.product((0, 1), repeat=n * m)), dtype=np.uint8).reshape(-1, m, n)
    elif spec.kind is Family.TOEPLITZ:
        if m == 0:
            mats = np.zeros((1, 0, n), dtype=np.uint8)
        else:
            mats = np.array(
                [
                    toeplitz_from_boundary(bits[:n], (bits[0],) + bits[n:])
                    for bits in itertools.product((0, 1), repeat=n + m - 1)
                ],
                dtype=np.uint8,
            ).reshape(-1, m, n)
    else:
        row_choices = []
        for cols in itertools.combinations(range(n), spec.k):
            row = np.zeros(n, dtype=np.uint8)
            row[list(cols)] = 1
            row_choices.append(row)
        mats = np.array(list(itertools.product(row_choices, repeat=m)), dtype=np.uint8).reshape(-1, m, n)
    A = np.repeat(mats, len(b_all), axis=0)
    b = np.tile(b_all, (len(mats), 1))
    return A, b


@dataclass
class AuditReport:
    spec: HashFamilySpec
    members: int
    uniform: bool
    pairwise_independent: bool
    # x -> counts of each hash value (value packed with bit r = output r)
    marginal_counts: dict[tuple[int, ...], list[int]] = field(repr=False)
    # (x1, x2) -> counts over packed joint outcomes value1 + 2^m value2
    pair_counts: dict[tuple[tuple[int, ...], tuple[int, ...]], list[int]] = field(repr=False)
    nonuniform_pairs: list[tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=list, repr=False)

    def summary(self) -> str:
        return (
            f"{format_family(self.spec.kind, self.spec.k)} n={self.spec.n} m={self.spec.m}: "
            f"{self.members} members, uniform={self.uniform}, "
            f"pairwise_independent={self.pairwise_independent} "
            f"({len(self.nonuniform_pairs)} of {len(self.pair_counts)} pairs non-uniform)"
        )


def independence_audit(spec: HashFamilySpec) -> AuditReport:
    """Exact marginal and pairwise joint distributions of ``H(x)`` over the family."""
    n, m = spec.n, spec.m
    A, b = family_members(spec)
    xs = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    # values[f, x] = h_f(x) packed as an integer
    hx = (np.einsum("fmn,xn->fxm", A.astype(np.int64), xs) + b[:, None, :]) & 1
    values = (hx * (1 << np.arange(m))).sum(axis=2)
    keys = [tuple(int(v) for v in x) for x in xs]
    size = 1 << m

    marginal = {}
    uniform = True
    for col, key in enumerate(keys):
        counts = np.bincount(values[:, col], minlength=size)
        marginal[key] = counts.tolist()
        uniform &= bool(np.all(counts == counts[0]))

    pairs = {}
    bad = []
    for c1, c2 in itertools.combinations(range(len(keys)), 2):
        counts = np.bincount(values[:, c1] + size * values[:, c2], minlength=size * size)
        pairs[(keys[c1], keys[c2])] = counts.tolist()
        if not np.all(counts == counts[0]):
            bad.append((keys[c1], keys[c2]))
    return AuditReport(spec, len(A), uniform, uniform and not bad, marginal, pairs, bad)
