"""Linear algebra over GF(2) for parity-constraint systems ``A x = b (mod 2)``.

Rows are stored as Python integers used as bitsets: bit ``c`` of a row's
coefficient word is the entry in column ``c``.  The parity bit is kept next
to it, and the *augmented* word ``coef | (parity << n)`` is what row
operations act on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 20


class InconsistentSystemError(ValueError):
    """Raised when an operation needs a nonempty solution set."""


class EnumerationCapError(ValueError):
    """Raised when brute-force enumeration would exceed the configured cap."""


def _parse_bits(bits: str | Sequence[int] | int, n: int) -> int:
    if isinstance(bits, (int, np.integer)):
        value = int(bits)
        if value < 0 or value >> n:
            raise ValueError(f"coefficient word {value} does not fit in {n} bits")
        return value
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits if ch in "01"]
    bits = list(bits)
    if len(bits) != n:
        raise ValueError(f"expected {n} coefficients, got {len(bits)}")
    word = 0
    for c, v in enumerate(bits):
        if v not in (0, 1):
            raise ValueError(f"coefficient {v!r} is not a bit")
        if v:
            word |= 1 << c
    return word


@dataclass(frozen=True)
class ParitySystem:
    """The parity system ``A x = b (mod 2)`` over ``n`` binary variables.

    ``rows`` holds ``(coefficient_word, parity_bit)`` pairs.  An empty row
    list is the unconstrained system whose solution set is the whole cube.
    """

    n: int
    rows: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        rows = tuple((int(c), int(p)) for c, p in self.rows)
        for coef, parity in rows:
            if coef < 0 or coef >> self.n:
                raise ValueError(f"row {coef:#x} has bits outside the {self.n} columns")
            if parity not in (0, 1):
                raise ValueError(f"parity {parity!r} is not a bit")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rows(cls, n: int, rows: Iterable[tuple[str | Sequence[int] | int, int]]) -> "ParitySystem":
        """Build from ``(coefficients, parity)`` pairs.

        Coefficients may be a bit string such as ``"1100"`` (first character
        is column 0), a 0/1 sequence, or an already packed integer word.
        """
        return cls(n, tuple((_parse_bits(c, n), int(p)) for c, p in rows))

    @classmethod
    def from_arrays(cls, A, b) -> "ParitySystem":
        A = np.asarray(A, dtype=np.uint8)
        b = np.asarray(b, dtype=np.uint8).ravel()
        if A.ndim != 2 or A.shape[0] != b.shape[0]:
            raise ValueError(f"A of shape {A.shape} does not match b of length {b.shape[0]}")
        n = A.shape[1]
        return cls(n, tuple((pack(A[j] & 1, n), int(b[j] & 1)) for j in range(A.shape[0])))

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def A(self) -> np.ndarray:
        out = np.zeros((self.m, self.n), dtype=np.uint8)
        for j, (coef, _) in enumerate(self.rows):
            for c in support(coef):
                out[j, c] = 1
        return out

    @property
    def b(self) -> np.ndarray:
        return np.array([p for _, p in self.rows], dtype=np.uint8)

    def augmented_words(self) -> list[int]:
        return [coef | (parity << self.n) for coef, parity in self.rows]

    def norm1(self) -> int:
        """1-norm of the augmented matrix ``[A|b]``."""
        return sum(w.bit_count() for w in self.augmented_words())

    def row_support(self, j: int) -> list[int]:
        """Column indices of the nonzero entries of row ``j`` (the set N(j))."""
        return support(self.rows[j][0])

    def satisfied_by(self, x: Sequence[int]) -> bool:
        word = pack(x, self.n)
        return all((coef & word).bit_count() & 1 == parity for coef, parity in self.rows)

    def __str__(self) -> str:
        return format_system(self)


def support(word: int) -> list[int]:
    out = []
    c = 0
    while word:
        if word & 1:
            out.append(c)
        word >>= 1
        c += 1
    return out


def pack(x: Sequence[int], n: int) -> int:
    x = np.asarray(x).ravel()
    if x.shape[0] != n:
        raise ValueError(f"expected a bit-vector of length {n}, got {x.shape[0]}")
    word = 0
    for c in np.flatnonzero(x):
        word |= 1 << int(c)
    return word


def unpack(word: int, n: int) -> np.ndarray:
    return np.array([(word >> c) & 1 for c in range(n)], dtype=np.uint8)


def _from_words(n: int, words: Iterable[int]) -> ParitySystem:
    mask = (1 << n) - 1
    return ParitySystem(n, tuple((w & mask, (w >> n) & 1) for w in words))


def _reduce(n: int, words: list[int]) -> tuple[list[int], list[int], bool]:
    """Gauss-Jordan elimination on augmented words.

    Returns (pivot rows sorted by pivot column, pivot columns, inconsistent).
    """
    work = list(words)
    pivots: list[int] = []
    top = 0
    for col in range(n):
        bit = 1 << col
        found = next((r for r in range(top, len(work)) if work[r] & bit), None)
        if found is None:
            continue
        work[top], work[found] = work[found], work[top]
        prow = work[top]
        for r in range(len(work)):
            if r != top and work[r] & bit:
                work[r] ^= prow
        pivots.append(col)
        top += 1
    inconsistent = any(w for w in work[top:])
    return work[:top], pivots, inconsistent


def rref(system: ParitySystem) -> ParitySystem:
    """Reduced row echelon form of ``[A|b]``.

    Rows ``0 = 0`` are dropped.  If the system is inconsistent a single row
    ``0 = 1`` is appended after the pivot rows.
    """
    n = system.n
    rows, _, inconsistent = _reduce(n, system.augmented_words())
    if inconsistent:
        rows.append(1 << n)
    return _from_words(n, rows)


def is_consistent(system: ParitySystem) -> bool:
    return not _reduce(system.n, system.augmented_words())[2]


def rank(system: ParitySystem) -> int:
    mask = (1 << system.n) - 1
    return len(_reduce(system.n, [c & mask for c, _ in system.rows])[0])


def greedy_sparsify(system: ParitySystem, depth: int = 4, max_substitutions: int | None = None) -> ParitySystem:
    """Sparsify by substituting rows with sparser sums of up to ``depth`` rows.

    Combinations of sizes ``2..depth`` are scanned in lexicographic order of
    row-index tuples.  When the GF(2) sum of a combination has strictly fewer
    ones than the densest row in it, that row (lowest index on ties) is
    replaced by the sum and the scan restarts.  Every substitution strictly
    lowers the augmented 1-norm; ``max_substitutions`` (default ``10 m``)
    only guards termination.  Rows reduced to ``0 = 0`` are dropped at the end.
    """
    if depth < 2:
        raise ValueError("depth must be at least 2")
    words = system.augmented_words()
    m = len(words)
    cap = 10 * m if max_substitutions is None else max_substitutions
    weights = [w.bit_count() for w in words]
    done = 0
    improved = True
    while improved and done < cap:
        improved = False
        for size in range(2, min(depth, m) + 1):
            for combo in itertools.combinations(range(m), size):
                total = 0
                for r in combo:
                    total ^= words[r]
                target = max(combo, key=lambda r: (weights[r], -r))
                tw = total.bit_count()
                if tw < weights[target]:
                    words[target] = total
                    weights[target] = tw
                    done += 1
                    improved = True
                    break
            if improved:
                break
    return _from_words(system.n, [w for w in words if w])


def solution_set(system: ParitySystem, cap: int = DEFAULT_ENUMERATION_CAP) -> set[tuple[int, ...]]:
    """Brute-force enumeration of all solutions as bit tuples (index = column)."""
    n = system.n
    if n > cap:
        raise EnumerationCapError(f"n={n} exceeds enumeration cap {cap}")
    configs = np.arange(1 << n, dtype=np.int64)
    keep = np.ones(configs.shape, dtype=bool)
    for coef, parity in system.rows:
        keep &= (np.bitwise_count(configs & coef) & 1) == parity
    bits = (configs[keep, None] >> np.arange(n)) & 1
    return {tuple(int(v) for v in row) for row in bits}


class Projector:
    """Back-substitution onto the solution set of a fixed consistent system.

    Free (non-pivot) variables keep their values; pivot variables are set so
    that every RREF row holds.
    """

    def __init__(self, system: ParitySystem):
        n = system.n
        rows, pivots, inconsistent = _reduce(n, system.augmented_words())
        if inconsistent:
            raise InconsistentSystemError("cannot project onto an empty solution set")
        self.n = n
        mask = (1 << n) - 1
        self._rows = [(p, (w & mask) & ~(1 << p), (w >> n) & 1) for w, p in zip(rows, pivots)]

    def project_word(self, word: int) -> int:
        for pivot, rest, parity in self._rows:
            value = ((rest & word).bit_count() + parity) & 1
            word = (word & ~(1 << pivot)) | (value << pivot)
        return word

    def __call__(self, point: Sequence[int]) -> np.ndarray:
        return unpack(self.project_word(pack(point, self.n)), self.n)


def project_to_solutions(system: ParitySystem, point: Sequence[int]) -> np.ndarray:
    return Projector(system)(point)


def parse_system(text: str) -> ParitySystem:
    """Parse the textual format: ``n m`` then ``m`` lines ``c_1 ... c_n b``."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty parity-system text")
    n, m = (int(v) for v in lines[0][:2])
    if len(lines) - 1 != m:
        raise ValueError(f"header declares {m} rows, found {len(lines) - 1}")
    rows = []
    for toks in lines[1:]:
        if len(toks) != n + 1:
            raise ValueError(f"row {' '.join(toks)!r} should have {n + 1} entries")
        bits = [int(t) for t in toks]
        rows.append((bits[:n], bits[n]))
    return ParitySystem.from_rows(n, rows)


def format_system(system: ParitySystem) -> str:
    out = [f"{system.n} {system.m}"]
    for coef, parity in system.rows:
        out.append(" ".join(str((coef >> c) & 1) for c in range(system.n)) + f" {parity}")
    return "\n".join(out) + "\n"
