"""Exact representation of sparse d-regular 0/1 matrices.

A matrix is stored as dual sorted support lists: for every row the sorted
column indices of its d ones, and (lazily) for every column the sorted row
indices.  All operations are exact set computations; nothing here touches
floating point except `shifted_apply`.

Indices are 0-based everywhere in code.  The text serialization is 1-based;
that boundary lives in `to_text` / `from_text` only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "ComplexShift",
    "RegularMatrix",
    "RowMask",
    "SwitchInvalid",
    "edge_count",
    "union_col_supports",
    "simple_switch",
    "shifted_apply",
    "circulant",
    "permutation_matrix",
]

# A spectral shift is just a complex scalar; the alias marks intent in
# signatures.
ComplexShift = complex


class SwitchInvalid(ValueError):
    """A requested edge switch would create a multi-edge or remove a non-edge."""


def _as_index_set(idx, n: int) -> np.ndarray:
    """Coerce `idx` to a sorted, deduplicated int64 array of indices in [0, n)."""
    arr = np.unique(np.asarray(idx, dtype=np.int64)).reshape(-1)
    if arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise ValueError(f"index out of range [0, {n})")
    return arr


class RegularMatrix:
    """An n x n 0/1 matrix with all row and column sums equal to d.

    Loops (diagonal ones) are allowed; multiple edges are not, which the 0/1
    entry type enforces by construction.  Instances are immutable: the support
    array is read-only and operations return new matrices.
    """

    __slots__ = ("n", "d", "row_supports", "__dict__")

    def __init__(self, row_supports: np.ndarray, validate: bool = True):
        rows = np.ascontiguousarray(row_supports, dtype=np.int64)
        if rows.ndim != 2:
            raise ValueError("row_supports must be a 2-d array")
        self.n, self.d = int(rows.shape[0]), int(rows.shape[1])
        if validate:
            self._validate(rows)
        rows.flags.writeable = False
        self.row_supports = rows

    def _validate(self, rows: np.ndarray) -> None:
        n, d = rows.shape
        if d < 1 or d > n:
            raise ValueError(f"need 1 <= d <= n, got n={n}, d={d}")
        if rows.size and (rows.min() < 0 or rows.max() >= n):
            raise ValueError("column index out of range")
        if np.any(np.diff(rows, axis=1) <= 0):
            raise ValueError("row supports must be strictly increasing")
        counts = np.bincount(rows.ravel(), minlength=n)
        if np.any(counts != d):
            bad = int(np.flatnonzero(counts != d)[0])
            raise ValueError(f"column {bad} has sum {int(counts[bad])}, expected {d}")

    @cached_property
    def col_supports(self) -> np.ndarray:
        """(n, d) array: sorted row indices of the ones in each column."""
        flat = self.row_supports.ravel()
        order = np.argsort(flat, kind="stable")  # stable keeps row order ascending
        rows_of = order // self.d
        out = rows_of.reshape(self.n, self.d)
        out.flags.writeable = False
        return out

    def has_entry(self, i: int, j: int) -> bool:
        row = self.row_supports[i]
        pos = int(np.searchsorted(row, j))
        return pos < self.d and row[pos] == j

    def to_dense(self) -> np.ndarray:
        """Dense 0/1 array; intended for small n only."""
        dense = np.zeros((self.n, self.n), dtype=np.int64)
        np.put_along_axis(dense, self.row_supports, 1, axis=1)
        return dense

    def key(self) -> bytes:
        """Hashable canonical form (used for counting draws in tests)."""
        return self.row_supports.tobytes()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RegularMatrix)
            and self.n == other.n
            and self.d == other.d
            and np.array_equal(self.row_supports, other.row_supports)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.d, self.key()))

    def __repr__(self) -> str:
        return f"RegularMatrix(n={self.n}, d={self.d})"

    def to_text(self) -> str:
        """Serialize as a header line "n d" plus one line of sorted 1-based
        column indices per row."""
        lines = [f"{self.n} {self.d}"]
        lines.extend(" ".join(str(c + 1) for c in row) for row in self.row_supports)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RegularMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty matrix text")
        header = lines[0].split()
        if len(header) != 2:
            raise ValueError("header must be 'n d'")
        n, d = int(header[0]), int(header[1])
        if len(lines) != n + 1:
            raise ValueError(f"expected {n} support lines, got {len(lines) - 1}")
        rows = np.empty((n, d), dtype=np.int64)
        for i, ln in enumerate(lines[1:]):
            vals = ln.split()
            if len(vals) != d:
                raise ValueError(f"row {i + 1} has {len(vals)} entries, expected {d}")
            rows[i] = [int(v) - 1 for v in vals]
        return cls(rows)


@dataclass(frozen=True)
class RowMask:
    """A subset K of the rows, kept with its ambient size n.

    Applying a matrix "restricted to K" means keeping only the output
    coordinates indexed by K; the complement rows are discarded.
    """

    n: int
    rows: np.ndarray

    def __post_init__(self):
        rows = _as_index_set(self.rows, self.n)
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @classmethod
    def full(cls, n: int) -> "RowMask":
        return cls(n, np.arange(n, dtype=np.int64))

    @classmethod
    def from_complement(cls, n: int, excluded) -> "RowMask":
        keep = np.ones(n, dtype=bool)
        keep[_as_index_set(excluded, n)] = False
        return cls(n, np.flatnonzero(keep))

    @property
    def size(self) -> int:
        return int(self.rows.size)

    @property
    def complement_size(self) -> int:
        return self.n - self.size

    def complement(self) -> np.ndarray:
        keep = np.ones(self.n, dtype=bool)
        keep[self.rows] = False
        return np.flatnonzero(keep)


def edge_count(M: RegularMatrix, I, J) -> int:
    """Number of ones of `M` inside the index rectangle I x J."""
    I = _as_index_set(I, M.n)
    J = _as_index_set(J, M.n)
    if I.size == 0 or J.size == 0:
        return 0
    return int(np.isin(M.row_supports[I], J).sum())


def union_col_supports(M: RegularMatrix, J) -> np.ndarray:
    """Rows having at least one out of the columns `J` in their support.

    The result has size at most min(n, d*|J|); it can be smaller than |J|.
    """
    J = _as_index_set(J, M.n)
    if J.size == 0:
        return np.empty(0, dtype=np.int64)
    return np.unique(M.col_supports[J])


def simple_switch(M: RegularMatrix, i: int, j: int, i2: int, j2: int) -> RegularMatrix:
    """Replace edges (i, j), (i2, j2) by (i, j2), (i2, j).

    Requires M[i, j] = M[i2, j2] = 1 and M[i, j2] = M[i2, j] = 0 with i != i2
    and j != j2; those conditions are exactly what keeps the result free of
    multiple edges, so the switched matrix is again d-regular 0/1.
    """
    if i == i2 or j == j2:
        raise SwitchInvalid("rows and columns must be distinct pairs")
    for r, c, want in ((i, j, True), (i2, j2, True), (i, j2, False), (i2, j, False)):
        if M.has_entry(r, c) != want:
            state = "missing" if want else "already present"
            raise SwitchInvalid(f"entry ({r}, {c}) {state}")
    rows = M.row_supports.copy()
    row_i = rows[i].copy()
    row_i[np.searchsorted(row_i, j)] = j2
    rows[i] = np.sort(row_i)
    row_i2 = rows[i2].copy()
    row_i2[np.searchsorted(row_i2, j2)] = j
    rows[i2] = np.sort(row_i2)
    return RegularMatrix(rows, validate=False)


def shifted_apply(
    M: RegularMatrix, z: ComplexShift, K: RowMask, x: np.ndarray
) -> np.ndarray:
    """Rows K of (M - z*Id) applied to the vector `x`.

    Output coordinate for row i is sum(x[supp R_i]) - z*x[i].  Work is done in
    row blocks so the (|K|, d) gather never materializes for huge matrices.
    """
    x = np.asarray(x)
    if x.shape != (M.n,):
        raise ValueError(f"x must have shape ({M.n},)")
    xc = x.astype(np.complex128, copy=False)
    rows = K.rows
    out = np.empty(rows.size, dtype=np.complex128)
    block = max(1, (1 << 21) // max(M.d, 1))
    for start in range(0, rows.size, block):
        sel = rows[start : start + block]
        out[start : start + sel.size] = xc[M.row_supports[sel]].sum(axis=1)
    out -= z * xc[rows]
    return out


def circulant(n: int, d: int, offsets=None) -> RegularMatrix:
    """Circulant 0/1 matrix: row i has ones at columns (i + t) mod n.

    Default offsets are 0..d-1.  The canonical MCMC start and the standard
    counterexample family in the norm experiments.
    """
    if offsets is None:
        offsets = np.arange(d, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1)
    if offsets.size != d or np.unique(offsets % n).size != d:
        raise ValueError("need d offsets, distinct mod n")
    rows = np.sort((np.arange(n, dtype=np.int64)[:, None] + offsets[None, :]) % n, axis=1)
    return RegularMatrix(rows, validate=False)


def permutation_matrix(sigma) -> RegularMatrix:
    """d=1 matrix with row i supported on column sigma[i]."""
    sigma = np.asarray(sigma, dtype=np.int64).reshape(-1, 1)
    return RegularMatrix(sigma)
