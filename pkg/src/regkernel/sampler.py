"""Random generation of regular matrices, paired-stub multigraphs, and
independent level-sum surrogate vectors; exhaustive enumeration for tiny sizes.

Matrices are drawn either exactly (stub pairing with rejection on simplicity)
or approximately (a switch chain whose moves are the 2x2 exchanges from
`graph_core.simple_switch`).  The multigraph sampler pairs row stubs with
column stubs part by part, which is the randomness model behind the
level-sum surrogate `sample_Z`: conditioned on every level receiving its
exact stub count, the surrogate agrees in law with the multigraph acting on
the level values.

All entry points are pure functions of (inputs, seed); seeds feed a
counter-based Philox generator so trials can be distributed over derived
seeds without sharing state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .ell_decomp import EllDecomposition
from .graph_core import RegularMatrix, RowMask

__all__ = [
    "RejectionBudgetExceeded",
    "MultiGraphAdj",
    "SurrogateDraw",
    "sample_uniform",
    "sample_mcmc",
    "sample_mcmc_batch",
    "sample_regular",
    "enumerate_all",
    "sample_multigraph",
    "sample_Z",
    "level_value_vector",
    "simple_probability",
]


class RejectionBudgetExceeded(RuntimeError):
    """No simple matrix found within the attempt budget (degree too dense)."""


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _numba_seed(seed) -> int:
    return int(np.random.SeedSequence([seed, 0x5EED]).generate_state(1, np.uint32)[0])


# ------------------------------------------------------------ exact sampling


def sample_uniform(n: int, d: int, seed, attempt_budget: int = 10000) -> RegularMatrix:
    """Uniform element of the d-regular 0/1 matrices, by rejection.

    Pairs row stubs with a uniformly permuted pool of column stubs and
    retries until no (row, column) pair repeats.  Every simple matrix arises
    from the same number of pairings, so the accepted draw is exactly
    uniform.  Raises `RejectionBudgetExceeded` when the budget runs out,
    which for d beyond ~5 it quickly will; callers then fall back to
    `sample_mcmc` / `sample_regular`.
    """
    if not 1 <= d <= n:
        raise ValueError("need 1 <= d <= n")
    if attempt_budget < 1:
        raise ValueError("attempt_budget must be positive")
    rng = _rng(seed)
    rows = np.repeat(np.arange(n, dtype=np.int64), d)
    col_pool = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(attempt_budget):
        cols = col_pool[rng.permutation(n * d)]
        key = rows * n + cols
        key.sort()
        if np.all(key[1:] != key[:-1]):
            return RegularMatrix(np.sort(cols.reshape(n, d), axis=1))
    raise RejectionBudgetExceeded(
        f"no simple pairing in {attempt_budget} attempts at n={n}, d={d}"
    )


# ----------------------------------------------------------- switch chain


@njit(cache=True)
def _seed_nb(seed):
    np.random.seed(seed)


@njit(cache=True)
def _row_has(row, v):
    lo, hi = 0, row.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if row[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < row.shape[0] and row[lo] == v


@njit(cache=True)
def _row_set(row, pos, v):
    # replace row[pos] with v, shifting neighbours to keep the row sorted
    i = pos
    while i + 1 < row.shape[0] and row[i + 1] < v:
        row[i] = row[i + 1]
        i += 1
    while i > 0 and row[i - 1] > v:
        row[i] = row[i - 1]
        i -= 1
    row[i] = v


@njit(cache=True)
def _chain_steps(rows, steps):
    n, d = rows.shape
    accepted = 0
    if n < 2:
        return 0
    for _ in range(steps):
        i = np.random.randint(0, n)
        i2 = np.random.randint(0, n - 1)
        if i2 >= i:
            i2 += 1
        j = rows[i, np.random.randint(0, d)]
        j2 = rows[i2, np.random.randint(0, d)]
        if j == j2:
            continue
        if _row_has(rows[i], j2) or _row_has(rows[i2], j):
            continue
        pos = np.searchsorted(rows[i], j)
        pos2 = np.searchsorted(rows[i2], j2)
        _row_set(rows[i], pos, j2)
        _row_set(rows[i2], pos2, j)
        accepted += 1
    return accepted


@njit(cache=True)
def _chain_batch(start, draws, steps):
    n, d = start.shape
    out = np.empty((draws, n, d), np.int64)
    work = np.empty_like(start)
    for t in range(draws):
        work[:] = start
        _chain_steps(work, steps)
        out[t] = work
    return out


def sample_mcmc(start: RegularMatrix, steps: int, seed) -> RegularMatrix:
    """State of the switch chain after `steps` proposed moves.

    Each proposal picks two distinct rows and one support entry in each; the
    2x2 exchange is applied when legal and silently rejected otherwise, so
    the kernel is symmetric and the uniform distribution is stationary.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    rows = start.row_supports.copy()
    _seed_nb(_numba_seed(seed))
    _chain_steps(rows, steps)
    return RegularMatrix(rows)


def sample_mcmc_batch(start: RegularMatrix, draws: int, steps: int, seed) -> np.ndarray:
    """Row supports of `draws` fresh chains of length `steps` from `start`."""
    _seed_nb(_numba_seed(seed))
    return _chain_batch(start.row_supports, draws, steps)


def sample_regular(
    n: int,
    d: int,
    seed,
    method: str = "auto",
    attempt_budget: int = 10000,
    burn_factor: int = 10,
) -> RegularMatrix:
    """Draw a d-regular matrix: exact rejection when feasible, else the
    switch chain burnt in until `burn_factor * n * d` accepted moves."""
    if method not in ("auto", "rejection", "mcmc"):
        raise ValueError("method must be auto | rejection | mcmc")
    if method == "rejection" or (method == "auto" and d <= 4):
        try:
            return sample_uniform(n, d, seed, attempt_budget)
        except RejectionBudgetExceeded:
            if method == "rejection":
                raise
    from .graph_core import circulant

    start = circulant(n, d, range(d))
    rows = start.row_supports.copy()
    _seed_nb(_numba_seed(seed))
    target = burn_factor * n * d
    accepted = 0
    for _ in range(200):
        accepted += _chain_steps(rows, max(target, 4 * n * d))
        if accepted >= target:
            break
    return RegularMatrix(rows)


# ------------------------------------------------------------- enumeration


def enumerate_all(n: int, d: int):
    """Every d-regular 0/1 matrix of size n (guarded to n <= 6)."""
    if not 1 <= d <= n:
        raise ValueError("need 1 <= d <= n")
    if n > 6:
        raise ValueError("exhaustive enumeration is guarded to n <= 6")
    cap = [d] * n
    chosen = []
    out = []

    def rec(i):
        if i == n:
            out.append(RegularMatrix(np.array(chosen, dtype=np.int64), validate=False))
            return
        remaining = n - i
        candidates = [j for j in range(n) if cap[j] > 0]
        for combo in itertools.combinations(candidates, d):
            for j in combo:
                cap[j] -= 1
            if max(cap) <= remaining - 1:
                chosen.append(combo)
                rec(i + 1)
                chosen.pop()
            for j in combo:
                cap[j] += 1

    rec(0)
    return out


# --------------------------------------------------------------- multigraph


@dataclass(frozen=True)
class MultiGraphAdj:
    """Aggregated bipartite multigraph between matrix rows and columns.

    Entries are stored sparsely as (rows, cols, mult) sorted by (row, col).
    """

    n: int
    m: int
    d: int
    rows: np.ndarray
    cols: np.ndarray
    mult: np.ndarray

    @property
    def is_simple(self) -> bool:
        return bool(np.all(self.mult <= 1))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.m), dtype=np.int64)
        dense[self.rows, self.cols] = self.mult
        return dense

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Multiply the adjacency (with multiplicities) against column values."""
        out = np.zeros(self.n, dtype=np.complex128)
        np.add.at(out, self.rows, self.mult * np.asarray(values)[self.cols])
        return out

    def to_regular(self) -> RegularMatrix:
        if not self.is_simple:
            raise ValueError("multigraph has repeated edges")
        degrees = np.bincount(self.rows, weights=self.mult, minlength=self.n)
        if not np.all(degrees == self.d):
            raise ValueError("row degrees are not all d")
        order = np.lexsort((self.cols, self.rows))
        return RegularMatrix(self.cols[order].reshape(self.n, self.d))

    def block_degrees_ok(self, decomp: EllDecomposition, Q: np.ndarray) -> bool:
        """Row sums per part equal Q and every column has degree d."""
        labels = decomp.part_labels()
        block = np.zeros((self.n, decomp.m), dtype=np.int64)
        np.add.at(block, (self.rows, labels[self.cols]), self.mult)
        if not np.array_equal(block, np.asarray(Q)):
            return False
        col_deg = np.zeros(self.m, dtype=np.int64)
        np.add.at(col_deg, self.cols, self.mult)
        return bool(np.all(col_deg == self.d))


def _part_columns(decomp: EllDecomposition, q: int) -> np.ndarray:
    idx = np.concatenate([decomp.level_indices(r) for r in decomp.part_rows(q)])
    return np.sort(idx)


def _check_admissible(decomp: EllDecomposition, Q) -> np.ndarray:
    Q = np.asarray(Q)
    if Q.shape != (decomp.n, decomp.m):
        raise ValueError(f"Q must have shape {(decomp.n, decomp.m)}, got {Q.shape}")
    if not np.issubdtype(Q.dtype, np.integer):
        raise ValueError("Q must be integer-valued")
    if np.any(Q < 0):
        raise ValueError("Q must be nonnegative")
    col_sums = Q.sum(axis=0)
    want = decomp.d * decomp.part_sizes
    if not np.array_equal(col_sums, want):
        raise ValueError(f"part column sums {col_sums} != d * part sizes {want}")
    return Q.astype(np.int64, copy=False)


def sample_multigraph(decomp: EllDecomposition, Q, seed) -> MultiGraphAdj:
    """Pair row stubs with uniformly permuted column stubs, part by part.

    Row stubs of part q are laid out lexicographically ((row, copy) pairs,
    Q_{iq} copies per row); column stubs are the part's columns with d copies
    each.  A uniform permutation of the column stubs defines the pairing, and
    multiplicities are aggregated into the adjacency.
    """
    Q = _check_admissible(decomp, Q)
    rng = _rng(seed)
    n, d = decomp.n, decomp.d
    row_chunks = []
    col_chunks = []
    for q in range(decomp.m):
        stub_rows = np.repeat(np.arange(n, dtype=np.int64), Q[:, q])
        col_stubs = np.repeat(_part_columns(decomp, q), d)
        row_chunks.append(stub_rows)
        col_chunks.append(col_stubs[rng.permutation(col_stubs.size)])
    rows_all = np.concatenate(row_chunks) if row_chunks else np.empty(0, np.int64)
    cols_all = np.concatenate(col_chunks) if col_chunks else np.empty(0, np.int64)
    key = rows_all * n + cols_all
    uniq, counts = np.unique(key, return_counts=True)
    return MultiGraphAdj(n, n, d, uniq // n, uniq % n, counts.astype(np.int64))


# ---------------------------------------------------------------- surrogate


@dataclass(frozen=True)
class SurrogateDraw:
    """Independent level-sum draws Z_i and the exact-count conditioning flag."""

    Z: np.ndarray
    exact_count_flag: bool


def level_value_vector(decomp: EllDecomposition) -> np.ndarray:
    """Complex value of each coordinate's level set (numerators over k)."""
    vals = np.empty(decomp.n, dtype=np.complex128)
    for r in range(decomp.ls_start.size):
        idx = decomp.level_indices(r)
        vals[idx] = complex(decomp.ls_re[r], decomp.ls_im[r]) / decomp.k
    return vals


def sample_Z(decomp: EllDecomposition, Q, K: RowMask, seed) -> SurrogateDraw:
    """Independent surrogate for the multigraph action on level values.

    Z_i sums, over parts q and each of the Q_{iq} row stubs, an independent
    level value drawn with probability proportional to the level's size.  The
    flag records whether every level received exactly d times its size across
    the part's whole stub pool — the event under which Z matches the
    multigraph law exactly.
    """
    Q = _check_admissible(decomp, Q)
    if K.n != decomp.n:
        raise ValueError("row mask size mismatch")
    rng = _rng(seed)
    n, d = decomp.n, decomp.d
    Z = np.zeros(n, dtype=np.complex128)
    exact = True
    for q in range(decomp.m):
        rows_ls = decomp.part_rows(q)
        sizes = decomp.ls_len[rows_ls].astype(np.int64)
        vals = np.array(
            [complex(decomp.ls_re[r], decomp.ls_im[r]) / decomp.k for r in rows_ls],
            dtype=np.complex128,
        )
        total = int(sizes.sum())
        xi = rng.choice(sizes.size, size=d * total, p=sizes / total)
        stub_rows = np.repeat(np.arange(n, dtype=np.int64), Q[:, q])
        np.add.at(Z, stub_rows, vals[xi])
        counts = np.bincount(xi, minlength=sizes.size)
        exact = exact and bool(np.all(counts == d * sizes))
    return SurrogateDraw(Z[K.rows], exact)


def simple_probability(count: int, n: int, d: int, Q: np.ndarray) -> float:
    """Exact pairing-model probability of drawing a simple matrix, given the
    number `count` of simple outcomes in the class: each one arises from
    prod_j d! column-stub orders times prod_{i,q} Q_{iq}! row-stub orders,
    out of prod_q (d |part_q|)! pairings."""
    Q = np.asarray(Q)
    per_matrix = math.factorial(d) ** n
    for v in Q.ravel():
        per_matrix *= math.factorial(int(v))
    total = 1
    for s in Q.sum(axis=0):
        total *= math.factorial(int(s))
    return count * per_matrix / total
