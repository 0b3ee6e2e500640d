"""Lattice vectors and their level-set decomposition.

A vector is snapped to the grid (Z + iZ)/k by coordinate-wise flooring
(`k_approx`).  `decompose` then splits [n] into ordered "parts": per step
j = 0, 1, ... every value still in play contributes a level set (the leftmost
2^j of its remaining occurrences, or all of them once fewer than 2^{j+1}
remain), and the values whose level sets are mutually at Euclidean distance
at least d/k are greedily collected into one *spread* part per step, the rest
into one *regular* part per step.  All spread parts precede all regular parts,
each kind ordered by step.

All value comparisons and distance tests are exact integer arithmetic on the
numerators; floating point appears only in `k_approx`'s input handling where
boundary cases are re-checked with rationals.

The decomposition is stored columnar (flat level-set and part tables over one
index buffer) so that million-coordinate vectors decompose in milliseconds;
`parts` materializes friendly objects on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple

import numpy as np
from numba import njit

__all__ = [
    "KVector",
    "LevelSet",
    "EllPart",
    "EllDecomposition",
    "OrderStats",
    "k_approx",
    "decompose",
    "decompose_stats",
    "approx_stats",
    "class_stats",
    "class_cardinality_log_bound",
]

_INT64_SAFE = 1 << 62


class KVector:
    """A vector with coordinates in (Z + iZ)/k, stored as integer numerators.

    `re_num` / `im_num` are int64 arrays (or object arrays of Python ints when
    the numerators would overflow int64).
    """

    __slots__ = ("k", "re_num", "im_num")

    def __init__(self, k: int, re_num, im_num=None):
        if k < 1 or k != int(k):
            raise ValueError("k must be a positive integer")
        self.k = int(k)
        re_arr = self._coerce(re_num)
        im_arr = self._coerce(np.zeros(re_arr.size, dtype=np.int64) if im_num is None else im_num)
        if re_arr.shape != im_arr.shape:
            raise ValueError("re_num and im_num must have equal length")
        if re_arr.size == 0:
            raise ValueError("empty vector")
        self.re_num = re_arr
        self.im_num = im_arr

    @staticmethod
    def _coerce(arr) -> np.ndarray:
        a = np.asarray(arr)
        if a.dtype == object:
            out = a.reshape(-1)
        else:
            out = a.astype(np.int64, copy=True).reshape(-1)
            if not np.array_equal(out, np.asarray(a).reshape(-1)):
                raise ValueError("numerators must be integers")
        out.flags.writeable = False
        return out

    @property
    def n(self) -> int:
        return int(self.re_num.size)

    @property
    def is_real(self) -> bool:
        return not np.any(self.im_num)

    def to_complex(self) -> np.ndarray:
        return (self.re_num.astype(np.float64) + 1j * self.im_num.astype(np.float64)) / self.k

    def __repr__(self) -> str:
        return f"KVector(n={self.n}, k={self.k})"


@njit(cache=True)
def _floor_scaled_kernel(x: np.ndarray, kf: float):
    """floor(kf * x) per coordinate, flagging floats near an integer boundary."""
    n = x.size
    out = np.empty(n, dtype=np.int64)
    suspicious = np.empty(n, dtype=np.int64)
    ns = 0
    for i in range(n):
        t = x[i] * kf
        ft = np.floor(t)
        frac = t - ft
        near = frac if frac < 0.5 else 1.0 - frac
        # one rounded multiply is off by at most ulp(t)/2 <= eps*|t|/2, so
        # anything further than that from an integer floors correctly
        if near <= 2.0 * 2.220446049250313e-16 * abs(t) + 1e-12:
            suspicious[ns] = i
            ns += 1
        out[i] = np.int64(ft)
    return out, suspicious[:ns]


def _exact_floor_scalar(x: float, k: int) -> int:
    """floor(k*x) with exact integer arithmetic (x = mant * 2^exp exactly)."""
    mant, exp = math.frexp(x)
    int_mant = int(mant * 9007199254740992.0)  # mant * 2^53, exact
    shift = exp - 53
    if shift >= 0:
        return (k * int_mant) << shift
    # arithmetic right shift floors toward -inf, matching floor division
    return (k * int_mant) >> -shift


def _floor_times_k(x: np.ndarray, k: int) -> np.ndarray:
    """Exact componentwise floor(k*x) for a float array.

    The single rounded multiply is trusted except within a few ulps of an
    integer, where the floor is recomputed with exact rationals.
    """
    out, suspicious = _floor_scaled_kernel(x, float(k))
    for i in suspicious:
        out[i] = _exact_floor_scalar(float(x[i]), k)
    return out


def k_approx(x, k: int) -> KVector:
    """Snap `x` to the grid (Z + iZ)/k: Re y = floor(k Re x)/k, Im likewise.

    The result is within sqrt(2)/k of `x` in every coordinate.
    """
    if k < 1 or k != int(k):
        raise ValueError("k must be a positive integer")
    k = int(k)
    x = np.asarray(x)
    re = np.ascontiguousarray(x.real, dtype=np.float64)
    im = np.ascontiguousarray(x.imag, dtype=np.float64) if np.iscomplexobj(x) else None
    bound = float(max(np.max(np.abs(re)) if re.size else 0.0, np.max(np.abs(im)) if im is not None else 0.0))
    if not np.isfinite(bound):
        raise ValueError("coordinates must be finite")
    if k * (bound + 2.0) >= _INT64_SAFE:
        re_num = np.array([math.floor(Fraction(float(v)) * k) for v in re], dtype=object)
        im_num = (
            np.array([math.floor(Fraction(float(v)) * k) for v in im], dtype=object)
            if im is not None
            else None
        )
    else:
        re_num = _floor_times_k(re, k)
        im_num = _floor_times_k(im, k) if im is not None else None
    y = KVector(k, re_num, im_num)
    err_re = re - y.re_num.astype(np.float64) / k
    err_im = (im - y.im_num.astype(np.float64) / k) if im is not None else 0.0
    assert np.max(err_re**2 + np.square(err_im)) <= 2.0 / k**2 + 1e-9
    return y


@dataclass(frozen=True)
class LevelSet:
    """All remaining occurrences of one grid value taken at one step."""

    k: int
    order: int
    re_num: int
    im_num: int
    indices: np.ndarray

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def value(self) -> complex:
        return complex(self.re_num / self.k, self.im_num / self.k)


@dataclass(frozen=True)
class EllPart:
    """One part: the level sets of its step, either spread or regular.

    Level sets are ordered by strictly decreasing value (lexicographically on
    (Re, Im)).  The height is the number of level sets.
    """

    order: int
    kind: str  # "spread" | "regular"
    level_sets: tuple

    @property
    def height(self) -> int:
        return len(self.level_sets)

    @property
    def size(self) -> int:
        return sum(ls.size for ls in self.level_sets)

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([ls.indices for ls in self.level_sets])


class OrderStats(NamedTuple):
    """Per-step class statistics: part cardinalities and heights by kind."""

    order: int
    cs: int  # cardinality of the spread part (0 if none)
    cr: int  # cardinality of the regular part
    hs: int  # height of the spread part
    hr: int  # height of the regular part


def _lex_nondecreasing(re: np.ndarray, im: np.ndarray) -> bool:
    if re.size < 2:
        return True
    if np.any(re[1:] < re[:-1]):
        return False
    ties = re[1:] == re[:-1]
    return not np.any(ties & (im[1:] < im[:-1]))


@njit(cache=True)
def _greedy_separated_1d(vals: np.ndarray, gap: int):
    """Greedy pick of d/k-separated values from a strictly descending list.

    Picks the first value, then every value at distance >= gap below the last
    pick.  Returns the pick mask and pick count.
    """
    m = vals.size
    picked = np.zeros(m, dtype=np.bool_)
    picked[0] = True
    last = vals[0]
    count = 1
    for t in range(1, m):
        if last - vals[t] >= gap:
            picked[t] = True
            last = vals[t]
            count += 1
    return picked, count


def _convex_hull(pts: list) -> list:
    """Andrew monotone chain over integer points (lex-sorted input not required)."""
    pts = sorted(set(pts))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _greedy_separated_2d(re_desc, im_desc, gap: int):
    """Exact 2-d analogue of the 1-d greedy, on lex-descending values.

    The first pick is the lex-largest value whose farthest partner is at
    distance >= gap (farthest distances are checked against convex hull
    vertices); later picks are the lex-largest values at distance >= gap from
    everything already picked, located with a gap-sized grid so each candidate
    only checks nearby picks.  All arithmetic is on Python integers.
    """
    m = len(re_desc)
    picked = np.zeros(m, dtype=np.bool_)
    pts = [(int(re_desc[t]), int(im_desc[t])) for t in range(m)]
    gap2 = gap * gap
    hull = _convex_hull(pts)
    diam2 = max(
        ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 for a in hull for b in hull),
        default=0,
    )
    if diam2 < gap2:
        return picked, 0
    start = -1
    for t in range(m):
        p = pts[t]
        if any((p[0] - h[0]) ** 2 + (p[1] - h[1]) ** 2 >= gap2 for h in hull):
            start = t
            break
    assert start >= 0  # diameter >= gap guarantees a first pick exists
    cells: dict = {}

    def scaled(p):
        return (p[0] // gap, p[1] // gap)

    def far_from_picked(p) -> bool:
        cx, cy = scaled(p)
        for ax in (cx - 1, cx, cx + 1):
            for ay in (cy - 1, cy, cy + 1):
                for q in cells.get((ax, ay), ()):
                    if (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 < gap2:
                        return False
        return True

    count = 0
    for t in range(start, m):
        p = pts[t]
        if count and not far_from_picked(p):
            continue
        picked[t] = True
        count += 1
        cells.setdefault(scaled(p), []).append(p)
    # the first pick has a partner at distance >= gap, so that partner (or a
    # closer earlier pick) is always selected too
    assert count >= 2
    return picked, count


class EllDecomposition:
    """The ordered parts of one decomposed lattice vector.

    Stored columnar: `index_buffer` holds the n original indices; every level
    set is a (start, length) slice of it.  Level-set rows are grouped by part,
    parts in final order (spread parts by step, then regular parts by step),
    and within a part rows are sorted by strictly decreasing value.
    """

    def __init__(
        self,
        k: int,
        d: int,
        n: int,
        index_buffer: np.ndarray,
        ls_part: np.ndarray,
        ls_order: np.ndarray,
        ls_re: np.ndarray,
        ls_im: np.ndarray,
        ls_start: np.ndarray,
        ls_len: np.ndarray,
        part_kind_spread: np.ndarray,
        part_order: np.ndarray,
    ):
        self.k, self.d, self.n = int(k), int(d), int(n)
        self.index_buffer = index_buffer
        self.ls_part = ls_part
        self.ls_order = ls_order
        self.ls_re = ls_re
        self.ls_im = ls_im
        self.ls_start = ls_start
        self.ls_len = ls_len
        self.part_is_spread = part_kind_spread
        self.part_order = part_order

    @property
    def m(self) -> int:
        """Number of parts."""
        return int(self.part_order.size)

    @cached_property
    def part_heights(self) -> np.ndarray:
        return np.bincount(self.ls_part, minlength=self.m).astype(np.int64)

    @cached_property
    def part_sizes(self) -> np.ndarray:
        return np.bincount(self.ls_part, weights=self.ls_len, minlength=self.m).astype(np.int64)

    @property
    def spread_total(self) -> int:
        """Total number of coordinates covered by spread parts."""
        return int(self.part_sizes[self.part_is_spread].sum())

    def level_indices(self, row: int) -> np.ndarray:
        s, ln = int(self.ls_start[row]), int(self.ls_len[row])
        return self.index_buffer[s : s + ln]

    def part_rows(self, q: int) -> np.ndarray:
        """Level-set row ids of part q, in stored (value-descending) order."""
        return np.flatnonzero(self.ls_part == q)

    def part_labels(self) -> np.ndarray:
        """(n,) array mapping each original coordinate to its part id."""
        order = np.argsort(self.ls_start, kind="stable")
        buf_part = np.repeat(self.ls_part[order], self.ls_len[order])
        labels = np.empty(self.n, dtype=np.int64)
        labels[self.index_buffer] = buf_part
        return labels

    @cached_property
    def parts(self) -> tuple:
        out = []
        for q in range(self.m):
            rows = self.part_rows(q)
            levels = tuple(
                LevelSet(
                    self.k,
                    int(self.ls_order[r]),
                    int(self.ls_re[r]),
                    int(self.ls_im[r]),
                    np.sort(self.level_indices(r)),
                )
                for r in rows
            )
            kind = "spread" if self.part_is_spread[q] else "regular"
            out.append(EllPart(int(self.part_order[q]), kind, levels))
        return tuple(out)

    def to_json_obj(self) -> dict:
        """JSON-ready dict; indices are 1-based on the wire."""
        parts = []
        for q in range(self.m):
            rows = self.part_rows(q)
            parts.append(
                {
                    "kind": "spread" if self.part_is_spread[q] else "regular",
                    "order": int(self.part_order[q]),
                    "levels": [
                        {
                            "re_num": int(self.ls_re[r]),
                            "im_num": int(self.ls_im[r]),
                            "indices": (np.sort(self.level_indices(r)) + 1).tolist(),
                        }
                        for r in rows
                    ],
                }
            )
        return {"k": self.k, "d": self.d, "n": self.n, "parts": parts}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EllDecomposition":
        parts = [
            (
                p["kind"],
                p["order"],
                [
                    (lv["re_num"], lv["im_num"], [i - 1 for i in lv["indices"]])
                    for lv in p["levels"]
                ],
            )
            for p in obj["parts"]
        ]
        return cls.from_parts(obj["k"], obj["d"], obj["n"], parts)

    @classmethod
    def from_parts(cls, k: int, d: int, n: int, parts) -> "EllDecomposition":
        """Build from explicit parts, validating the structural invariants.

        `parts` is a sequence of (kind, order, levels) in final order, each
        level a (re_num, im_num, indices) triple with 0-based indices.  This
        checks the type invariants (partition, level-set size windows, value
        ordering, spread separation and height), not that the parts equal the
        canonical construction for some vector.
        """
        seen = np.zeros(n, dtype=bool)
        buf, ls_rows = [], []
        part_spread, part_order = [], []
        offset = 0
        last_kind_regular = False
        prev_order = {"spread": -1, "regular": -1}
        for q, (kind, order, levels) in enumerate(parts):
            if kind not in ("spread", "regular"):
                raise ValueError(f"bad part kind {kind!r}")
            if kind == "spread" and last_kind_regular:
                raise ValueError("spread parts must precede regular parts")
            last_kind_regular = kind == "regular"
            if order <= prev_order[kind]:
                raise ValueError("parts of one kind must have increasing order")
            prev_order[kind] = order
            if not levels:
                raise ValueError("empty part")
            if kind == "spread" and len(levels) < 2:
                raise ValueError("spread parts need at least two level sets")
            vals = [(int(re), int(im)) for re, im, _ in levels]
            if any(vals[t] <= vals[t + 1] for t in range(len(vals) - 1)):
                raise ValueError("level sets within a part must have strictly decreasing values")
            if kind == "spread":
                gap2 = d * d
                for a in range(len(vals)):
                    for b in range(a + 1, len(vals)):
                        dist2 = (vals[a][0] - vals[b][0]) ** 2 + (vals[a][1] - vals[b][1]) ** 2
                        if dist2 < gap2:
                            raise ValueError("spread level values closer than d/k")
            for re, im, idx in levels:
                idx = np.sort(np.asarray(idx, dtype=np.int64))
                if idx.size == 0:
                    raise ValueError("empty level set")
                if not (2 ** (order - 1) <= idx.size < 2 ** (order + 1)):
                    raise ValueError(
                        f"level-set size {idx.size} outside [2^{order - 1}, 2^{order + 1}) at order {order}"
                    )
                if idx[0] < 0 or idx[-1] >= n or np.any(seen[idx]):
                    raise ValueError("indices must partition [0, n)")
                seen[idx] = True
                ls_rows.append((q, order, int(re), int(im), offset, idx.size))
                buf.append(idx)
                offset += idx.size
            part_spread.append(kind == "spread")
            part_order.append(order)
        if not bool(seen.all()):
            raise ValueError("parts do not cover [0, n)")
        rows = np.array(ls_rows, dtype=np.int64).reshape(-1, 6)
        return cls(
            k,
            d,
            n,
            np.concatenate(buf),
            rows[:, 0].copy(),
            rows[:, 1].copy(),
            rows[:, 2].copy(),
            rows[:, 3].copy(),
            rows[:, 4].copy(),
            rows[:, 5].copy(),
            np.array(part_spread, dtype=bool),
            np.array(part_order, dtype=np.int64),
        )


def _value_sort_order(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    if re.dtype == object:
        keys = sorted(range(re.size), key=lambda i: (re[i], im[i]))
        return np.array(keys, dtype=np.int64)
    if _lex_nondecreasing(re, im):
        return np.arange(re.size, dtype=np.int64)
    return np.lexsort((im, re))  # stable: ties stay in ascending index order


def _grouped_values(y: KVector):
    """Sort by value and return (order, group starts, counts, values)."""
    n = y.n
    re, im = y.re_num, y.im_num
    order = _value_sort_order(re, im)
    re_s, im_s = re[order], im[order]
    if re.dtype == object:
        change = np.array(
            [t for t in range(1, n) if re_s[t] != re_s[t - 1] or im_s[t] != im_s[t - 1]],
            dtype=np.int64,
        )
    else:
        change = 1 + np.flatnonzero((re_s[1:] != re_s[:-1]) | (im_s[1:] != im_s[:-1]))
    g_start = np.concatenate(([0], change)).astype(np.int64)
    counts = np.diff(np.concatenate((g_start, [n]))).astype(np.int64)
    is_real = (not np.any(im_s)) if im_s.dtype != object else all(v == 0 for v in im_s)
    return order, g_start, counts, re_s[g_start], im_s[g_start], is_real


def _schedule_depth(counts: np.ndarray) -> np.ndarray:
    """Largest full step u per value: sizes run 2^0..2^u plus one residual."""
    m_arr = (counts + 1) // 3
    return np.where(m_arr >= 1, np.frexp(m_arr.astype(np.float64))[1] - 1, -1).astype(np.int64)


def decompose(y: KVector, d: int) -> EllDecomposition:
    """Canonical level-set decomposition of `y` with separation scale d/k.

    Deterministic: the leftmost rule and the lexicographic greedy remove all
    ties, so equal inputs give bit-equal outputs.
    """
    if d < 1 or d != int(d):
        raise ValueError("d must be a positive integer")
    d = int(d)
    n = y.n
    order, g_start, counts, g_re, g_im, is_real = _grouped_values(y)
    G = g_start.size

    u = _schedule_depth(counts)
    n_steps = u + 2
    total_rows = int(n_steps.sum())
    row_g = np.repeat(np.arange(G, dtype=np.int64), n_steps)
    row_offsets = np.concatenate(([0], np.cumsum(n_steps)))[:-1]
    row_step = np.arange(total_rows, dtype=np.int64) - row_offsets[row_g]
    pow2 = np.int64(1) << row_step
    row_len = np.where(row_step <= u[row_g], pow2, counts[row_g] - (np.int64(1) << (u[row_g] + 1)) + 1)
    row_start = g_start[row_g] + pow2 - 1

    max_step = int(n_steps.max())
    spread_parts: list = []  # (step, level-set rows in value-descending order)
    regular_parts: list = []
    last_step_of_group = n_steps - 1
    for j in range(max_step):
        cand = np.flatnonzero(last_step_of_group >= j)  # ascending value order
        cand_desc = cand[::-1]
        rows_desc = row_offsets[cand_desc] + j
        if cand.size >= 2:
            if is_real and g_re.dtype != object:
                picked_desc, cnt = _greedy_separated_1d(g_re[cand_desc], d)
            else:
                picked_desc, cnt = _greedy_separated_2d(g_re[cand_desc], g_im[cand_desc], d)
        else:
            picked_desc, cnt = np.zeros(cand.size, dtype=bool), 0
        # cnt == 1 can only come from the 1-d greedy and means the diameter is
        # below the gap, i.e. no first pick exists and the step has no spread part
        if cnt >= 2:
            spread_parts.append((j, rows_desc[picked_desc]))
            rest = rows_desc[~picked_desc]
        else:
            rest = rows_desc
        if rest.size:
            regular_parts.append((j, rest))

    part_rows, part_spread, part_order = [], [], []
    for is_sp, bucket in ((True, spread_parts), (False, regular_parts)):
        for j, rows in bucket:
            part_rows.append(rows)
            part_spread.append(is_sp)
            part_order.append(j)

    final_rows = np.concatenate(part_rows) if part_rows else np.empty(0, dtype=np.int64)
    ls_part = np.repeat(
        np.arange(len(part_rows), dtype=np.int64),
        [r.size for r in part_rows],
    )
    dec = EllDecomposition(
        y.k,
        d,
        n,
        order,
        ls_part,
        row_step[final_rows],
        g_re[row_g[final_rows]],
        g_im[row_g[final_rows]],
        row_start[final_rows],
        row_len[final_rows],
        np.array(part_spread, dtype=bool),
        np.array(part_order, dtype=np.int64),
    )
    assert dec.m <= 3.0 * math.log(max(n, 2)) + 4.0
    return dec


def _step_stats(g_re, g_im, counts: np.ndarray, d: int, is_real: bool) -> list:
    """Per-step aggregates straight from the value groups (no index tables)."""
    G = int(counts.size)
    if is_real and g_re.dtype != object and counts[0] == 1 and np.all(counts == 1):
        # every value occurs once: a single step of unit level sets
        picked, cnt = _greedy_separated_1d(g_re[::-1], d)
        if cnt >= 2:
            return [OrderStats(0, cnt, G - cnt, cnt, G - cnt)]
        return [OrderStats(0, 0, G, 0, G)]
    u = _schedule_depth(counts)
    max_step = int(u.max()) + 2
    rows = []
    for j in range(max_step):
        cand = np.flatnonzero(u >= j - 1)  # ascending value order
        cand_desc = cand[::-1]
        if cand.size >= 2:
            if is_real and g_re.dtype != object:
                picked_desc, cnt = _greedy_separated_1d(g_re[cand_desc], d)
            else:
                picked_desc, cnt = _greedy_separated_2d(g_re[cand_desc], g_im[cand_desc], d)
        else:
            picked_desc, cnt = np.zeros(cand.size, dtype=bool), 0
        uc = u[cand]
        sz = np.where(
            j <= uc,
            np.int64(1) << np.int64(j),
            counts[cand] - (np.int64(1) << (uc + 1)) + 1,
        )
        total = int(sz.sum())
        if cnt >= 2:
            cs, hs = int(sz[picked_desc[::-1]].sum()), cnt
        else:
            cs, hs = 0, 0
        rows.append(OrderStats(j, cs, total - cs, hs, int(cand.size) - hs))
    return rows


def decompose_stats(y: KVector, d: int) -> list:
    """Class statistics of the canonical decomposition, without building it.

    Equals class_stats(decompose(y, d)) but does only the value grouping and
    the per-step greedy, skipping all index bookkeeping.
    """
    if d < 1 or d != int(d):
        raise ValueError("d must be a positive integer")
    _, _, counts, g_re, g_im, is_real = _grouped_values(y)
    return _step_stats(g_re, g_im, counts, int(d), is_real)


def approx_stats(x, k: int, d: int) -> list:
    """Class statistics of the canonical decomposition of k_approx(x, k).

    For real input this floors, groups and aggregates in a few vectorized
    passes (sorting copies of the values only when they do not already come
    sorted); complex or numerically oversized input falls back to the generic
    route.  Statistics are permutation-invariant, so sorting loses nothing.
    """
    if k < 1 or k != int(k):
        raise ValueError("k must be a positive integer")
    k, d = int(k), int(d)
    x = np.asarray(x)
    if (np.iscomplexobj(x) and np.any(x.imag)) or x.size == 0:
        return decompose_stats(k_approx(x, k), d)
    re = np.ascontiguousarray(x.real if np.iscomplexobj(x) else x, dtype=np.float64)
    bound = float(np.max(np.abs(re)))
    if not np.isfinite(bound):
        raise ValueError("coordinates must be finite")
    if k * (bound + 2.0) >= _INT64_SAFE:
        return decompose_stats(k_approx(x, k), d)
    xs = re if np.all(re[1:] >= re[:-1]) else np.sort(re)
    nums = _floor_times_k(xs, k)  # non-decreasing since flooring is monotone
    change = nums[1:] != nums[:-1]
    if bool(np.all(change)):
        return _step_stats(nums, None, np.ones(nums.size, dtype=np.int64), d, True)
    starts = np.concatenate(([0], 1 + np.flatnonzero(change)))
    counts = np.diff(np.concatenate((starts, [nums.size]))).astype(np.int64)
    return _step_stats(nums[starts], None, counts, d, True)


def class_stats(decomp: EllDecomposition) -> list:
    """Per-step quadruples (cs, cr, hs, hr): spread/regular cardinality and height."""
    if decomp.m == 0:
        return []
    max_order = int(decomp.part_order.max())
    sizes = decomp.part_sizes
    heights = decomp.part_heights
    table = {}
    for q in range(decomp.m):
        j = int(decomp.part_order[q])
        row = table.setdefault(j, [0, 0, 0, 0])
        if decomp.part_is_spread[q]:
            row[0], row[2] = int(sizes[q]), int(heights[q])
        else:
            row[1], row[3] = int(sizes[q]), int(heights[q])
    return [
        OrderStats(j, *table.get(j, [0, 0, 0, 0]))
        for j in range(max_order + 1)
    ]


def class_cardinality_log_bound(stats, n: int) -> float:
    """log of n! * prod_j hs^cs * hr^cr / (cs! * cr!), with 0^0 = 1.

    Bounds how many vectors share one class signature; computed with
    log-gamma so astronomically large values stay finite.
    """
    total = 0
    for row in stats:
        total += row.cs + row.cr
        if (row.cs > 0) != (row.hs > 0) or (row.cr > 0) != (row.hr > 0):
            raise ValueError("cardinality and height must be zero together")
    if total != n:
        raise ValueError(f"stats cover {total} coordinates, expected {n}")
    out = math.lgamma(n + 1)
    for row in stats:
        if row.cs:
            out += row.cs * math.log(row.hs) - math.lgamma(row.cs + 1)
        if row.cr:
            out += row.cr * math.log(row.hr) - math.lgamma(row.cr + 1)
    return out
