"""Scale parameters and the steep / almost-constant / gradual vector taxonomy.

The classification looks at the non-increasing rearrangement x* of |x| through
a ladder of scale indices derived from (n, d, L):

- very steep vectors (``T3``) carry essentially all mass on a few coordinates;
- jump vectors (``T0`` at some level) drop by a factor 4d between consecutive
  scale ranks p^i;
- ``T1`` / ``T2`` drop by d^(3/2) across the wider windows (n1, n2) and
  (n2, n3);
- almost-constant vectors sit within a radius-theta tube around one complex
  value on all but fewer than n3 coordinates;
- everything else is *gradual*: its profile decays slowly and spreads over
  many levels, which is what the kernel experiments quantify.

All decisions are cheap rank comparisons; the only search is the
almost-constant witness, which verifies exact coordinate counts for a small
candidate list (see `almost_constant_witness` for the completeness radius).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

__all__ = [
    "InvalidWindow",
    "TaxonomyParams",
    "TaxVerdict",
    "ACWitness",
    "DichotomyVerdict",
    "derive_params",
    "rearrangement",
    "classify",
    "weak13_norm",
    "almost_constant_witness",
    "split_shifted",
    "decay_check",
    "many_levels_verdict",
    "max_ball_counts",
    "read_vector_csv",
    "write_vector_csv",
]

_SLACK = 1e-9


class InvalidWindow(ValueError):
    """The (n, d, L) triple admits no valid parameter ladder."""


@dataclass(frozen=True)
class TaxonomyParams:
    """Derived scale parameters; see `derive_params` for the formulas.

    `window_notes` lists soft violations of the asymptotic regime (desk-scale
    inputs routinely break the idealized ordering without invalidating any of
    the finite computations here).
    """

    n: int
    d: int
    L: int
    a3: Fraction
    eps0: float
    p: int
    r: int
    r0: int
    n0: int
    n1: int
    n2: int
    n3: int
    theta0: float
    window_notes: tuple = ()

    @property
    def p_r0(self) -> int:
        return self.p**self.r0

    def describe(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "L": self.L,
            "a3": str(self.a3),
            "eps0": self.eps0,
            "p": self.p,
            "r": self.r,
            "r0": self.r0,
            "n0": self.n0,
            "n1": self.n1,
            "n2": self.n2,
            "n3": self.n3,
            "theta0": self.theta0,
            "window_notes": list(self.window_notes),
        }


def _ceil_n_over_d32(n: int, d: int) -> int:
    """Exact ceil(n / d^(3/2)): smallest q with q^2 d^3 >= n^2."""
    target = n * n
    q = math.isqrt(target // (d**3))
    while q * q * d**3 < target:
        q += 1
    return q


def _floor_n_over_d23(n: int, d: int) -> int:
    """Exact floor(n / d^(2/3)): largest q with q^3 d^2 <= n^3."""
    q = int(n / d ** (2.0 / 3.0))
    while (q + 1) ** 3 * d * d <= n**3:
        q += 1
    while q > 0 and q**3 * d * d > n**3:
        q -= 1
    return q


def derive_params(
    n: int,
    d: int,
    L: int = 1,
    overrides: Optional[dict] = None,
    strict: bool = False,
) -> TaxonomyParams:
    """Compute the scale ladder for (n, d, L).

    eps0 = sqrt(ln d / d); p = floor(p_factor * sqrt(d / ln d)) with the
    standard p_factor = 1/5; r is the largest power with p^r < n1; r0 the
    smallest with p^r0 >= 20 L / d; n0 = floor(n/16d), n1 = ceil(n/d^1.5),
    n2 = floor(n/d^(2/3)), n3 = floor(a3 n), theta0 = 10/d^3.

    `overrides` may set `a3` (fraction of n for the tail anchor) and
    `p_factor`.  With `strict=True` the idealized window (n >= d^3,
    L <= n/d^3, monotone ladder) is enforced as an error instead of being
    recorded in `window_notes`.
    """
    overrides = dict(overrides or {})
    a3 = Fraction(overrides.pop("a3", Fraction(1, 1200))).limit_denominator(10**12)
    p_factor = float(overrides.pop("p_factor", 0.2))
    if overrides:
        raise ValueError(f"unknown overrides: {sorted(overrides)}")
    if d < 3:
        raise InvalidWindow(f"need d >= 3, got {d}")
    if L < 1:
        raise InvalidWindow(f"need L >= 1, got {L}")
    if n < 2:
        raise InvalidWindow(f"need n >= 2, got {n}")
    if not (0 < a3 <= 1):
        raise ValueError("a3 must lie in (0, 1]")

    notes = []
    if n < d**3:
        notes.append("n < d^3")
    if L * d**3 > n:
        notes.append("L > n/d^3")
    if strict and notes:
        raise InvalidWindow("; ".join(notes))

    eps0 = math.sqrt(math.log(d) / d)
    p = math.floor(p_factor * math.sqrt(d / math.log(d)))
    if p < 2:
        raise InvalidWindow(f"scale factor p = {p} < 2 (d too small for p_factor {p_factor})")

    n1 = _ceil_n_over_d32(n, d)
    n2 = _floor_n_over_d23(n, d)
    n3 = int(a3 * n)  # floor: Fraction * int then int() truncates toward zero (positive)
    n0 = n // (16 * d)
    theta0 = 10.0 / d**3

    if n3 < 1:
        raise InvalidWindow(f"n3 = floor(a3 n) = {n3} < 1; increase n or a3")
    if n1 < 2:
        raise InvalidWindow(f"n1 = {n1} < 2 leaves no room for scale powers")

    r = 0
    while p ** (r + 1) < n1:
        r += 1
    # r is now the largest exponent with p^r < n1
    threshold = Fraction(20 * L, d)
    r0 = 0
    while p**r0 < threshold:
        r0 += 1
    if not (0 <= r0 < r):
        raise InvalidWindow(f"need r0 < r, got r0={r0}, r={r}")
    if n0 < 1:
        notes.append("n0 = 0")
    for name, lo, hi in (("n0 < n1", n0, n1), ("n1 < n2", n1, n2), ("n2 < n3", n2, n3)):
        if not lo < hi:
            notes.append(f"not {name}")
    if not n3 < n:
        notes.append("not n3 < n")
    if strict and notes:
        raise InvalidWindow("; ".join(notes))
    return TaxonomyParams(
        n=n,
        d=d,
        L=L,
        a3=a3,
        eps0=eps0,
        p=p,
        r=r,
        r0=r0,
        n0=n0,
        n1=n1,
        n2=n2,
        n3=n3,
        theta0=theta0,
        window_notes=tuple(notes),
    )


def _as_complex_vector(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a nonempty 1-d vector")
    return arr.astype(np.complex128, copy=False)


def rearrangement(x):
    """(x*, x#, perm): magnitudes sorted down, values sorted lex down.

    x* is the non-increasing rearrangement of |x|.  x# sorts the values
    themselves, largest first in the lexicographic order on (Re, Im), and
    perm is the index permutation with x# = x[perm].
    """
    arr = _as_complex_vector(x)
    mags = np.abs(arr)
    xstar = np.sort(mags)[::-1]
    perm = np.lexsort((-arr.imag, -arr.real))
    return xstar, arr[perm], perm


def _xstar(x: np.ndarray) -> np.ndarray:
    """Non-increasing |x| profile, reusing pre-sorted input when possible."""
    if not np.iscomplexobj(x):
        real = np.asarray(x, dtype=np.float64)
        if np.all(real[1:] >= real[:-1]):
            if real[0] >= 0.0:
                return real[::-1]
            if real[-1] <= 0.0:
                return -real
        elif np.all(real[1:] <= real[:-1]):
            if real[-1] >= 0.0:
                return real
            if real[0] <= 0.0:
                return -real[::-1]
        return np.sort(np.abs(real))[::-1]
    return np.sort(np.abs(x))[::-1]


@dataclass(frozen=True)
class ACWitness:
    """A verified almost-constant witness: the center and the coordinates
    within radius of it."""

    lambda0: complex
    indices: np.ndarray
    radius: float
    count: int


@dataclass(frozen=True)
class TaxVerdict:
    steep_class: str  # "T3" | "T0" | "T1" | "T2" | "none"
    t0_level: Optional[int]
    almost_constant: bool
    lambda0: Optional[complex]
    gradual: bool
    normalized: bool  # x*_{n3} == 1 up to float tolerance
    degenerate_tail: bool  # x*_{n3} == 0: steep by convention

    @property
    def label(self) -> str:
        if self.steep_class == "T0":
            return f"T0({self.t0_level})"
        return self.steep_class

    def to_json_obj(self) -> dict:
        return {
            "steep_class": self.steep_class,
            "t0_level": self.t0_level,
            "almost_constant": self.almost_constant,
            "lambda0": None
            if self.lambda0 is None
            else [self.lambda0.real, self.lambda0.imag],
            "gradual": self.gradual,
            "normalized": self.normalized,
            "degenerate_tail": self.degenerate_tail,
        }


def _steep_label(xstar: np.ndarray, P: TaxonomyParams):
    """Steep subclass by the definitional precedence chain, or ("none", None)."""
    n = P.n
    pr0 = P.p_r0
    # very steep: some rank i <= p^r0 towers above rank p^r0 by (n/i)^3
    head = xstar[:pr0]
    ranks = np.arange(1, pr0 + 1, dtype=np.float64)
    if np.any(head > (n / ranks) ** 3 * xstar[pr0 - 1]):
        return "T3", None
    # jump classes: drop by 4d between consecutive scale ranks
    for lvl in range(P.r0, P.r):
        if xstar[P.p**lvl - 1] > 4.0 * P.d * xstar[P.p ** (lvl + 1) - 1]:
            return "T0", lvl
    top = -(-P.n1 // P.p)  # ceil(n1 / p)
    if xstar[top - 1] > 4.0 * P.d * xstar[P.n1 - 1]:
        return "T0", P.r
    if xstar[P.n1 - 1] > P.d**1.5 * xstar[P.n2 - 1]:
        return "T1", None
    if xstar[P.n2 - 1] > P.d**1.5 * xstar[P.n3 - 1]:
        return "T2", None
    return "none", None


def classify(x, P: TaxonomyParams, witness: Optional[ACWitness] = None) -> TaxVerdict:
    """Full taxonomy verdict for `x`.

    `witness` short-circuits the almost-constant search when the caller has
    already run `almost_constant_witness(x, P.theta0, P)`.
    """
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size != P.n:
        raise ValueError(f"expected a vector of length {P.n}")
    xstar = _xstar(arr)
    if xstar[0] == 0.0:
        raise ValueError("cannot classify the zero vector")
    tail = float(xstar[P.n3 - 1])
    if tail == 0.0:
        # all mass on fewer than n3 coordinates: steep by convention
        return TaxVerdict("T3", None, False, None, False, False, True)
    steep, lvl = _steep_label(xstar, P)
    if witness is None:
        witness = almost_constant_witness(x, P.theta0, P, _xstar_hint=xstar)
    ac = witness is not None
    gradual = steep == "none" and not ac
    normalized = abs(tail - 1.0) <= _SLACK
    return TaxVerdict(
        steep,
        lvl,
        ac,
        witness.lambda0 if ac else None,
        gradual,
        normalized,
        False,
    )


def weak13_norm(x, m: int) -> float:
    """sup over ranks i <= m of i^3 x*_i / n^3 (a weak-type sparseness gauge).

    A vector is very steep exactly when some m-sparse vector approximates it
    within this norm in sup distance, m = p^r0 - 1; equivalently, when
    x*_{m+1} is below it.
    """
    arr = _as_complex_vector(x)
    n = arr.size
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}")
    xstar = _xstar(np.asarray(x))
    ranks = np.arange(1, m + 1, dtype=np.float64)
    return float(np.max(ranks**3 * xstar[:m]) / n**3)


def _ball_counts_real(vals_sorted: np.ndarray, centers: np.ndarray, radius: float) -> np.ndarray:
    lo = np.searchsorted(vals_sorted, centers - radius, side="left")
    hi = np.searchsorted(vals_sorted, centers + radius, side="right")
    return hi - lo


def almost_constant_witness(
    x,
    theta: float,
    P: TaxonomyParams,
    _xstar_hint: Optional[np.ndarray] = None,
) -> Optional[ACWitness]:
    """A verified center lambda0 with more than n - n3 coordinates of `x`
    within radius theta * x*_{n3}, if the search finds one.

    Every returned witness is exact (the count is re-verified).  The search
    tries the coordinate-wise median plus a spread of sample coordinates; the
    median candidate is guaranteed to succeed whenever some center works at
    the smaller radius theta/(1+sqrt 2) and n3 < n/2, so the procedure has no
    false negatives down to that completeness radius.  When x*_{n3} = 0 the
    ball degenerates to exact equality and the majority value is found
    directly.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size != P.n:
        raise ValueError(f"expected a vector of length {P.n}")
    xstar = _xstar(arr) if _xstar_hint is None else _xstar_hint
    scale = float(xstar[P.n3 - 1])
    radius = theta * scale
    need = P.n - P.n3  # strict threshold: count must exceed this
    is_real = not np.iscomplexobj(arr)

    if scale == 0.0:
        vals, counts = np.unique(arr, return_counts=True)
        top = int(np.argmax(counts))
        if counts[top] > need:
            lam = complex(vals[top])
            idx = np.flatnonzero(arr == vals[top])
            return ACWitness(lam, idx, 0.0, int(counts[top]))
        return None

    if is_real:
        real = arr.astype(np.float64, copy=False)
        svals = real if np.all(real[1:] >= real[:-1]) else np.sort(real)
        candidates = [float(np.median(real))]
        step = max(1, P.n // 48)
        candidates.extend(float(v) for v in svals[::step])
        for lam in candidates:
            cnt = int(
                np.searchsorted(svals, lam + radius, side="right")
                - np.searchsorted(svals, lam - radius, side="left")
            )
            if cnt > need:
                idx = np.flatnonzero(np.abs(real - lam) <= radius)
                return _checked_witness(complex(lam, 0.0), idx, radius, scale, theta, P)
        return None

    med = complex(float(np.median(arr.real)), float(np.median(arr.imag)))
    candidates = [med]
    step = max(1, P.n // 48)
    candidates.extend(complex(v) for v in arr[::step])
    for lam in candidates:
        dist = np.abs(arr - lam)
        idx = np.flatnonzero(dist <= radius)
        if idx.size > need:
            return _checked_witness(lam, idx, radius, scale, theta, P)
    return None


def _checked_witness(
    lam: complex, idx: np.ndarray, radius: float, scale: float, theta: float, P: TaxonomyParams
) -> ACWitness:
    # any true witness ball meets both the top-n3 ranks and the tail ranks,
    # pinning |lambda0| to [ (1-theta) x*_{n3}, (1+theta) x*_{n3} ]
    if scale > 0 and 2 * P.n3 <= P.n + 1:
        assert (1.0 - theta) * scale - _SLACK * scale <= abs(lam) <= (1.0 + theta) * scale + _SLACK * scale
    return ACWitness(lam, idx, radius, int(idx.size))


def split_shifted(x, t: float, P: TaxonomyParams):
    """Split an almost-constant x as steep + constant, unless x is flat.

    Requires x in the radius-theta0 tube (input error otherwise) and the
    standard constant window t >= 12, a3 t <= 1/100.  Returns None when
    x*_{n0} <= t x*_{n3} (the tube already pins the profile); otherwise
    returns (w, c) with w = x - c*1 steep and |c| <= w*_{n1}/10, both
    re-verified.
    """
    if t < 12:
        raise ValueError("need t >= 12")
    if P.a3 * Fraction(t).limit_denominator(10**9) > Fraction(1, 100):
        raise ValueError("need a3 * t <= 1/100")
    arr = _as_complex_vector(x)
    if arr.size != P.n:
        raise ValueError(f"expected a vector of length {P.n}")
    xstar = _xstar(np.asarray(x))
    scale = float(xstar[P.n3 - 1])
    if scale == 0.0:
        raise ValueError("x*_{n3} = 0: degenerate tail")
    witness = almost_constant_witness(np.asarray(x), P.theta0, P, _xstar_hint=xstar)
    if witness is None:
        raise ValueError("x is not almost constant at radius theta0")
    if xstar[P.n0 - 1] <= t * scale:
        return None
    lam = witness.lambda0
    w = arr - lam
    verdict = classify(w, P)
    assert verdict.steep_class != "none", "shifted vector must be steep"
    wstar = _xstar(w)
    assert abs(lam) <= wstar[P.n1 - 1] / 10.0 + _SLACK * max(1.0, abs(lam))
    return w, lam


def decay_check(x, P: TaxonomyParams) -> list:
    """Violations of the three-regime decay envelope against x*_{n3}.

    Empty for every vector outside the steep classes: head ranks obey
    (n/m)^6, the middle obeys d (n/m)^3, and x*_{n1} <= d^3 x*_{n3}.
    Each violation is (family, rank, lhs, rhs).
    """
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size != P.n:
        raise ValueError(f"expected a vector of length {P.n}")
    xstar = _xstar(arr)
    tail = float(xstar[P.n3 - 1])
    out = []
    n = float(P.n)
    pr0 = P.p_r0
    ranks = np.arange(1, pr0 + 1, dtype=np.float64)
    rhs = (n / ranks) ** 6 * tail
    for m in np.flatnonzero(xstar[:pr0] > rhs * (1 + _SLACK)):
        out.append(("head", int(m) + 1, float(xstar[m]), float(rhs[m])))
    ranks = np.arange(pr0, P.n1 + 1, dtype=np.float64)
    rhs = P.d * (n / ranks) ** 3 * tail
    seg = xstar[pr0 - 1 : P.n1]
    for i in np.flatnonzero(seg > rhs * (1 + _SLACK)):
        out.append(("mid", int(i) + pr0, float(seg[i]), float(rhs[i])))
    if xstar[P.n1 - 1] > P.d**3 * tail * (1 + _SLACK):
        out.append(("tail", P.n1, float(xstar[P.n1 - 1]), float(P.d**3 * tail)))
    return out


def max_ball_counts(x, radius: float):
    """Certified bracket for sup over centers of |{i: |x_i - center| <= radius}|.

    Lower bound: best count over balls centered at coordinates.  Upper bound:
    best count at doubled radius (any ball containing some coordinate lies
    inside the doubled ball around it); an empty ball counts 0.
    """
    arr = np.asarray(x)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if not np.iscomplexobj(arr):
        vals = np.sort(arr.astype(np.float64, copy=False))
        lower = int(np.max(_ball_counts_real(vals, vals, radius)))
        upper = int(np.max(_ball_counts_real(vals, vals, 2.0 * radius)))
        return lower, upper
    from scipy.spatial import cKDTree

    pts = np.column_stack((arr.real, arr.imag))
    tree = cKDTree(pts)
    lower = int(np.max(tree.query_ball_point(pts, radius, return_length=True)))
    upper = int(np.max(tree.query_ball_point(pts, 2.0 * radius, return_length=True)))
    return lower, upper


@dataclass(frozen=True)
class DichotomyVerdict:
    """Which branches of the kernel structure dichotomy `x` satisfies.

    The ball condition is reported as a certified bracket: `ball_ok` is True
    when even the doubled-radius count stays within delta*n, False when the
    coordinate-centered count already exceeds it, None when indeterminate.
    """

    q: int
    rho: float
    delta: float
    head_ok: bool
    mid_ok: bool
    very_steep: bool
    ball_lower: int
    ball_upper: int
    ball_limit: float
    ball_ok: Optional[bool]
    variant_head_ok: bool
    variant_mid_ok: bool
    variant_tail_ok: bool

    @property
    def gradual_many_levels(self) -> Optional[bool]:
        if not (self.head_ok and self.mid_ok):
            return False
        return self.ball_ok

    @property
    def variant_decay_ok(self) -> bool:
        return self.variant_head_ok and self.variant_mid_ok and self.variant_tail_ok

    def to_json_obj(self) -> dict:
        return {
            "q": self.q,
            "rho": self.rho,
            "delta": self.delta,
            "head_ok": self.head_ok,
            "mid_ok": self.mid_ok,
            "very_steep": self.very_steep,
            "ball_lower": self.ball_lower,
            "ball_upper": self.ball_upper,
            "ball_limit": self.ball_limit,
            "ball_ok": self.ball_ok,
            "variant_head_ok": self.variant_head_ok,
            "variant_mid_ok": self.variant_mid_ok,
            "variant_tail_ok": self.variant_tail_ok,
            "gradual_many_levels": self.gradual_many_levels,
            "variant_decay_ok": self.variant_decay_ok,
        }


def many_levels_verdict(x, rho: float, delta: float, q: int, P: TaxonomyParams) -> DichotomyVerdict:
    """Evaluate the gradual-with-many-levels branch and its alternatives.

    Checks, with anchor rank n3 = floor(a3 n): the cubic decay of the top q
    ranks against x*_q, the sixth-power decay of ranks q..n3 against x*_{n3},
    the rho-ball cardinality condition (at radius rho * x*_{n3}, limit
    delta*n), and the very-steep escape clause; plus the variant envelope
    anchored at ranks p^r0, n1, n3.
    """
    if rho <= 0 or delta <= 0:
        raise ValueError("rho and delta must be positive")
    if not 1 <= q <= P.n:
        raise ValueError("q out of range")
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size != P.n:
        raise ValueError(f"expected a vector of length {P.n}")
    xstar = _xstar(arr)
    n = float(P.n)
    anchor = float(xstar[P.n3 - 1])

    ranks_q = np.arange(1, q + 1, dtype=np.float64)
    envelope_q = (n / ranks_q) ** 3 * float(xstar[q - 1])
    head_ok = bool(np.all(xstar[:q] <= envelope_q * (1 + _SLACK)))
    very_steep = bool(np.any(xstar[:q] > 0.9 * envelope_q * (1 - _SLACK)))

    ranks_mid = np.arange(q, P.n3 + 1, dtype=np.float64)
    env_mid = P.d**3 * (n / ranks_mid) ** 6 * anchor
    mid_ok = bool(np.all(xstar[q - 1 : P.n3] <= env_mid * (1 + _SLACK)))

    lower, upper = max_ball_counts(arr, rho * anchor)
    limit = delta * n
    ball_ok: Optional[bool]
    if upper <= limit:
        ball_ok = True
    elif lower > limit:
        ball_ok = False
    else:
        ball_ok = None

    pr0 = P.p_r0
    ranks = np.arange(1, pr0 + 1, dtype=np.float64)
    var_head = bool(np.all(xstar[:pr0] <= (n / ranks) ** 3 * float(xstar[pr0 - 1]) * (1 + _SLACK)))
    ranks = np.arange(pr0, P.n1 + 1, dtype=np.float64)
    var_mid = bool(
        np.all(xstar[pr0 - 1 : P.n1] <= P.d * (n / ranks) ** 3 * anchor * (1 + _SLACK))
    )
    var_tail = bool(np.all(xstar[P.n1 - 1 : P.n3] <= P.d**3 * anchor * (1 + _SLACK)))
    return DichotomyVerdict(
        q=q,
        rho=rho,
        delta=delta,
        head_ok=head_ok,
        mid_ok=mid_ok,
        very_steep=very_steep,
        ball_lower=lower,
        ball_upper=upper,
        ball_limit=limit,
        ball_ok=ball_ok,
        variant_head_ok=var_head,
        variant_mid_ok=var_mid,
        variant_tail_ok=var_tail,
    )


def write_vector_csv(path, x) -> None:
    """One "re,im" line per coordinate."""
    arr = _as_complex_vector(x)
    with open(path, "w") as fh:
        for v in arr:
            fh.write(f"{float(v.real)!r},{float(v.imag)!r}\n")


def read_vector_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) == 1:
                rows.append(complex(float(parts[0]), 0.0))
            elif len(parts) == 2:
                rows.append(complex(float(parts[0]), float(parts[1])))
            else:
                raise ValueError(f"bad vector line: {line!r}")
    if not rows:
        raise ValueError("empty vector file")
    arr = np.array(rows, dtype=np.complex128)
    if not np.any(arr.imag):
        return arr.real.copy()
    return arr
