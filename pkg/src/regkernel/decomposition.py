"""Structural cover of normalized gradual vectors.

A gradual vector can be certified in one of two ways, by inspecting the
lattice decomposition of its scale-d^u snap: either the spread parts
(those whose value stairs sit at least d lattice steps apart) cover many
coordinates — membership in `in_Ku` — or, at the final scale d^v, parts
of large height do — membership in `in_Pv`.  `cover_witness` scans
u = 4..v for the first spread certificate and falls back to the tall-part
certificate; for every gradual input one of the branches must fire, and
the module also ships the deterministic finders behind that guarantee
(`find_separated_pair`, `height_dichotomy`, `refinement_report`).

The default constants are extracted from the guarantee's derivation, not
from its statement, and every threshold is configurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ell_decomp import EllDecomposition, KVector, decompose, k_approx
from .estimators import _dyadic_bucket, _truncated_weight_sq
from .taxonomy import TaxonomyParams, classify, max_ball_counts

__all__ = [
    "C_K_DEFAULT",
    "C_P_DEFAULT",
    "PartCertificate",
    "MembershipVerdict",
    "CoverWitness",
    "CoverFailure",
    "SeparationWitness",
    "HeightDichotomyReport",
    "RefinementReport",
    "in_Ku",
    "in_Pv",
    "in_Pv_rho_delta",
    "cover_witness",
    "find_separated_pair",
    "height_dichotomy",
    "refinement_report",
    "bucket_cardinalities",
    "low_bucket_witness",
]

# Derived from the cover guarantee's proof, not its statement: the spread
# constant must stay below 1/120 and the tall-part constant comes out as
# 1/(400 * 2^5).  Both are defaults only.
C_K_DEFAULT = 1.0 / 128.0
C_P_DEFAULT = 1.0 / 12800.0


def _require_gradual(x: np.ndarray, P: TaxonomyParams) -> None:
    verdict = classify(x, P)
    if not verdict.gradual:
        raise ValueError(
            f"input vector is not gradual (class {verdict.label}, "
            f"almost_constant={verdict.almost_constant})"
        )
    if not verdict.normalized:
        raise ValueError("gradual input must be normalized to x*_{n3} = 1")


@dataclass(frozen=True)
class PartCertificate:
    """The parts realizing (or best approaching) a cardinality threshold."""

    parts: tuple  # qualifying part ids in the decomposition
    cardinality: int  # coordinates covered by their (disjoint) union
    threshold: float  # required cardinality
    approx_k: int  # lattice scale the decomposition was taken at
    height_cut: Optional[float] = None  # minimal part height, tall-part branch

    def to_json_obj(self) -> dict:
        return {
            "parts": list(self.parts),
            "cardinality": self.cardinality,
            "threshold": self.threshold,
            "approx_k": self.approx_k,
            "height_cut": self.height_cut,
        }


@dataclass(frozen=True)
class MembershipVerdict:
    member: bool
    certificate: PartCertificate

    def __bool__(self) -> bool:
        return self.member


@dataclass(frozen=True)
class CoverWitness:
    """Which branch of the cover certified the vector, and with what."""

    branch: str  # "Ku" | "Pv"
    u: Optional[int]  # scale exponent for the Ku branch, None on Pv
    v: int
    c_K: float
    c_P: float
    certificate: PartCertificate

    def __post_init__(self):
        if self.branch not in ("Ku", "Pv"):
            raise ValueError(f"unknown branch {self.branch!r}")
        if (self.u is None) == (self.branch == "Ku"):
            raise ValueError("u must be present exactly on the Ku branch")
        if self.certificate.cardinality < self.certificate.threshold:
            raise ValueError("certificate does not meet its threshold")

    def to_json_obj(self) -> dict:
        return {
            "branch": self.branch,
            "u": self.u,
            "v": self.v,
            "c_K": self.c_K,
            "c_P": self.c_P,
            "certificate": self.certificate.to_json_obj(),
        }


class CoverFailure(RuntimeError):
    """No branch certified the vector: constants and input kept for analysis."""

    def __init__(self, v: int, c_K: float, c_P: float, x: np.ndarray, detail: str):
        super().__init__(
            f"no cover branch fired for v={v}, c_K={c_K}, c_P={c_P}: {detail}"
        )
        self.v = v
        self.c_K = c_K
        self.c_P = c_P
        self.x = np.array(x, copy=True)


def in_Ku(x, u: int, cK: float, params: TaxonomyParams) -> MembershipVerdict:
    """Does the scale-d^u snap of x carry >= cK*n3 coordinates in spread parts?

    Requires a normalized gradual input.  The certificate lists the spread
    part ids and their covered cardinality whether or not the threshold is
    met.
    """
    if u < 0 or u != int(u):
        raise ValueError("u must be a nonnegative integer")
    if cK < 0:
        raise ValueError("cK must be nonnegative")
    arr = np.asarray(x)
    _require_gradual(arr, params)
    k = params.d ** int(u)
    dec = decompose(k_approx(arr, k), params.d)
    spread_ids = np.flatnonzero(dec.part_is_spread)
    total = int(dec.part_sizes[spread_ids].sum())
    threshold = cK * params.n3
    cert = PartCertificate(
        parts=tuple(int(q) for q in spread_ids),
        cardinality=total,
        threshold=threshold,
        approx_k=k,
    )
    return MembershipVerdict(total >= threshold, cert)


def in_Pv(
    x,
    v: int,
    cP: float = C_P_DEFAULT,
    a3: Optional[float] = None,
    params: Optional[TaxonomyParams] = None,
) -> MembershipVerdict:
    """Do parts of height >= cP * 2^(cP*(v-4)*a3) * a3 in the scale-d^v snap
    cover >= cP*n3 coordinates?

    When the height cut is <= 1 every nonempty part qualifies, the union is
    all of [n], and membership holds for every normalized gradual vector —
    the class degenerates to the whole gradual set.
    """
    if params is None:
        raise ValueError("params is required")
    if v < 5:
        raise ValueError("v must be at least 5")
    if not 0 < cP < 1:
        raise ValueError("cP must lie in (0, 1)")
    a3f = float(params.a3) if a3 is None else float(a3)
    arr = np.asarray(x)
    _require_gradual(arr, params)
    k = params.d ** int(v)
    dec = decompose(k_approx(arr, k), params.d)
    height_cut = cP * 2.0 ** (cP * (v - 4) * a3f) * a3f
    tall = np.flatnonzero(dec.part_heights >= height_cut)
    total = int(dec.part_sizes[tall].sum())
    threshold = cP * params.n3
    cert = PartCertificate(
        parts=tuple(int(q) for q in tall),
        cardinality=total,
        threshold=threshold,
        approx_k=k,
        height_cut=height_cut,
    )
    return MembershipVerdict(total >= threshold, cert)


def in_Pv_rho_delta(
    x,
    v: int,
    rho: float,
    delta: float,
    params: TaxonomyParams,
    cP: float = C_P_DEFAULT,
    a3: Optional[float] = None,
) -> bool:
    """in_Pv plus a radius-rho ball around some center holding >= delta*n
    coordinates.

    The center search is coordinate-centered, mirroring the taxonomy ball
    contract: a returned True is certified; an adversarial center strictly
    between coordinates could only be found at radius 2*rho.  delta > 1 can
    never hold.  The downstream small-ball theory wants rho <= d^(-v); that
    is the caller's regime choice, not a validity precondition.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if not in_Pv(x, v, cP, a3, params):
        return False
    lower, _ = max_ball_counts(np.asarray(x), rho)
    return lower >= delta * params.n


def cover_witness(
    x,
    v: int,
    constants: tuple = (C_K_DEFAULT, C_P_DEFAULT),
    params: Optional[TaxonomyParams] = None,
) -> CoverWitness:
    """First-firing branch of the cover: Ku for u = 4..v, else Pv.

    Raises CoverFailure — with the constants and the input attached — when
    neither branch certifies; at the default constants this is unreachable
    for normalized gradual inputs.
    """
    if params is None:
        raise ValueError("params is required")
    if v < 5:
        raise ValueError("v must be at least 5")
    cK, cP = constants
    for u in range(4, v + 1):
        hit = in_Ku(x, u, cK, params)
        if hit:
            return CoverWitness("Ku", u, v, cK, cP, hit.certificate)
    fall = in_Pv(x, v, cP, None, params)
    if fall:
        return CoverWitness("Pv", None, v, cK, cP, fall.certificate)
    raise CoverFailure(
        v, cK, cP, np.asarray(x),
        f"best spread mass and tall mass {fall.certificate.cardinality} "
        f"< {fall.certificate.threshold}",
    )


# ------------------------------------------------------- deterministic lemmas


@dataclass(frozen=True)
class SeparationWitness:
    """Disjoint index blocks whose snapped values are pairwise >= gap apart."""

    I: np.ndarray
    J: np.ndarray
    axis: str  # which 1-d projection produced the cut: "re" | "im"
    gap: float
    k: int

    def __post_init__(self):
        self.I.flags.writeable = False
        self.J.flags.writeable = False


def find_separated_pair(x, k: int, params: TaxonomyParams) -> SeparationWitness:
    """Blocks I, J with |I|, |J| >= n3/4 and |y_i - y_j| >= theta0/2 for the
    scale-k snap y, any i in I, j in J.

    The finder cuts at the n3/4-th quantiles of the real axis, then the
    imaginary axis.  If both axes failed, all but n3 coordinates of y would
    sit in a box of side theta0/2, hence in a ball of radius
    theta0*(sqrt(2)/4 + sqrt(2)/5) < theta0 around its center back in x —
    contradicting gradualness; so for k >= 5/theta0 and gradual normalized
    input a cut exists.
    """
    theta0 = params.theta0
    if k < 5.0 / theta0:
        raise ValueError(f"need k >= 5/theta0 = {5.0 / theta0:.6g}, got {k}")
    arr = np.asarray(x)
    _require_gradual(arr, params)
    y = k_approx(arr, int(k))
    m = -(-params.n3 // 4)  # ceil(n3/4)
    for axis, num in (("re", y.re_num), ("im", y.im_num)):
        vals = np.sort(num, kind="stable")
        low, high = vals[m - 1], vals[y.n - m]
        gap = (float(high) - float(low)) / y.k
        if gap >= theta0 / 2.0:
            I = np.flatnonzero(num <= low)
            J = np.flatnonzero(num >= high)
            return SeparationWitness(I, J, axis, gap, int(k))
    raise RuntimeError(
        "no separating cut on either axis; input cannot be gradual normalized"
    )


@dataclass(frozen=True)
class HeightDichotomyReport:
    """Either parts of combined per-order height >= 10 cover n3/8
    coordinates, or spread parts cover n3/120."""

    tall_cardinality: int
    tall_threshold: float
    spread_cardinality: int
    spread_threshold: float
    tall_orders: tuple  # orders whose spread+regular heights sum to >= 10

    @property
    def tall_holds(self) -> bool:
        return self.tall_cardinality >= self.tall_threshold

    @property
    def spread_holds(self) -> bool:
        return self.spread_cardinality >= self.spread_threshold

    @property
    def holds(self) -> bool:
        return self.tall_holds or self.spread_holds


def height_dichotomy(x, k: int, params: TaxonomyParams) -> HeightDichotomyReport:
    """Evaluate both branches of the per-order height/spread dichotomy on the
    scale-k snap of x (guaranteed for gradual inputs when k >= 2d/theta0)."""
    if k < 2 * params.d / params.theta0:
        raise ValueError(
            f"need k >= 2d/theta0 = {2 * params.d / params.theta0:.6g}, got {k}"
        )
    arr = np.asarray(x)
    _require_gradual(arr, params)
    dec = decompose(k_approx(arr, int(k)), params.d)
    orders = dec.part_order
    height_by_order = {}
    size_by_order = {}
    for q in range(dec.m):
        j = int(orders[q])
        height_by_order[j] = height_by_order.get(j, 0) + int(dec.part_heights[q])
        size_by_order[j] = size_by_order.get(j, 0) + int(dec.part_sizes[q])
    tall_orders = tuple(sorted(j for j, h in height_by_order.items() if h >= 10))
    tall_total = sum(size_by_order[j] for j in tall_orders)
    return HeightDichotomyReport(
        tall_cardinality=tall_total,
        tall_threshold=params.n3 / 8.0,
        spread_cardinality=dec.spread_total,
        spread_threshold=params.n3 / 120.0,
        tall_orders=tall_orders,
    )


def _value_class_sizes(y: KVector) -> np.ndarray:
    """For each coordinate, the number of coordinates sharing its value."""
    re, im = y.re_num, y.im_num
    if re.dtype == object:
        from collections import Counter

        counts = Counter(zip(re.tolist(), im.tolist()))
        return np.array(
            [counts[p] for p in zip(re.tolist(), im.tolist())], dtype=np.int64
        )
    order = np.lexsort((im, re))
    rs, ims = re[order], im[order]
    first = np.empty(re.size, dtype=bool)
    first[0] = True
    first[1:] = (rs[1:] != rs[:-1]) | (ims[1:] != ims[:-1])
    gid = np.cumsum(first) - 1
    sizes = np.bincount(gid)
    out = np.empty(re.size, dtype=np.int64)
    out[order] = sizes[gid]
    return out


@dataclass(frozen=True)
class RefinementReport:
    """Level-set shrinkage from scale d^u to d^(u+1): the trichotomy says the
    vector is in K_u or K_(u+1), or many level sets at least halve."""

    u: int
    shrink_count: int  # |{i : 2|J^(u+1)(i)| <= |J^u(i)|}|
    shrink_threshold: float  # n3/192
    ku: MembershipVerdict
    ku_next: MembershipVerdict

    @property
    def holds(self) -> bool:
        return (
            bool(self.ku)
            or bool(self.ku_next)
            or self.shrink_count >= self.shrink_threshold
        )


def refinement_report(
    x, u: int, cK: float = C_K_DEFAULT, params: Optional[TaxonomyParams] = None
) -> RefinementReport:
    if params is None:
        raise ValueError("params is required")
    if u < 4:
        raise ValueError("u must be at least 4")
    arr = np.asarray(x)
    sizes_u = _value_class_sizes(k_approx(arr, params.d ** u))
    sizes_u1 = _value_class_sizes(k_approx(arr, params.d ** (u + 1)))
    shrink = int(np.sum(2 * sizes_u1 <= sizes_u))
    return RefinementReport(
        u=u,
        shrink_count=shrink,
        shrink_threshold=params.n3 / 192.0,
        ku=in_Ku(arr, u, cK, params),
        ku_next=in_Ku(arr, u + 1, cK, params),
    )


# -------------------------------------------------- weight-bucket cardinality


def bucket_cardinalities(dec: EllDecomposition) -> dict:
    """Coordinates covered per dyadic bucket of the truncated part weight."""
    out = {}
    for q in range(dec.m):
        w_sq = _truncated_weight_sq(
            bool(dec.part_is_spread[q]),
            int(dec.part_heights[q]),
            int(dec.part_sizes[q]),
            dec.n,
            dec.d,
        )
        b = _dyadic_bucket(w_sq)
        out[b] = out.get(b, 0) + int(dec.part_sizes[q])
    return out


def low_bucket_witness(dec: EllDecomposition, delta: float) -> Optional[tuple]:
    """A bucket of order <= log2(72*sqrt(d)/delta) covering >= delta*n/36
    coordinates, if one exists; concentrated vectors must have one."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    b_cap = math.log2(72.0 * math.sqrt(dec.d) / delta)
    best = None
    for b, size in sorted(bucket_cardinalities(dec).items()):
        if b <= b_cap and size >= delta * dec.n / 36.0:
            if best is None or size > best[1]:
                best = (b, size)
    return best
