"""Deterministic verifiers for expansion events of d-regular 0/1 matrices.

Each check evaluates one combinatorial event — neighborhood expansion of
column subsets, row-hit floors over large column sets, one-hit row splits
for disjoint column pairs — and returns an :class:`EventReport` stating
whether the event holds, over which family of subsets it was evaluated,
and a concrete witness when it fails.  A check is never silently
downgraded: reports always carry the method ("exhaustive" or "sampled")
and the sample count.

The module also provides the deflated operator norm ``|M - (d/n) 11^T|``
with a certified bracket, and a small Monte-Carlo engine that measures
event frequencies with Wilson 95% intervals.  Reports serialize as JSON
lines; frequency tables as CSV.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .graph_core import RegularMatrix, union_col_supports

__all__ = [
    "EventReport",
    "NormBracket",
    "alpha_beta",
    "check_omega",
    "check_row_hits",
    "check_row_hits_fraction",
    "check_two_sided",
    "left_right_split",
    "left_right_report",
    "deflated_norm",
    "deflated_norm_bracket",
    "event_frequency",
    "wilson_interval",
    "dump_reports",
    "write_frequency_csv",
]


@dataclass(frozen=True)
class EventReport:
    """Outcome of one event check.

    ``witness`` is present exactly when ``holds`` is false and describes the
    violating subset/row.  Monte-Carlo reports additionally carry the trial
    count, success frequency and a Wilson 95% interval.
    """

    name: str
    holds: bool
    method: str  # "exhaustive" | "sampled" | "direct" | "monte-carlo"
    params: dict = field(default_factory=dict)
    witness: Optional[dict] = None
    trials: Optional[int] = None
    successes: Optional[int] = None
    frequency: Optional[float] = None
    ci95: Optional[tuple] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if (self.witness is None) != self.holds:
            raise ValueError("witness must be present iff the event fails")

    def __bool__(self) -> bool:
        return self.holds

    def to_json_obj(self) -> dict:
        out = {
            "name": self.name,
            "holds": self.holds,
            "method": self.method,
            "params": _jsonable(self.params),
        }
        if self.witness is not None:
            out["witness"] = _jsonable(self.witness)
        for key in ("trials", "successes", "frequency", "seed"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.ci95 is not None:
            out["ci95"] = list(self.ci95)
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_reports(path, reports) -> None:
    """Write reports as JSON lines (one object per report)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(json.dumps(rep.to_json_obj()) + "\n")


def write_frequency_csv(path, reports) -> None:
    """Tabulate Monte-Carlo reports (name, trials, successes, frequency, CI)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["name", "trials", "successes", "frequency", "ci_low", "ci_high", "seed"]
        )
        for rep in reports:
            lo, hi = rep.ci95 if rep.ci95 is not None else ("", "")
            writer.writerow(
                [rep.name, rep.trials, rep.successes, rep.frequency, lo, hi, rep.seed]
            )


def _rng(seed, *tags) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *tags])))


def _hit_counts(M: RegularMatrix, members: np.ndarray) -> np.ndarray:
    """Per row, the number of support entries inside the column set."""
    return members[M.row_supports].sum(axis=1)


# ------------------------------------------------------- subset expansion


def check_omega(
    M: RegularMatrix,
    k: int,
    eps: float,
    k_exh: int = 2,
    samples: int = 500,
    seed: int = 0,
) -> EventReport:
    """Does every k-subset J of columns touch at least (1-eps)*d*k rows?

    The touched set is { i : supp R_i meets J }; its size is at most d*k, and
    equality means the k column supports are pairwise disjoint.  For k = 1 the
    event always holds (each column has exactly d ones).  k <= k_exh is
    checked exhaustively (k = 2 via per-column overlap counts, larger k by
    enumeration — feasible only for small n); beyond that, `samples` random
    subsets are tested and the report is labeled "sampled".
    """
    n, d = M.n, M.d
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    threshold = (1.0 - eps) * d * k
    params = {"n": n, "d": d, "k": k, "eps": eps, "threshold": threshold}

    if k == 1:
        params["min_touched"] = d
        return EventReport("omega", True, "exhaustive", params)

    if k == 2:
        best = n + 1
        best_pair = None
        cols = M.col_supports
        for a in range(n):
            occ = np.bincount(M.row_supports[cols[a]].ravel(), minlength=n)
            occ[a] = -1
            b = int(np.argmax(occ))
            touched = 2 * d - int(occ[b])
            if touched < best:
                best, best_pair = touched, (a, b)
        params["min_touched"] = best
        params["sets_checked"] = n * (n - 1) // 2
        if best >= threshold:
            return EventReport("omega", True, "exhaustive", params)
        return EventReport(
            "omega", False, "exhaustive", params,
            witness={"J": sorted(best_pair), "touched": best},
        )

    if k <= k_exh:
        best = n + 1
        best_J = None
        count = 0
        for J in itertools.combinations(range(n), k):
            touched = union_col_supports(M, list(J)).size
            count += 1
            if touched < best:
                best, best_J = touched, J
                if best < threshold:
                    break
        params["min_touched"] = best
        params["sets_checked"] = count
        if best >= threshold:
            return EventReport("omega", True, "exhaustive", params)
        return EventReport(
            "omega", False, "exhaustive", params,
            witness={"J": list(best_J), "touched": best},
        )

    rng = _rng(seed, 0x0E6A)
    best = n + 1
    best_J = None
    for _ in range(samples):
        J = rng.choice(n, size=k, replace=False)
        members = np.zeros(n, dtype=bool)
        members[J] = True
        touched = int((_hit_counts(M, members) > 0).sum())
        if touched < best:
            best, best_J = touched, np.sort(J)
            if best < threshold:
                break
    params["min_touched"] = best
    params["samples"] = samples
    if best >= threshold:
        return EventReport("omega", True, "sampled", params, seed=seed)
    return EventReport(
        "omega", False, "sampled", params,
        witness={"J": best_J.tolist(), "touched": best}, seed=seed,
    )


# ------------------------------------------------------- row-hit floors


def alpha_beta(n: int, d: int, k: int) -> tuple:
    """Hit floor and bad-row budget for column sets of size k.

    alpha = d(k-d)/(8en) - 1 is the per-row hit count below which a row
    counts as bad; beta = max(en exp(-alpha/2), 4k ln(en/k)/alpha) bounds how
    many bad rows are allowed.  For alpha <= 0 no row can be bad and beta is
    reported as infinity.
    """
    alpha = d * (k - d) / (8 * math.e * n) - 1.0
    if alpha <= 0:
        return alpha, math.inf
    beta = max(
        math.e * n * math.exp(-alpha / 2.0),
        4.0 * k * math.log(math.e * n / k) / alpha,
    )
    return alpha, beta


def _size_grid(lo: int, hi: int, num: int = 6) -> list:
    if lo > hi:
        return []
    grid = np.unique(np.geomspace(lo, hi, num=num).round().astype(int))
    return [int(v) for v in np.clip(grid, lo, hi)]


def check_row_hits(
    M: RegularMatrix,
    l0: int,
    sizes=None,
    samples_per_size: int = 20,
    seed: int = 0,
    strict: bool = True,
) -> EventReport:
    """For sampled column sets J of each size k >= l0, are there at most
    beta_k rows with fewer than alpha_k support entries in J?

    The valid parameter window requires l0 >= d + 24en/d, which forces d on
    the order of sqrt(n) or larger; `strict=False` evaluates outside the
    window anyway and records the violation in the report parameters (the
    budgets can then be vacuous: alpha_k <= 0 means no row is ever bad).
    """
    n, d = M.n, M.d
    window_ok = l0 >= d + 24 * math.e * n / d
    if strict and not window_ok:
        raise ValueError(
            f"need l0 >= d + 24en/d = {d + 24 * math.e * n / d:.1f}, got {l0}"
        )
    if not 1 <= l0 <= n:
        raise ValueError(f"need 1 <= l0 <= n, got {l0}")
    sizes = _size_grid(l0, n) if sizes is None else [int(k) for k in sizes]
    if any(k < l0 or k > n for k in sizes):
        raise ValueError("sizes must lie in [l0, n]")
    rng = _rng(seed, 0x60D5)
    params = {
        "n": n, "d": d, "l0": l0, "sizes": sizes,
        "samples_per_size": samples_per_size, "window_ok": window_ok,
        "alpha": {}, "beta": {}, "max_bad": {},
    }
    witness = None
    for k in sizes:
        alpha, beta = alpha_beta(n, d, k)
        params["alpha"][k] = alpha
        params["beta"][k] = beta
        worst = 0
        for trial in range(samples_per_size):
            J = rng.choice(n, size=k, replace=False)
            members = np.zeros(n, dtype=bool)
            members[J] = True
            bad = int((_hit_counts(M, members) < alpha).sum())
            worst = max(worst, bad)
            if bad > beta and witness is None:
                witness = {
                    "size": k, "trial": trial, "bad_rows": bad, "beta": beta,
                    "J_head": np.sort(J)[:20].tolist(),
                }
        params["max_bad"][k] = worst
    if witness is None:
        return EventReport("row_hits", True, "sampled", params, seed=seed)
    return EventReport("row_hits", False, "sampled", params, witness=witness, seed=seed)


def check_row_hits_fraction(
    M: RegularMatrix,
    c: float = 0.1,
    sizes=None,
    samples_per_size: int = 20,
    seed: int = 0,
) -> EventReport:
    """Variant with a proportional floor: for sampled J with |J| >= n/sqrt(d),
    at most n/sqrt(d) rows may have fewer than c*d*|J|/n entries in J."""
    n, d = M.n, M.d
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    lo = max(1, math.ceil(n / math.sqrt(d)))
    sizes = _size_grid(lo, n) if sizes is None else [int(k) for k in sizes]
    if any(k < lo or k > n for k in sizes):
        raise ValueError(f"sizes must lie in [{lo}, n]")
    budget = n / math.sqrt(d)
    rng = _rng(seed, 0xF4AC)
    params = {
        "n": n, "d": d, "c": c, "sizes": sizes, "budget": budget,
        "samples_per_size": samples_per_size, "max_bad": {},
    }
    witness = None
    for k in sizes:
        floor = c * d * k / n
        worst = 0
        for trial in range(samples_per_size):
            J = rng.choice(n, size=k, replace=False)
            members = np.zeros(n, dtype=bool)
            members[J] = True
            bad = int((_hit_counts(M, members) < floor).sum())
            worst = max(worst, bad)
            if bad > budget and witness is None:
                witness = {
                    "size": k, "trial": trial, "bad_rows": bad, "budget": budget,
                    "J_head": np.sort(J)[:20].tolist(),
                }
        params["max_bad"][k] = worst
    if witness is None:
        return EventReport("row_hits_fraction", True, "sampled", params, seed=seed)
    return EventReport(
        "row_hits_fraction", False, "sampled", params, witness=witness, seed=seed
    )


def check_two_sided(
    M: RegularMatrix,
    c: float = 0.1,
    sizes=None,
    samples_per_size: int = 20,
    seed: int = 0,
) -> EventReport:
    """For sampled J of each size, at least c*min(d|J|, d|J^c|, n) rows must
    have at least c*d|J|/n entries in J and c*d|J^c|/n entries outside."""
    n, d = M.n, M.d
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    sizes = _size_grid(1, n - 1) if sizes is None else [int(k) for k in sizes]
    if any(k < 1 or k > n - 1 for k in sizes):
        raise ValueError("sizes must lie in [1, n-1]")
    rng = _rng(seed, 0x2519)
    params = {
        "n": n, "d": d, "c": c, "sizes": sizes,
        "samples_per_size": samples_per_size, "min_good": {},
    }
    witness = None
    for k in sizes:
        floor_in = c * d * k / n
        floor_out = c * d * (n - k) / n
        need = c * min(d * k, d * (n - k), n)
        best = n + 1
        for trial in range(samples_per_size):
            J = rng.choice(n, size=k, replace=False)
            members = np.zeros(n, dtype=bool)
            members[J] = True
            hits = _hit_counts(M, members)
            good = int(((hits >= floor_in) & (d - hits >= floor_out)).sum())
            best = min(best, good)
            if good < need and witness is None:
                witness = {
                    "size": k, "trial": trial, "good_rows": good, "need": need,
                    "J_head": np.sort(J)[:20].tolist(),
                }
        params["min_good"][k] = best
    if witness is None:
        return EventReport("two_sided", True, "sampled", params, seed=seed)
    return EventReport("two_sided", False, "sampled", params, witness=witness, seed=seed)


# ------------------------------------------------------ one-hit row splits


def left_right_split(M: RegularMatrix, Jl, Jr) -> tuple:
    """Rows with exactly one support entry in Jl and none in Jr, and the
    mirror set (none in Jl, exactly one in Jr)."""
    Jl = np.unique(np.asarray(Jl, dtype=np.int64).reshape(-1))
    Jr = np.unique(np.asarray(Jr, dtype=np.int64).reshape(-1))
    if np.intersect1d(Jl, Jr).size:
        raise ValueError("Jl and Jr must be disjoint")
    n = M.n
    left = np.zeros(n, dtype=bool)
    left[Jl] = True
    right = np.zeros(n, dtype=bool)
    right[Jr] = True
    hits_l = _hit_counts(M, left)
    hits_r = _hit_counts(M, right)
    I_left = np.flatnonzero((hits_l == 1) & (hits_r == 0))
    I_right = np.flatnonzero((hits_l == 0) & (hits_r == 1))
    return I_left, I_right


def left_right_report(M: RegularMatrix, Jl, Jr, eps: float) -> EventReport:
    """Check the split-size bracket (1-4eps)*d*m <= |I_left|, |I_right| <= d*m
    for equal-size disjoint Jl, Jr, conditionally on the expansion of their
    union: if Jl u Jr touches fewer than (1-eps)*d*|Jl u Jr| rows the bracket
    is not implied and the report holds vacuously."""
    Jl = np.unique(np.asarray(Jl, dtype=np.int64).reshape(-1))
    Jr = np.unique(np.asarray(Jr, dtype=np.int64).reshape(-1))
    if Jl.size != Jr.size or Jl.size == 0:
        raise ValueError("need equal nonempty sizes")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    m, d = int(Jl.size), M.d
    touched = union_col_supports(M, np.concatenate([Jl, Jr])).size
    hypothesis = touched >= (1.0 - eps) * d * 2 * m
    I_left, I_right = left_right_split(M, Jl, Jr)
    lo, hi = (1.0 - 4.0 * eps) * d * m, d * m
    conclusion = lo <= min(I_left.size, I_right.size) and max(
        I_left.size, I_right.size
    ) <= hi
    params = {
        "n": M.n, "d": d, "m": m, "eps": eps, "touched": touched,
        "hypothesis": hypothesis, "left": int(I_left.size),
        "right": int(I_right.size), "bracket": (lo, hi),
    }
    if hypothesis and not conclusion:
        witness = {"left": int(I_left.size), "right": int(I_right.size), "bracket": (lo, hi)}
        return EventReport("left_right", False, "direct", params, witness=witness)
    return EventReport("left_right", True, "direct", params)


# ------------------------------------------------------- deflated norm


@dataclass(frozen=True)
class NormBracket:
    """Power-iteration estimate of the deflated norm with its bracket.

    `lower` is certified (the norm of B applied to a unit vector); `upper`
    is the minimum of the closed-form bounds d, 2d(n-d)/n, sqrt(d(n-d)) and
    the residual gap sqrt(sigma^2 + |B^T B v - sigma^2 v|), the last of which
    assumes the iterate has locked onto the leading singular direction."""

    estimate: float
    lower: float
    upper: float
    gap_upper: float
    iterations: int
    converged: bool


def _mat_apply(M: RegularMatrix, x: np.ndarray) -> np.ndarray:
    return x[M.row_supports].sum(axis=1)


def _mat_apply_t(M: RegularMatrix, y: np.ndarray) -> np.ndarray:
    return np.bincount(
        M.row_supports.ravel(), weights=np.repeat(y, M.d), minlength=M.n
    )


def deflated_norm_bracket(
    M: RegularMatrix,
    tol: float = 1e-6,
    max_iter: int = 20000,
    seed: int = 0,
) -> NormBracket:
    """Operator norm of B = M - (d/n) 11^T by power iteration on B^T B.

    The Rayleigh value sigma_t = |B v_t| is non-decreasing, so the run stops
    once a 10-iteration window improves it by less than tol*sigma; failing
    that within max_iter, the best bracket found so far is returned with
    converged=False.  Deterministic for fixed seed.
    """
    n, d = M.n, M.d
    shift = d / n

    def apply_B(x):
        return _mat_apply(M, x) - shift * x.sum()

    def apply_Bt(y):
        return _mat_apply_t(M, y) - shift * y.sum()

    rng = _rng(seed, 0xDEF7)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    closed_form = min(float(d), 2.0 * d * (n - d) / n, math.sqrt(d * (n - d)))
    history = []
    sigma = 0.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        u = apply_B(v)
        sigma = float(np.linalg.norm(u))
        if sigma == 0.0:
            converged = True
            break
        w = apply_Bt(u)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            converged = True
            break
        v = w / nw
        history.append(sigma)
        if len(history) > 10 and history[-1] - history[-11] <= tol * history[-1]:
            converged = True
            break
    u = apply_B(v)
    sigma = float(np.linalg.norm(u))
    residual = float(np.linalg.norm(apply_Bt(u) - sigma**2 * v))
    gap_upper = math.sqrt(sigma**2 + residual)
    return NormBracket(
        estimate=sigma,
        lower=sigma,
        upper=min(closed_form, gap_upper),
        gap_upper=gap_upper,
        iterations=iterations,
        converged=converged,
    )


def deflated_norm(
    M: RegularMatrix, tol: float = 1e-6, max_iter: int = 20000, seed: int = 0
) -> float:
    """Estimate of |M - (d/n) 11^T| (see deflated_norm_bracket)."""
    return deflated_norm_bracket(M, tol=tol, max_iter=max_iter, seed=seed).estimate


# ------------------------------------------------------- Monte-Carlo engine


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials < 0 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials")
    if trials == 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def event_frequency(
    name: str,
    trial: Callable[[np.random.Generator], bool],
    trials: int,
    seed: int = 0,
    params: Optional[dict] = None,
) -> EventReport:
    """Run `trial` with independent per-trial generators and report the
    success frequency with a Wilson 95% interval.

    `holds` is true iff every trial succeeded; otherwise the witness records
    the first failing trial index (its generator is reproducible from the
    seed and that index).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    successes = 0
    first_bad = None
    for t in range(trials):
        if bool(trial(_rng(seed, t))):
            successes += 1
        elif first_bad is None:
            first_bad = t
    freq = successes / trials
    ci = wilson_interval(successes, trials)
    common = dict(
        params=dict(params or {}),
        trials=trials,
        successes=successes,
        frequency=freq,
        ci95=ci,
        seed=seed,
    )
    if first_bad is None:
        return EventReport(name, True, "monte-carlo", **common)
    return EventReport(
        name, False, "monte-carlo", witness={"first_failing_trial": first_bad}, **common
    )
