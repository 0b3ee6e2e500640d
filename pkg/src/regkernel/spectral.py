"""Kernel probes, certified eigenpairs, and the eigenvector structure census.

``smallest_sv_probe`` estimates the smallest singular value of a row
restriction of M - z*Id together with the minimizing unit vector; the
reported value is always the recomputed residual of the returned vector,
hence a certified upper bound on the true minimum.  ``eigenpairs`` wraps
the dense eigensolver, re-verifying every pair through
:func:`regkernel.graph_core.shifted_apply` — the solver is never trusted.
``delocalization_census`` runs the level-decay and ball-cardinality
dichotomy over all non-leading eigenvectors and aggregates branch counts.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph_core import RegularMatrix, RowMask, shifted_apply
from .taxonomy import DichotomyVerdict, TaxonomyParams, many_levels_verdict

__all__ = [
    "SpectralProbe",
    "EigenPair",
    "DelocRow",
    "DelocReport",
    "smallest_sv_probe",
    "eigenpairs",
    "delocalization_census",
    "default_shift_grid",
]


def default_shift_grid(d: int) -> list:
    """Spectral shifts exercising the dependence on z: the origin, the
    real/imaginary circle of radius sqrt(d), and a diagonal point at the
    sqrt(d) ln d scale."""
    r = math.sqrt(d)
    return [0j, r + 0j, -r + 0j, r * 1j, -r * 1j, r * math.log(max(d, 2)) * (0.5 + 0.5j)]


@dataclass(frozen=True)
class SpectralProbe:
    """Smallest-singular-direction estimate for a row-restricted shift.

    `sigma_min` equals `residual`, the recomputed norm of the operator
    applied to `x`; both upper-bound the true smallest singular value.
    """

    sigma_min: float
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool

    def __post_init__(self):
        nrm = float(np.linalg.norm(self.x))
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"probe vector must be unit, got norm {nrm}")
        self.x.flags.writeable = False


def _adjoint_apply(M: RegularMatrix, z: complex, K: RowMask, y: np.ndarray) -> np.ndarray:
    """Conjugate transpose of the K-rows of (M - z*Id), applied to y."""
    rows = K.rows
    idx = M.row_supports[rows].ravel()
    w = np.repeat(y, M.d)
    out = (
        np.bincount(idx, weights=w.real, minlength=M.n)
        + 1j * np.bincount(idx, weights=w.imag, minlength=M.n)
    )
    out[rows] -= np.conj(z) * y
    return out


def smallest_sv_probe(
    M: RegularMatrix,
    z: complex = 0j,
    K: Optional[RowMask] = None,
    tol: float = 1e-8,
    max_iter: int = 2000,
    seed: int = 0,
    dense_budget: int = 2000,
) -> SpectralProbe:
    """Approximately minimize |(M - z*Id)^K x| over unit vectors x.

    Up to `dense_budget` the minimizer comes from a full dense SVD (the
    right singular basis also spans the kernel when K drops rows, so the
    wide case needs no special handling).  Beyond it, LOBPCG runs on the
    real embedding of the normal operator A*A with a seeded start; on
    stagnation the best iterate is returned with converged=False.  Either
    way the reported value is the recomputed residual of the returned
    vector — an upper bound on the true minimum.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = M.n
    if K is None:
        K = RowMask.full(n)
    if K.n != n:
        raise ValueError("row mask is for a different ambient size")

    if n <= dense_budget:
        dense = M.to_dense().astype(np.complex128)[K.rows]
        dense[np.arange(K.size), K.rows] -= z
        _, _, vh = np.linalg.svd(dense, full_matrices=True)
        x = np.conj(vh[-1])
        x /= np.linalg.norm(x)
        residual = float(np.linalg.norm(shifted_apply(M, z, K, x)))
        return SpectralProbe(residual, x, residual, iterations=1, converged=True)

    from scipy.sparse.linalg import LinearOperator, lobpcg

    def normal_embedded(u):
        # real 2n-embedding of x -> A* (A x); Hermitian PSD either way
        u = np.asarray(u).reshape(-1)
        xc = u[:n] + 1j * u[n:]
        yc = _adjoint_apply(M, z, K, shifted_apply(M, z, K, xc))
        return np.concatenate([yc.real, yc.imag])

    op = LinearOperator((2 * n, 2 * n), matvec=normal_embedded, dtype=np.float64)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x57E9])))
    x0 = rng.standard_normal((2 * n, 2))
    scale = (M.d + abs(z)) ** 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # lobpcg reports stagnation via warning
        vals, vecs, hist = lobpcg(
            op, x0, largest=False, tol=tol * scale, maxiter=max_iter,
            retResidualNormsHistory=True,
        )
    pick = int(np.argmin(vals))
    u = vecs[:, pick] / np.linalg.norm(vecs[:, pick])
    hu = normal_embedded(u)
    lam = float(np.dot(u, hu))
    eig_res = float(np.linalg.norm(hu - lam * u))
    converged = eig_res <= 10 * tol * scale
    x = u[:n] + 1j * u[n:]
    x /= np.linalg.norm(x)
    residual = float(np.linalg.norm(shifted_apply(M, z, K, x)))
    return SpectralProbe(
        residual, x, residual, iterations=len(hist), converged=bool(converged)
    )


@dataclass(frozen=True)
class EigenPair:
    value: complex
    vector: np.ndarray
    residual: float
    certified: bool  # residual <= tol*d at extraction time

    def __post_init__(self):
        self.vector.flags.writeable = False


def eigenpairs(
    M: RegularMatrix, tol: float = 1e-9, dense_budget: int = 4000
) -> list:
    """All n eigenpairs of M, each re-verified by a direct residual.

    Pairs are sorted by descending real part (ties by descending modulus),
    so the row-sum eigenvalue d with the constant eigenvector comes first
    for every connected matrix.  A pair whose recomputed residual exceeds
    tol*d is returned with certified=False rather than dropped.
    """
    n = M.n
    if n > dense_budget:
        raise ValueError(
            f"n={n} exceeds the dense eigensolver budget {dense_budget}; "
            "use smallest_sv_probe on a shift grid instead"
        )
    vals, vecs = np.linalg.eig(M.to_dense().astype(np.float64))
    order = np.lexsort((-np.abs(vals), -vals.real))
    full = RowMask.full(n)
    out = []
    for idx in order:
        x = vecs[:, idx].astype(np.complex128)
        x /= np.linalg.norm(x)
        lam = complex(vals[idx])
        residual = float(np.linalg.norm(shifted_apply(M, lam, full, x) ))
        out.append(EigenPair(lam, x, residual, bool(residual <= tol * M.d)))
    return out


# ------------------------------------------------------------------ census


@dataclass(frozen=True)
class DelocRow:
    """Census result for one eigenvector."""

    index: int
    eigenvalue: complex
    residual: float
    certified: bool
    multiplicity: int
    branch: str  # "gradual_many_levels" | "very_steep" | "neither" | "indeterminate"
    verdict: DichotomyVerdict
    normalized_ball_mass: float  # certified ball count over delta*n

    def to_json_obj(self) -> dict:
        return {
            "index": self.index,
            "eigenvalue": [self.eigenvalue.real, self.eigenvalue.imag],
            "residual": self.residual,
            "certified": self.certified,
            "multiplicity": self.multiplicity,
            "branch": self.branch,
            "normalized_ball_mass": self.normalized_ball_mass,
            "verdict": self.verdict.to_json_obj(),
        }


@dataclass(frozen=True)
class DelocReport:
    """Aggregated eigenvector census.

    The leading pair (largest alignment with the constant vector) is
    excluded from the rows.  Branch fractions are taken over all remaining
    vectors; rows at eigenvalues of multiplicity > 1 are flagged because
    the basis there is solver-dependent, and their count is reported
    separately rather than adjudicated.
    """

    n: int
    d: int
    rho: float
    delta: float
    q: int
    rows: tuple
    branch_fractions: dict
    perron_eigenvalue: complex
    perron_alignment: float
    flagged_multiplicity: int
    params: dict

    @property
    def all_pass_ball(self) -> bool:
        return all(r.verdict.ball_ok is True for r in self.rows)

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "rho": self.rho,
            "delta": self.delta,
            "q": self.q,
            "branch_fractions": self.branch_fractions,
            "perron_eigenvalue": [
                self.perron_eigenvalue.real,
                self.perron_eigenvalue.imag,
            ],
            "perron_alignment": self.perron_alignment,
            "flagged_multiplicity": self.flagged_multiplicity,
            "all_pass_ball": self.all_pass_ball,
            "params": self.params,
            "rows": [r.to_json_obj() for r in self.rows],
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_obj(), fh, indent=1)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "index", "eig_re", "eig_im", "residual", "certified",
                    "multiplicity", "branch", "ball_lower", "ball_upper",
                    "ball_limit", "ball_ok", "normalized_ball_mass",
                    "head_ok", "mid_ok", "very_steep", "variant_decay_ok",
                ]
            )
            for r in self.rows:
                v = r.verdict
                writer.writerow(
                    [
                        r.index, r.eigenvalue.real, r.eigenvalue.imag,
                        r.residual, r.certified, r.multiplicity, r.branch,
                        v.ball_lower, v.ball_upper, v.ball_limit, v.ball_ok,
                        r.normalized_ball_mass, v.head_ok, v.mid_ok,
                        v.very_steep, v.variant_decay_ok,
                    ]
                )


def _branch_of(verdict: DichotomyVerdict) -> str:
    if verdict.gradual_many_levels is True:
        return "gradual_many_levels"
    if verdict.very_steep:
        return "very_steep"
    if verdict.gradual_many_levels is False:
        return "neither"
    return "indeterminate"


def delocalization_census(
    M: RegularMatrix,
    rho: float,
    delta: float,
    params: TaxonomyParams,
    tol: float = 1e-9,
    q: int = 1,
    multiplicity_tol: float = 1e-8,
) -> DelocReport:
    """Structure dichotomy over every eigenvector except the leading one.

    Each non-leading eigenvector runs through the level-decay checks and
    the certified rho-ball bracket (radius rho * x*_{n3}, budget delta*n).
    The per-vector branch is gradual_many_levels when decay holds and even
    the doubled-radius count stays within budget, very_steep on the escape
    clause, neither when the coordinate-centered count already overshoots,
    and indeterminate when the bracket straddles the budget.
    """
    if params.n != M.n:
        raise ValueError("params describe a different n")
    pairs = eigenpairs(M, tol=tol)
    const = np.full(M.n, 1.0 / math.sqrt(M.n))
    alignments = [abs(np.vdot(const, p.vector)) for p in pairs]
    lead = int(np.argmax(alignments))

    vals = np.array([p.value for p in pairs])
    mults = [
        int(np.sum(np.abs(vals - p.value) <= multiplicity_tol * max(M.d, 1)))
        for p in pairs
    ]

    rows = []
    counts = {"gradual_many_levels": 0, "very_steep": 0, "neither": 0, "indeterminate": 0}
    flagged = 0
    for pos, pair in enumerate(pairs):
        if pos == lead:
            continue
        verdict = many_levels_verdict(pair.vector, rho, delta, q, params)
        branch = _branch_of(verdict)
        counts[branch] += 1
        flagged += mults[pos] > 1
        rows.append(
            DelocRow(
                index=len(rows),
                eigenvalue=pair.value,
                residual=pair.residual,
                certified=pair.certified,
                multiplicity=mults[pos],
                branch=branch,
                verdict=verdict,
                normalized_ball_mass=verdict.ball_lower / (delta * M.n),
            )
        )
    total = max(len(rows), 1)
    fractions = {k: v / total for k, v in counts.items()}
    return DelocReport(
        n=M.n,
        d=M.d,
        rho=rho,
        delta=delta,
        q=q,
        rows=tuple(rows),
        branch_fractions=fractions,
        perron_eigenvalue=pairs[lead].value,
        perron_alignment=float(alignments[lead]),
        flagged_multiplicity=flagged,
        params=params.describe(),
    )
