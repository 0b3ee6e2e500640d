"""Tests for kernel probes, certified eigenpairs, and the eigenvector census."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from regkernel.graph_core import RegularMatrix, RowMask, circulant, permutation_matrix
from regkernel.sampler import sample_regular
from regkernel.spectral import (
    DelocReport,
    EigenPair,
    SpectralProbe,
    default_shift_grid,
    delocalization_census,
    eigenpairs,
    smallest_sv_probe,
)
from regkernel.taxonomy import TaxonomyParams


def hand_params(n, d, p=2, r=3, r0=1, n0=1, n1=4, n2=6, n3=8):
    """Scale parameters assembled directly, for sizes below the derivation's
    admissible window (the dichotomy checks only read n, d, p^r0, n1, n3)."""
    return TaxonomyParams(
        n=n, d=d, L=1, a3=Fraction(1, 2),
        eps0=math.sqrt(max(math.log(max(d, 1)), 0.0) / d),
        p=p, r=r, r0=r0, n0=n0, n1=n1, n2=n2, n3=n3,
        theta0=0.5, window_notes=("hand-built",),
    )


def dense_sigma_min(M, z, rows=None):
    A = M.to_dense().astype(complex) - z * np.eye(M.n)
    if rows is not None:
        A = A[rows]
    return float(np.linalg.svd(A, compute_uv=False)[-1])


# --------------------------------------------------------------- probe


class TestSmallestSVProbe:
    def test_permutation_minor_kernel(self):
        # dropping row j leaves the kernel spanned by the standard basis
        # vector at the column row j pointed to
        sigma = [2, 0, 3, 1, 4]
        P = permutation_matrix(sigma)
        K = RowMask(5, [0, 1, 3, 4])
        probe = smallest_sv_probe(P, 0j, K)
        assert probe.sigma_min <= 1e-12
        assert probe.residual == probe.sigma_min
        assert probe.converged
        expected = np.zeros(5)
        expected[sigma[2]] = 1.0
        assert np.abs(probe.x) == pytest.approx(expected, abs=1e-9)

    def test_permutation_full_rows_is_isometry(self):
        P = permutation_matrix([4, 2, 0, 1, 3, 5])
        probe = smallest_sv_probe(P)
        assert probe.sigma_min == pytest.approx(1.0, abs=1e-10)

    def test_row_sum_shift_has_constant_kernel(self):
        M = circulant(10, 3)
        probe = smallest_sv_probe(M, z=3.0 + 0j)
        assert probe.sigma_min <= 1e-10
        alignment = abs(np.vdot(np.full(10, 10 ** -0.5), probe.x))
        assert alignment == pytest.approx(1.0, abs=1e-9)

    def test_upper_bound_and_identity_on_shift_grid(self):
        M = sample_regular(60, 5, seed=11)
        for z in default_shift_grid(5):
            probe = smallest_sv_probe(M, z)
            true = dense_sigma_min(M, z)
            assert probe.sigma_min == probe.residual
            assert probe.sigma_min >= true - 1e-9
            assert probe.sigma_min <= true + 1e-7
            assert probe.sigma_min <= M.d + abs(z) + 1e-9
            assert np.linalg.norm(probe.x) == pytest.approx(1.0, abs=1e-12)

    def test_iterative_matches_dense(self):
        M = sample_regular(120, 6, seed=5)
        z = 2.0 + 1.5j
        probe = smallest_sv_probe(M, z, tol=1e-9, dense_budget=0, max_iter=4000, seed=3)
        true = dense_sigma_min(M, z)
        assert probe.converged
        assert probe.iterations > 1
        assert probe.sigma_min >= true - 1e-12
        assert probe.sigma_min == pytest.approx(true, rel=1e-6)

    def test_iterative_finds_exact_kernel(self):
        rng = np.random.default_rng(7)
        sigma = rng.permutation(150)
        P = permutation_matrix(sigma.tolist())
        K = RowMask(150, [i for i in range(150) if i != 40])
        probe = smallest_sv_probe(P, 0j, K, tol=1e-8, dense_budget=0, seed=1)
        assert probe.sigma_min <= 1e-10
        assert abs(probe.x[sigma[40]]) == pytest.approx(1.0, abs=1e-9)

    def test_vector_is_read_only_unit(self):
        probe = smallest_sv_probe(circulant(8, 2))
        with pytest.raises(ValueError):
            probe.x[0] = 99.0

    def test_validation(self):
        M = circulant(8, 2)
        with pytest.raises(ValueError):
            smallest_sv_probe(M, tol=0.0)
        with pytest.raises(ValueError):
            smallest_sv_probe(M, K=RowMask.full(9))
        with pytest.raises(ValueError):
            SpectralProbe(1.0, np.array([1.0, 1.0]), 1.0, 1, True)

    def test_default_shift_grid(self):
        grid = default_shift_grid(9)
        assert len(grid) == 6
        assert 0j in grid
        assert (3 + 0j) in grid and (-3 + 0j) in grid
        assert 3j in grid
        assert any(g.real > 0 and g.imag > 0 for g in grid)


# ----------------------------------------------------------- eigenpairs


class TestEigenpairs:
    def test_all_ones_spectrum(self):
        J = RegularMatrix([list(range(8))] * 8)
        pairs = eigenpairs(J)
        vals = np.array([p.value for p in pairs])
        assert vals[0] == pytest.approx(8.0, abs=1e-9)
        assert np.allclose(vals[1:], 0.0, atol=1e-7)
        assert all(p.certified for p in pairs)

    def test_cyclic_shift_fourier_basis(self):
        S = circulant(16, 1, [1])
        pairs = eigenpairs(S)
        vals = sorted(
            (p.value for p in pairs), key=lambda c: (round(c.real, 9), round(c.imag, 9))
        )
        roots = sorted(
            np.exp(2j * np.pi * np.arange(16) / 16),
            key=lambda c: (round(c.real, 9), round(c.imag, 9)),
        )
        assert np.allclose(vals, roots, atol=1e-9)
        for p in pairs:
            assert p.residual <= 1e-9
            # distinct eigenvalues force the flat Fourier basis
            assert np.abs(p.vector) == pytest.approx(np.full(16, 0.25), abs=1e-9)

    def test_leading_pair_is_constant_direction(self):
        for M in (circulant(12, 3), sample_regular(40, 5, seed=9)):
            pairs = eigenpairs(M)
            assert pairs[0].value == pytest.approx(M.d, abs=1e-8)
            alignment = abs(np.vdot(np.full(M.n, M.n ** -0.5), pairs[0].vector))
            assert alignment == pytest.approx(1.0, abs=1e-8)

    def test_unit_norm_and_residual_recomputed(self):
        M = sample_regular(30, 4, seed=2)
        for p in eigenpairs(M):
            assert np.linalg.norm(p.vector) == pytest.approx(1.0, abs=1e-12)
            dense = M.to_dense().astype(complex)
            direct = float(np.linalg.norm(dense @ p.vector - p.value * p.vector))
            assert p.residual == pytest.approx(direct, abs=1e-12)

    def test_uncertified_pairs_returned_not_dropped(self):
        pairs = eigenpairs(circulant(12, 3), tol=1e-300)
        assert len(pairs) == 12
        assert not all(p.certified for p in pairs)

    def test_budget(self):
        with pytest.raises(ValueError, match="budget"):
            eigenpairs(circulant(10, 2), dense_budget=5)


# --------------------------------------------------------------- census


class TestDelocalizationCensus:
    def test_all_ones_localized_basis_fails_ball(self):
        # n = d: every non-leading eigenvector lives in the kernel, and a
        # budget below one coordinate's worth of mass fails the ball check
        J = RegularMatrix([list(range(8))] * 8)
        rep = delocalization_census(
            J, rho=0.5, delta=0.1, params=hand_params(8, 8, r=2, n1=2, n2=3, n3=4)
        )
        assert rep.perron_eigenvalue == pytest.approx(8.0, abs=1e-9)
        assert rep.perron_alignment == pytest.approx(1.0, abs=1e-9)
        assert len(rep.rows) == 7
        assert rep.branch_fractions["neither"] == 1.0
        assert not rep.all_pass_ball
        assert rep.flagged_multiplicity == 7
        for row in rep.rows:
            assert abs(row.eigenvalue) <= 1e-7
            assert row.multiplicity == 7
            assert row.verdict.ball_ok is False

    def test_cyclic_shift_all_gradual(self):
        # flat Fourier vectors: ball count equals the value multiplicity
        # gcd(k, 16), all within delta*n = 9.6, and decay is trivially flat
        S = circulant(16, 1, [1])
        rep = delocalization_census(S, rho=0.1, delta=0.6, params=hand_params(16, 1))
        assert len(rep.rows) == 15
        assert rep.branch_fractions["gradual_many_levels"] == 1.0
        assert rep.all_pass_ball
        assert rep.flagged_multiplicity == 0
        assert rep.perron_eigenvalue == pytest.approx(1.0, abs=1e-9)
        uppers = {row.verdict.ball_upper for row in rep.rows}
        assert uppers <= {1, 2, 4, 8}
        assert 8 in uppers  # the alternating-sign vector
        top = max(row.normalized_ball_mass for row in rep.rows)
        assert top == pytest.approx(8 / (0.6 * 16), rel=1e-12)

    def test_random_instance_structure(self):
        M = sample_regular(64, 6, seed=13)
        params = hand_params(64, 6, r=2, n1=5, n2=19, n3=32)
        rep = delocalization_census(M, rho=0.3, delta=0.5, params=params)
        assert len(rep.rows) == 63
        assert sum(rep.branch_fractions.values()) == pytest.approx(1.0)
        assert rep.perron_alignment > 0.99
        for row in rep.rows:
            assert row.branch in rep.branch_fractions
            assert row.normalized_ball_mass == pytest.approx(
                row.verdict.ball_lower / (0.5 * 64)
            )
            assert row.certified

    def test_writers(self, tmp_path):
        S = circulant(16, 1, [1])
        rep = delocalization_census(S, rho=0.1, delta=0.6, params=hand_params(16, 1))
        jpath = tmp_path / "census.json"
        cpath = tmp_path / "census.csv"
        rep.write_json(jpath)
        rep.write_csv(cpath)
        blob = json.loads(jpath.read_text())
        assert blob["n"] == 16 and blob["d"] == 1
        assert len(blob["rows"]) == 15
        assert blob["all_pass_ball"] is True
        assert blob["params"]["n"] == 16
        assert blob["rows"][0]["verdict"]["ball_limit"] == pytest.approx(9.6)
        lines = cpath.read_text().strip().splitlines()
        assert len(lines) == 16
        assert lines[0].startswith("index,eig_re,eig_im,residual")

    def test_param_mismatch(self):
        with pytest.raises(ValueError, match="different n"):
            delocalization_census(
                circulant(10, 2), rho=0.1, delta=0.5, params=hand_params(16, 1)
            )
