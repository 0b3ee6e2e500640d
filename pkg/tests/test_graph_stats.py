import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regkernel.graph_core import RegularMatrix, circulant, permutation_matrix
from regkernel.graph_stats import (
    EventReport,
    alpha_beta,
    check_omega,
    check_row_hits,
    check_row_hits_fraction,
    check_two_sided,
    deflated_norm,
    deflated_norm_bracket,
    dump_reports,
    event_frequency,
    left_right_report,
    left_right_split,
    wilson_interval,
    write_frequency_csv,
)
from regkernel.sampler import sample_regular


def brute_min_touched(M, k):
    import itertools

    dense = M.to_dense()
    best = M.n + 1
    for J in itertools.combinations(range(M.n), k):
        best = min(best, int((dense[:, J].sum(axis=1) > 0).sum()))
    return best


# ----------------------------------------------------------- report type


def test_report_witness_invariant():
    EventReport("x", True, "direct")
    EventReport("x", False, "direct", witness={"J": [0]})
    with pytest.raises(ValueError):
        EventReport("x", True, "direct", witness={"J": [0]})
    with pytest.raises(ValueError):
        EventReport("x", False, "direct")
    assert bool(EventReport("x", True, "direct")) is True


def test_report_serialization(tmp_path):
    reps = [
        EventReport(
            "a", True, "sampled",
            params={"k": np.int64(3), "arr": np.array([1, 2])},
            trials=4, successes=4, frequency=1.0, ci95=(0.4, 1.0), seed=7,
        ),
        EventReport("b", False, "direct", witness={"J": [1, 2]}),
    ]
    path = tmp_path / "reports.jsonl"
    dump_reports(path, reps)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first["params"] == {"k": 3, "arr": [1, 2]} and first["ci95"] == [0.4, 1.0]
    assert json.loads(lines[1])["witness"] == {"J": [1, 2]}

    csv_path = tmp_path / "freq.csv"
    write_frequency_csv(csv_path, [reps[0]])
    rows = csv_path.read_text().splitlines()
    assert rows[0].startswith("name,trials,successes,frequency")
    assert rows[1].split(",")[0] == "a"


# ----------------------------------------------------------- expansion


def test_omega_k1_and_permutation():
    M = sample_regular(24, 3, 0)
    rep = check_omega(M, 1, 0.5)
    assert rep.holds and rep.method == "exhaustive" and rep.params["min_touched"] == 3
    P = permutation_matrix(np.roll(np.arange(9), 4))
    for k in (2, 3):
        assert check_omega(P, k, 0.3, k_exh=3).holds  # touched = k for any J
    assert check_omega(P, 5, 0.3, samples=60).holds


def test_omega_duplicate_columns_witness():
    M = RegularMatrix(np.array([[0, 1], [0, 1], [2, 3], [2, 3]]))
    rep = check_omega(M, 2, 0.4)
    assert not rep.holds and rep.witness["touched"] == 2
    assert rep.witness["J"] in ([0, 1], [2, 3])
    # with eps past the defect the same matrix passes
    assert check_omega(M, 2, 0.6).holds


def test_omega_pair_scan_matches_bruteforce():
    M = sample_regular(16, 3, 11)
    rep = check_omega(M, 2, 0.3)
    assert rep.params["min_touched"] == brute_min_touched(M, 2)
    rep3 = check_omega(M, 3, 0.3, k_exh=3)
    assert rep3.method == "exhaustive"
    if rep3.holds:  # early exit stops the scan before the true minimum
        assert rep3.params["min_touched"] == brute_min_touched(M, 3)


def test_omega_sampled_never_undercuts_exhaustive():
    M = sample_regular(14, 2, 3)
    exh = brute_min_touched(M, 4)
    rep = check_omega(M, 4, 0.05, samples=120, seed=5)
    assert rep.method == "sampled"
    assert rep.params["min_touched"] >= exh


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), eps=st.floats(0.05, 0.6), bump=st.floats(0.05, 0.3))
def test_omega_monotone_in_eps(seed, eps, bump):
    M = sample_regular(20, 3, seed % 50)
    lo = check_omega(M, 2, eps)
    hi = check_omega(M, 2, min(0.99, eps + bump))
    assert lo.params["min_touched"] == hi.params["min_touched"]
    if lo.holds:
        assert hi.holds


def test_omega_rejects_bad_args():
    M = circulant(6, 2)
    with pytest.raises(ValueError):
        check_omega(M, 0, 0.5)
    with pytest.raises(ValueError):
        check_omega(M, 2, 1.0)


# ----------------------------------------------------------- row-hit floors


def test_alpha_beta_values():
    alpha, beta = alpha_beta(2000, 20, 1000)
    assert alpha == pytest.approx(20 * 980 / (8 * math.e * 2000) - 1)
    assert alpha < 0 and beta == math.inf
    alpha, beta = alpha_beta(1600, 200, 1600)
    assert alpha == pytest.approx(200 * 1400 / (8 * math.e * 1600) - 1)
    assert beta == pytest.approx(
        max(math.e * 1600 * math.exp(-alpha / 2), 4 * 1600 / alpha)
    )
    assert beta < 1600  # a non-vacuous budget window exists at this density


def test_row_hits_window_and_full_set():
    M = circulant(400, 160)
    l0 = 324
    assert l0 >= 160 + 24 * math.e * 400 / 160
    rep = check_row_hits(M, l0, sizes=[400], samples_per_size=1)
    # J = all columns: every row has d entries, d exceeds the floor
    assert rep.holds and rep.params["max_bad"][400] == 0
    assert rep.params["alpha"][400] < M.d
    with pytest.raises(ValueError):
        check_row_hits(M, 300)  # below the valid window
    with pytest.raises(ValueError):
        check_row_hits(M, l0, sizes=[100])  # size below l0


def test_row_hits_vacuous_alpha_outside_window():
    M = circulant(400, 160)
    rep = check_row_hits(M, 160, sizes=[160], samples_per_size=2, strict=False)
    assert rep.holds and rep.params["window_ok"] is False
    assert rep.params["alpha"][160] == pytest.approx(-1.0)  # k = d
    assert rep.params["beta"][160] == math.inf


def test_row_hits_holds_in_valid_window():
    M = sample_regular(400, 160, 2)
    rep = check_row_hits(M, 324, samples_per_size=4, seed=1)
    assert rep.holds
    assert all(v == 0 for v in rep.params["max_bad"].values())


def test_row_hits_fraction_deterministic_witness():
    # leaving out one column starves its d rows below a floor close to d
    M = circulant(18, 9)
    rep = check_row_hits_fraction(M, c=0.95, sizes=[17], samples_per_size=2)
    assert not rep.holds
    assert rep.witness["bad_rows"] == 9 and rep.witness["budget"] == pytest.approx(6.0)


def test_row_hits_fraction_holds_on_random():
    M = sample_regular(200, 8, 4)
    rep = check_row_hits_fraction(M, c=0.1, samples_per_size=5, seed=2)
    assert rep.holds and rep.method == "sampled"


def test_two_sided_impossible_band_witness():
    # d = 9 split in half admits no integer count in [4.05, 4.95]: with c = 0.9
    # no row can be two-sided, so the event fails for every sampled J
    M = circulant(18, 9)
    rep = check_two_sided(M, c=0.9, sizes=[9], samples_per_size=1)
    assert not rep.holds and rep.witness["good_rows"] == 0


def test_two_sided_holds_on_random():
    M = sample_regular(200, 8, 9)
    rep = check_two_sided(M, c=0.1, samples_per_size=5, seed=3)
    assert rep.holds
    assert set(rep.params["min_good"]) == set(rep.params["sizes"])


# ----------------------------------------------------------- one-hit splits


def test_split_permutation_and_empty():
    P = permutation_matrix([2, 0, 1, 3])
    I_left, I_right = left_right_split(P, [0], [1])
    assert I_left.tolist() == [1] and I_right.tolist() == [2]
    I_left, I_right = left_right_split(P, [], [1])
    assert I_left.size == 0 and I_right.tolist() == [2]
    with pytest.raises(ValueError):
        left_right_split(P, [0, 1], [1, 2])


def test_split_circulant_example():
    M = circulant(4, 2)
    I_left, I_right = left_right_split(M, [1], [3])
    assert I_left.tolist() == [0, 1] and I_right.tolist() == [2, 3]


def test_split_report_linear_circulant():
    # offsets {0,1,5} mod 12: no two columns share two rows, so every pair of
    # columns touches at least 5 rows and the one-hit bracket applies
    M = circulant(12, 3, [0, 1, 5])
    omega = check_omega(M, 2, eps=1 / 6)
    assert omega.holds
    seen_hypothesis = 0
    for a in range(12):
        for b in range(12):
            if a == b:
                continue
            rep = left_right_report(M, [a], [b], eps=1 / 6)
            assert rep.holds
            seen_hypothesis += rep.params["hypothesis"]
            assert 1 <= min(rep.params["left"], rep.params["right"]) <= 3
    assert seen_hypothesis == 132


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_split_report_implication_fuzz(seed):
    # whenever the union of the two column sets expands, the bracket holds
    rng = np.random.default_rng(seed)
    M = sample_regular(12, 3, seed % 100)
    idx = rng.permutation(12)
    for m in (1, 2):
        rep = left_right_report(M, idx[:m], idx[m : 2 * m], eps=0.2)
        assert rep.holds
        assert (rep.witness is None) == rep.holds


def test_split_report_rejects_bad_sizes():
    M = circulant(6, 2)
    with pytest.raises(ValueError):
        left_right_report(M, [0], [1, 2], eps=0.2)
    with pytest.raises(ValueError):
        left_right_report(M, [], [], eps=0.2)


# ----------------------------------------------------------- deflated norm


def test_norm_all_ones_and_permutation():
    assert deflated_norm(circulant(5, 5)) == 0.0
    br = deflated_norm_bracket(permutation_matrix(np.roll(np.arange(8), 3)))
    assert br.estimate == pytest.approx(1.0, abs=1e-6)
    assert br.converged and br.lower <= br.estimate <= br.upper


def test_norm_matches_dense_svd():
    for M in (circulant(32, 6), sample_regular(120, 8, 1)):
        br = deflated_norm_bracket(M)
        dense = M.to_dense() - M.d / M.n * np.ones((M.n, M.n))
        top = np.linalg.svd(dense, compute_uv=False)[0]
        assert br.estimate <= top + 1e-9
        assert br.estimate >= top * (1 - 1e-4)
        assert br.converged and br.upper >= top - 1e-6


def test_norm_circulant_band_is_no_expander():
    # contiguous offsets concentrate the spectrum: the deflated norm stays
    # close to d instead of the sqrt(d) scale of typical matrices
    M = circulant(64, 8)
    got = deflated_norm(M)
    want = max(
        abs(np.exp(2j * np.pi * k * np.arange(8) / 64).sum()) for k in range(1, 64)
    )
    assert got == pytest.approx(want, rel=1e-6)
    assert got > 2.5 * math.sqrt(8)


def test_norm_bracket_without_convergence():
    br = deflated_norm_bracket(circulant(32, 6), max_iter=2)
    assert not br.converged and br.iterations == 2
    assert br.lower <= br.estimate <= br.upper + 1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_norm_never_exceeds_degree(seed):
    M = sample_regular(40, 1 + seed % 6, seed)
    br = deflated_norm_bracket(M)
    assert br.estimate <= M.d + 1e-9
    assert br.upper <= M.d + 1e-9


# ----------------------------------------------------------- Monte Carlo


def test_wilson_interval_values():
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(0.2366, abs=2e-4)
    assert hi == pytest.approx(0.7634, abs=2e-4)
    assert wilson_interval(10, 10)[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        wilson_interval(11, 10)


def test_event_frequency_engine():
    rep = event_frequency("coin", lambda rng: rng.random() < 0.7, 500, seed=8)
    assert rep.method == "monte-carlo" and not rep.holds
    assert abs(rep.frequency - 0.7) < 0.05
    assert rep.ci95[0] < 0.7 < rep.ci95[1]
    again = event_frequency("coin", lambda rng: rng.random() < 0.7, 500, seed=8)
    assert again.frequency == rep.frequency
    assert again.witness == rep.witness

    sure = event_frequency("sure", lambda rng: True, 50, params={"tag": 1})
    assert sure.holds and sure.frequency == 1.0 and sure.params == {"tag": 1}
    with pytest.raises(ValueError):
        event_frequency("none", lambda rng: True, 0)


def test_event_frequency_row_hit_plumbing():
    def trial(rng):
        M = sample_regular(60, 4, int(rng.integers(0, 2**31)))
        rep = check_row_hits(M, 30, sizes=[30], samples_per_size=2, strict=False)
        return rep.holds

    rep = event_frequency("row_hits_small", trial, 6, seed=0)
    assert rep.holds and rep.frequency == 1.0  # floors are vacuous at this scale
