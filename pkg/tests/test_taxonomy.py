import numpy as np
import pytest
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from regkernel.graph_core import RegularMatrix, RowMask, circulant, shifted_apply
from regkernel.taxonomy import (
    InvalidWindow,
    TaxonomyParams,
    almost_constant_witness,
    classify,
    decay_check,
    derive_params,
    many_levels_verdict,
    max_ball_counts,
    read_vector_csv,
    rearrangement,
    split_shifted,
    weak13_norm,
    write_vector_csv,
)


def small_params():
    # d=20 is far below the default scale-factor floor, so widen p_factor;
    # a3=1/400 keeps the tail anchor rank at 5 for n=2000
    return derive_params(2000, 20, 2, overrides={"p_factor": 1.0, "a3": "1/400"})


def split_params():
    # window where the constant-splitting guarantees are sound (n1 <= n0)
    return derive_params(50000, 300, 1, overrides={"p_factor": 1.0})


# ---------------------------------------------------------------- parameters


def test_derive_params_reference_point():
    P = derive_params(10**6, 1000, 1)
    assert (P.p, P.n1, P.r, P.r0) == (2, 32, 4, 0)
    assert (P.n2, P.n3, P.n0) == (10**4, 833, 62)
    assert P.theta0 == 10.0 / 1000**3
    assert P.eps0 == pytest.approx(np.sqrt(np.log(1000) / 1000))


def test_derive_params_small_degree_rejected():
    with pytest.raises(InvalidWindow):
        derive_params(10**6, 100, 1)  # scale factor collapses to zero
    with pytest.raises(InvalidWindow):
        derive_params(1000, 2, 1)
    with pytest.raises(InvalidWindow):
        derive_params(1000, 20, 0)


def test_derive_params_occupancy_scaling():
    # r0 grows with the number of off-support rows allowed
    P = derive_params(10**9, 1000, 1000)
    assert P.p**P.r0 >= Fraction(20 * 1000, 1000)
    assert P.p ** (P.r0 - 1) < 20 if P.r0 else True


def test_derive_params_overrides_and_strict():
    P = small_params()
    assert P.p == 2 and P.r == 4 and P.r0 == 1
    assert P.n3 == 5 and P.n0 == 6 and P.n1 == 23 and P.n2 == 271
    with pytest.raises(ValueError):
        derive_params(2000, 20, 1, overrides={"bogus": 1})
    with pytest.raises(InvalidWindow):
        derive_params(2000, 20, 1, overrides={"p_factor": 1.0}, strict=True)
    # soft notes record the out-of-regime facts instead
    assert "n < d^3" in derive_params(2000, 20, 1, overrides={"p_factor": 1.0}).window_notes


@given(
    n=st.integers(min_value=2, max_value=10**9),
    d=st.integers(min_value=3, max_value=10**5),
)
def test_scale_rank_formulas_are_exact(n, d):
    # ceil(n / d^1.5) and floor(n / d^(2/3)) computed without float error
    from regkernel.taxonomy import _ceil_n_over_d32, _floor_n_over_d23

    q = _ceil_n_over_d32(n, d)
    assert q * q * d**3 >= n * n and (q - 1) ** 2 * d**3 < n * n
    q = _floor_n_over_d23(n, d)
    assert q**3 * d**2 <= n**3 and (q + 1) ** 3 * d**2 > n**3


# ------------------------------------------------------------- rearrangement


def test_rearrangement_sign_and_order():
    xstar, xsharp, perm = rearrangement(np.array([1.0, -1.0]))
    assert np.allclose(xstar, [1.0, 1.0])
    assert np.allclose(xsharp, [1.0, -1.0])
    x = np.array([1j, 1.0])
    xstar, xsharp, perm = rearrangement(x)
    assert np.allclose(xsharp, [1.0, 1j])  # real part dominates, then imaginary
    assert np.allclose(x[perm], xsharp)


@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False), min_size=1, max_size=40))
def test_rearrangement_properties(vals):
    x = np.array(vals, dtype=np.complex128)
    xstar, xsharp, perm = rearrangement(x)
    assert np.allclose(np.sort(xstar)[::-1], xstar)
    assert np.allclose(np.sort(np.abs(x))[::-1], xstar)
    assert np.allclose(x[perm], xsharp)
    key = [(v.real, v.imag) for v in xsharp]
    assert key == sorted(key, reverse=True)
    assert sorted(perm) == list(range(len(vals)))


# ------------------------------------------------------------ classification


def test_classify_zero_rejected():
    with pytest.raises(ValueError):
        classify(np.zeros(2000), small_params())
    with pytest.raises(ValueError):
        classify(np.ones(7), small_params())  # wrong length


def test_classify_single_spike():
    P = small_params()
    e1 = np.zeros(P.n)
    e1[0] = 1.0
    v = classify(e1, P)
    assert v.label == "T3" and v.degenerate_tail  # tail rank collapses to zero
    # with a faint tail the genuine top-heaviness test fires instead
    e1 += 1e-12
    v = classify(e1, P)
    assert v.label == "T3" and not v.degenerate_tail
    assert not v.gradual


def test_classify_constant_vector():
    P = small_params()
    v = classify(np.ones(P.n), P)
    assert v.steep_class == "none"
    assert v.almost_constant and v.lambda0 == 1.0
    assert not v.gradual and v.normalized


def test_classify_jump_levels():
    P = small_params()
    # drop by more than 4d between ranks p^1=2 and p^2=4
    x = np.ones(P.n)
    x[:2] = 4 * P.d + 1.0
    np.random.default_rng(0).shuffle(x)
    v = classify(x, P)
    assert v.label == "T0(1)"
    # top-level jump: ranks ceil(n1/p)=12 .. n1=23 (16 flat ranks clear the
    # earlier power-of-two windows)
    x = np.ones(P.n)
    x[:16] = 4 * P.d + 1.0
    v = classify(x, P)
    assert v.label == f"T0({P.r})"


def test_classify_wide_windows():
    P = small_params()
    x = np.ones(P.n)
    x[: P.n1] = P.d**1.5 + 1.0  # exceeds the n1 -> n2 drop, no earlier jump triggers
    assert classify(x, P).label == "T1"
    # the n2 -> n3 window needs n2 < n3, so raise the tail anchor fraction
    P2 = derive_params(2000, 20, 2, overrides={"p_factor": 1.0, "a3": "1/4"})
    assert P2.n2 < P2.n3
    x = np.ones(P2.n)
    x[: P2.n2] = P2.d**1.5 + 1.0
    assert classify(x, P2).label == "T2"


def test_classify_gradual_sample():
    P = split_params()
    rng = np.random.default_rng(1)
    g = np.sort(rng.uniform(1.0, 3.0, P.n))
    v = classify(g, P)
    assert v.label == "none" and not v.almost_constant and v.gradual


def reference_steep_label(x, P):
    """Literal transcription of the precedence chain, for cross-checking."""
    xs = np.sort(np.abs(np.asarray(x, dtype=np.complex128)))[::-1]
    n = P.n
    pr0 = P.p**P.r0
    if any(xs[i - 1] > (n / i) ** 3 * xs[pr0 - 1] for i in range(1, pr0 + 1)):
        return "T3"
    for lvl in range(P.r0, P.r):
        if xs[P.p**lvl - 1] > 4 * P.d * xs[P.p ** (lvl + 1) - 1]:
            return f"T0({lvl})"
    if xs[-(-P.n1 // P.p) - 1] > 4 * P.d * xs[P.n1 - 1]:
        return f"T0({P.r})"
    if xs[P.n1 - 1] > P.d**1.5 * xs[P.n2 - 1]:
        return "T1"
    if xs[P.n2 - 1] > P.d**1.5 * xs[P.n3 - 1]:
        return "T2"
    return "none"


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**6), spikes=st.integers(0, 30), scale=st.floats(1.0, 1e6))
def test_classify_matches_reference_chain(seed, spikes, scale):
    P = small_params()
    rng = np.random.default_rng(seed)
    x = rng.exponential(1.0, P.n)
    idx = rng.choice(P.n, size=spikes, replace=False) if spikes else []
    x[idx] *= scale
    v = classify(x, P)
    if v.degenerate_tail:
        return
    assert v.label == reference_steep_label(x, P)


# ------------------------------------------------------------- sparse gauge


def test_weak13_norm_values():
    n = 50
    e = np.zeros(n)
    e[7] = 1.0
    assert weak13_norm(e, 1) == pytest.approx(1 / n**3)
    assert weak13_norm(np.zeros(n), 3) == 0.0
    # profile i -> n^3 / i^3 has every rank contributing exactly 1
    x = np.array([n**3 / i**3 for i in range(1, n + 1)])
    assert weak13_norm(x, 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        weak13_norm(e, 0)
    with pytest.raises(ValueError):
        weak13_norm(e, n + 1)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_weak13_sparse_approximation_characterization(seed):
    # top-heavy vectors are exactly those sup-approximable by (m)-sparse
    # vectors within the weak gauge, m one below the first scale rank
    P = small_params()
    m = P.p**P.r0 - 1
    rng = np.random.default_rng(seed)
    y = rng.exponential(1.0, P.n) * rng.choice([1.0, 60.0], P.n, p=[0.97, 0.03])
    ystar = np.sort(np.abs(y))[::-1]
    if ystar[P.n3 - 1] == 0:
        return
    in_t3 = classify(y, P).steep_class == "T3"
    sparse_approx = ystar[m] < weak13_norm(y, m)
    assert in_t3 == sparse_approx


# ------------------------------------------------------- constant witnesses


def test_witness_constant_and_near_constant():
    P = small_params()
    w = almost_constant_witness(np.ones(P.n), 0.05, P)
    assert w is not None and w.lambda0 == 1.0 and w.count == P.n
    x = np.ones(P.n)
    x[0] = 1.0 + 0.025  # theta/2 bump stays inside the tube
    w = almost_constant_witness(x, 0.05, P)
    assert w is not None and abs(w.lambda0 - 1.0) <= 0.05
    assert w.count == P.n


def test_witness_spread_vector_has_none():
    P = small_params()
    x = np.linspace(1.0, 2.0, P.n)
    assert almost_constant_witness(x, 1e-4, P) is None


def test_witness_count_is_exact():
    P = small_params()
    rng = np.random.default_rng(3)
    x = np.ones(P.n)
    out = rng.choice(P.n, size=P.n3 - 1, replace=False)
    x[out] = 50.0  # just under the allowed number of escapees
    w = almost_constant_witness(x, 0.05, P)
    assert w is not None
    scale = np.sort(np.abs(x))[::-1][P.n3 - 1]
    dist = np.abs(x - w.lambda0)
    assert w.count == int(np.sum(dist <= 0.05 * scale))
    assert np.array_equal(np.sort(w.indices), np.flatnonzero(dist <= w.radius))
    assert w.count > P.n - P.n3
    # magnitude of the center is pinned near the tail anchor
    assert (1 - 0.05) * scale <= abs(w.lambda0) <= (1 + 0.05) * scale


def test_witness_complex_center():
    P = small_params()
    rng = np.random.default_rng(4)
    center = 1.0 + 2.0j
    x = np.full(P.n, center, dtype=np.complex128)
    x += 0.001 * (rng.standard_normal(P.n) + 1j * rng.standard_normal(P.n))
    w = almost_constant_witness(x, 0.05, P)
    assert w is not None and abs(w.lambda0 - center) < 0.01


def test_witness_degenerate_tail_majority_value():
    P = small_params()
    x = np.zeros(P.n)
    x[:3] = 7.0  # tail anchor is zero: ball degenerates to exact equality
    w = almost_constant_witness(x, 0.05, P)
    assert w is not None and w.lambda0 == 0.0 and w.count == P.n - 3


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), outliers=st.integers(0, 4))
def test_witness_completeness_for_planted_tubes(seed, outliers):
    # plant a genuine witness at less than half the requested radius: the
    # median candidate must then succeed
    P = small_params()
    rng = np.random.default_rng(seed)
    lam = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
    if abs(lam) < 0.1:
        lam += 0.5
    x = np.full(P.n, lam)
    x += (rng.uniform(-1, 1, P.n) + 1j * rng.uniform(-1, 1, P.n)) * abs(lam) * 0.004
    idx = rng.choice(P.n, size=outliers, replace=False) if outliers else []
    x[idx] = lam * 3.0
    w = almost_constant_witness(x, 0.05, P)
    assert w is not None
    scale = np.sort(np.abs(x))[::-1][P.n3 - 1]
    assert np.sum(np.abs(x - w.lambda0) <= 0.05 * scale) > P.n - P.n3


# ------------------------------------------------------- constant splitting


def test_split_requires_window():
    P = split_params()
    with pytest.raises(ValueError):
        split_shifted(np.ones(P.n), 11, P)  # t too small
    wide = derive_params(2000, 20, 2, overrides={"p_factor": 1.0, "a3": "1/4"})
    with pytest.raises(ValueError):
        split_shifted(np.ones(wide.n), 12, wide)  # a3 * t too large
    with pytest.raises(ValueError):
        split_shifted(np.linspace(0.0, 1.0, P.n), 12, P)  # not almost constant


def test_split_flat_vector_is_kept_whole():
    P = split_params()
    assert split_shifted(np.ones(P.n), 12, P) is None


def test_split_extracts_steep_part():
    P = split_params()
    x = np.ones(P.n)
    x[: P.n0] += np.linspace(150.0, 130.0, P.n0)
    w, c = split_shifted(x, 12, P)
    assert c == pytest.approx(1.0)
    assert np.allclose(w + c, x)
    assert classify(w, P).steep_class != "none"
    wstar = np.sort(np.abs(w))[::-1]
    assert abs(c) <= wstar[P.n1 - 1] / 10 + 1e-9
    # same split with a faint rough tail so the steep part is non-degenerate
    rng = np.random.default_rng(7)
    x = np.ones(P.n) + 1e-8 * rng.uniform(0.5, 1.0, P.n)
    x[: P.n0] += np.linspace(150.0, 130.0, P.n0)
    w, c = split_shifted(x, 12, P)
    v = classify(w, P)
    assert v.steep_class != "none" and not v.degenerate_tail


def test_split_degenerate_tail_rejected():
    P = split_params()
    x = np.concatenate([np.ones(3), np.zeros(P.n - 3)])
    with pytest.raises(ValueError):
        split_shifted(x, 12, P)


# ----------------------------------------------------------- decay envelope


def test_decay_empty_outside_steep_classes():
    P = split_params()
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = rng.uniform(1.0, 3.0, P.n)
        if classify(x, P).steep_class == "none":
            assert decay_check(x, P) == []


def test_decay_violations_reported():
    P = split_params()
    x = np.full(P.n, 1e-16)
    x[:10] = 1.0
    viol = decay_check(x, P)
    assert viol, "flat-then-cliff profile must violate the envelope"
    fams = {f for f, *_ in viol}
    assert "mid" in fams and "tail" in fams
    for fam, rank, lhs, rhs in viol:
        assert lhs > rhs


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_decay_holds_for_all_non_steep(seed):
    P = small_params()
    rng = np.random.default_rng(seed)
    x = rng.exponential(1.0, P.n) * rng.choice([1.0, 25.0], P.n, p=[0.9, 0.1])
    v = classify(x, P)
    if v.steep_class == "none" and not v.degenerate_tail:
        assert decay_check(x, P) == []


# --------------------------------------------------------- level dichotomy


def test_many_levels_linear_profile_ball_holds():
    P = split_params()
    n = P.n
    x = np.arange(1, n + 1) / n
    anchor = np.sort(x)[::-1][P.n3 - 1]
    v = many_levels_verdict(x, rho=1 / (2.1 * n * anchor), delta=2.5 / n, q=4, P=P)
    assert v.ball_ok is True
    assert v.ball_upper <= v.ball_limit


def test_many_levels_spike_is_very_steep():
    P = split_params()
    e1 = np.zeros(P.n)
    e1[0] = 1.0
    v = many_levels_verdict(e1, rho=0.5, delta=0.5, q=2, P=P)
    assert v.very_steep


def test_many_levels_constant_ball_fails():
    P = split_params()
    v = many_levels_verdict(np.ones(P.n), rho=0.5, delta=0.5, q=4, P=P)
    assert v.ball_ok is False
    assert v.ball_lower == P.n


def test_many_levels_variant_flags():
    P = split_params()
    rng = np.random.default_rng(13)
    g = rng.uniform(1.0, 3.0, P.n)
    v = many_levels_verdict(g, rho=1e-6, delta=0.9, q=P.p, P=P)
    assert v.variant_decay_ok  # smooth profile obeys all three regimes
    assert v.to_json_obj()["variant_decay_ok"] is True
    with pytest.raises(ValueError):
        many_levels_verdict(g, rho=0.0, delta=0.5, q=4, P=P)
    with pytest.raises(ValueError):
        many_levels_verdict(g, rho=0.5, delta=0.5, q=0, P=P)


@settings(max_examples=80, deadline=None)
@given(
    vals=st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=60),
    radius=st.floats(0.01, 3.0),
)
def test_ball_bracket_encloses_true_count(vals, radius):
    x = np.array(vals)
    lower, upper = max_ball_counts(x, radius)
    # exact 1-d answer by sweeping intervals anchored at left endpoints
    s = np.sort(x)
    exact = max(
        int(np.searchsorted(s, v + 2 * radius, side="right") - i) for i, v in enumerate(s)
    )
    assert lower <= exact <= upper


@settings(max_examples=60, deadline=None)
@given(
    vals=st.lists(
        st.complex_numbers(max_magnitude=5, allow_nan=False), min_size=3, max_size=40
    ),
    radius=st.floats(0.01, 3.0),
)
def test_ball_bracket_complex(vals, radius):
    x = np.array(vals, dtype=np.complex128)
    lower, upper = max_ball_counts(x, radius)
    # coordinate-centered counts are admissible centers, so `lower` is a true
    # lower bound; any ball meeting a coordinate sits inside its double
    brute = max(int(np.sum(np.abs(x - c) <= radius)) for c in x)
    assert lower == brute
    assert upper >= lower


# ---------------------------------------------- flat-tube lower bound check


def test_shifted_action_on_flat_tube_vectors():
    # near-constant vectors that keep some mass at the small-rank anchor are
    # pushed to norm at least d sqrt(n) / (2 sqrt 2) by every regular matrix
    P = derive_params(2000, 20, 1, overrides={"p_factor": 1.0})
    n, d = P.n, P.d
    rng = np.random.default_rng(5)
    theta, t = 1 / 20, 12
    assert float(P.a3) * t <= 1 / 100
    for trial in range(10):
        offs = rng.choice(np.arange(1, n), size=d - 1, replace=False)
        M = circulant(n, d, [0, *offs])
        x = 1.0 + theta * 0.9 * rng.uniform(-1, 1, n)
        scale = np.sort(np.abs(x))[::-1][P.n3 - 1]
        assert almost_constant_witness(x, theta, P) is not None
        assert np.sort(np.abs(x))[::-1][P.n0 - 1] <= t * scale
        z = complex(rng.uniform(-d / 5, d / 5) * 0.7, rng.uniform(-d / 5, d / 5) * 0.7)
        keep = rng.choice(n, size=n - rng.integers(0, n // 4), replace=False)
        K = RowMask(n, np.sort(keep))
        norm = np.linalg.norm(shifted_apply(M, z, K, x))
        assert norm >= d * np.sqrt(n) / (2 * np.sqrt(2)) * scale


# ------------------------------------------------------------------- files


def test_vector_csv_round_trip(tmp_path):
    path = tmp_path / "vec.csv"
    x = np.array([1.5, -2.25, 0.0])
    write_vector_csv(path, x)
    back = read_vector_csv(path)
    assert back.dtype == np.float64
    assert np.array_equal(back, x)
    z = np.array([1 + 2j, -0.5 - 0.25j])
    write_vector_csv(path, z)
    assert np.array_equal(read_vector_csv(path), z)
    text = path.read_text()
    assert text.splitlines()[0] == "1.0,2.0"


def test_vector_csv_rejects_garbage(tmp_path):
    path = tmp_path / "vec.csv"
    path.write_text("1.0,2.0,3.0\n")
    with pytest.raises(ValueError):
        read_vector_csv(path)
    path.write_text("")
    with pytest.raises(ValueError):
        read_vector_csv(path)
