"""Belief families, transforms, quadrature, and the skew-order check."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loanlab.beliefs import (
    BeliefError,
    DiscreteGrid,
    Gaussian,
    QuadratureError,
    SecondOrderMeasure,
    TwoPieceNormal,
    belief_from_config,
    belief_to_config,
    check_sk_order,
    expectation,
    make_test_library,
    moments,
    mps_dilate,
    pdf,
    skew_shift,
    support,
)
from conftest import random_belief


def trapezoid_moments(belief, n=400_001):
    """Independent dense-grid oracle for the first three moments."""
    if isinstance(belief, DiscreteGrid):
        pts = np.asarray(belief.points)
        prb = np.asarray(belief.probs)
        m = float(np.sum(pts * prb))
        var = float(np.sum(prb * (pts - m) ** 2))
        m3 = float(np.sum(prb * (pts - m) ** 3))
        return m, var, m3
    lo, hi = support(belief)
    x = np.linspace(lo, hi, n)
    w = pdf(belief, x)
    z = np.trapezoid(w, x)
    m = np.trapezoid(w * x, x) / z
    var = np.trapezoid(w * (x - m) ** 2, x) / z
    m3 = np.trapezoid(w * (x - m) ** 3, x) / z
    return float(m), float(var), float(m3)


# ---------------------------------------------------------------------------
# moments


def test_gaussian_moments_closed_form():
    m, v, s = moments(Gaussian(0.02, 0.01))
    assert m == 0.02
    assert v == pytest.approx(1e-4, abs=0)
    assert s == 0.0


def test_two_point_grid_moments():
    m, v, _ = moments(DiscreteGrid((0.0, 0.04), (0.5, 0.5)))
    assert m == pytest.approx(0.02, abs=1e-15)
    assert v == pytest.approx(4e-4, abs=1e-18)


def test_two_piece_normal_positive_skew_vs_oracle():
    b = TwoPieceNormal(0.02, 0.005, 0.015)
    m, v, s = moments(b)
    om, ov, om3 = trapezoid_moments(b)
    assert s > 0.0
    assert m == pytest.approx(om, abs=1e-9)
    assert v == pytest.approx(ov, rel=1e-7)
    assert s == pytest.approx(om3 / ov**1.5, rel=1e-6)


def test_moments_match_oracle_across_random_corpus():
    rng = np.random.default_rng(7)
    for _ in range(30):
        b = random_belief(rng)
        m, v, s = moments(b)
        om, ov, om3 = trapezoid_moments(b)
        assert m == pytest.approx(om, abs=1e-9)
        assert v == pytest.approx(ov, rel=1e-6, abs=1e-14)


# ---------------------------------------------------------------------------
# mps_dilate


def test_dilate_identity():
    b = Gaussian(0.02, 0.01)
    assert mps_dilate(b, 1.0) == b


def test_dilate_gaussian_scales_sd():
    assert mps_dilate(Gaussian(0.02, 0.01), 2.0) == Gaussian(0.02, 0.02)


def test_dilate_grid_preserves_mean_scales_variance():
    b = DiscreteGrid((0.0, 0.02, 0.05), (0.3, 0.4, 0.3))
    out = mps_dilate(b, 1.5)
    m0, v0, _ = trapezoid_moments(b)
    m1, v1, _ = trapezoid_moments(out)
    assert m1 == pytest.approx(m0, abs=1e-12)
    assert v1 == pytest.approx(2.25 * v0, rel=1e-10)
    assert out.probs == b.probs


def test_dilate_rejects_contraction():
    with pytest.raises(BeliefError):
        mps_dilate(Gaussian(0.02, 0.01), 0.9)


def test_dilate_contract_over_seeded_corpus():
    rng = np.random.default_rng(42)
    for _ in range(100):
        b = random_belief(rng)
        m0, v0, _ = moments(b)
        for s in (1.25, 1.5, 2.0):
            out = mps_dilate(b, s)
            m1, v1, _ = moments(out)
            assert abs(m1 - m0) < 1e-10
            assert v1 / v0 == pytest.approx(s**2, rel=1e-8)


@settings(max_examples=50, deadline=None)
@given(
    mean=st.floats(-0.02, 0.06),
    sd=st.floats(0.001, 0.05),
    s=st.floats(1.0, 3.0),
)
def test_dilate_gaussian_property(mean, sd, s):
    out = mps_dilate(Gaussian(mean, sd), s)
    assert out.mean == mean
    assert out.sd == pytest.approx(s * sd, rel=1e-15)


# ---------------------------------------------------------------------------
# skew_shift


def test_skew_shift_zero_is_identity():
    b = DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25))
    assert skew_shift(b, 0.0) is b


def test_skew_shift_symmetric_grid_turns_positive():
    b = DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25))
    out = skew_shift(b, 0.2)
    m0, _, _ = trapezoid_moments(b)
    m1, v1, m3 = trapezoid_moments(out)
    assert m1 == pytest.approx(m0, abs=1e-10)
    assert m3 / v1**1.5 > 0.0


def test_skew_shift_grid_third_moment_increases_in_lambda():
    b = DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25))
    third = []
    for lam in (0.0, 0.1, 0.2, 0.4):
        _, v, s = moments(skew_shift(b, lam))
        third.append(s * v**1.5)
    assert np.all(np.diff(third) > 0.0)


def test_skew_shift_two_piece_mean_fixed_and_third_moment_up():
    b = TwoPieceNormal(0.02, 0.01, 0.01)
    m0, _, _ = trapezoid_moments(b)
    last_m3 = -np.inf
    for lam in (0.1, 0.3, 0.6):
        out = skew_shift(b, lam)
        assert out.sd_right > b.sd_right and out.sd_left < b.sd_left
        m1, v1, m3 = trapezoid_moments(out)
        assert m1 == pytest.approx(m0, abs=1e-10)
        assert m3 > last_m3
        last_m3 = m3


def test_skew_shift_rejections():
    with pytest.raises(BeliefError):
        skew_shift(Gaussian(0.02, 0.01), 0.1)  # family not supported
    with pytest.raises(BeliefError):
        skew_shift(DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25)), -0.1)
    with pytest.raises(BeliefError):
        # lam > 1 would drive the source probability negative
        skew_shift(DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25)), 1.2)


# ---------------------------------------------------------------------------
# check_sk_order


def test_order_self_holds_weakly():
    b = DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25))
    verdict = check_sk_order(b, b)
    assert verdict.holds and not verdict.strict and verdict.witness is None


def test_order_holds_for_skew_shifted_grids_exhaustively():
    """Every 3-point grid on a small lattice, every shift level."""
    import itertools

    lows, mids, highs = (-0.01, 0.0), (0.015, 0.02, 0.03), (0.04, 0.05)
    prob_sets = ((0.25, 0.5, 0.25), (0.2, 0.6, 0.2), (0.3, 0.4, 0.3))
    for lo, mid, hi in itertools.product(lows, mids, highs):
        for probs in prob_sets:
            base = DiscreteGrid((lo, mid, hi), probs)
            for lam in (0.05, 0.1, 0.2, 0.5):
                verdict = check_sk_order(base, skew_shift(base, lam))
                assert verdict.holds, f"{base} lam={lam}: {verdict}"
                assert verdict.strict


def test_order_rejects_mean_mismatch():
    with pytest.raises(BeliefError):
        check_sk_order(Gaussian(0.02, 0.01), Gaussian(0.03, 0.01))


def test_order_fails_with_witness_in_reverse_direction():
    base = DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25))
    shifted = skew_shift(base, 0.3)
    verdict = check_sk_order(shifted, base)
    assert not verdict.holds
    assert verdict.witness is not None
    assert verdict.max_violation > 0.0


def test_test_library_functions_are_non_increasing_concave():
    lib = make_test_library(-0.05, 0.1, count=50, seed=3)
    x = np.linspace(-0.1, 0.15, 400)
    for g in lib:
        y = g(x)
        dy = np.diff(y)
        assert np.all(dy <= 1e-12), "must be non-increasing"
        assert np.all(np.diff(dy) <= 1e-12), "must be concave"


# ---------------------------------------------------------------------------
# expectation


def test_expectation_normalization_and_mean():
    b = Gaussian(0.02, 0.01)
    assert expectation(b, lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-14)
    assert expectation(b, lambda x: x) == pytest.approx(0.02, abs=1e-14)


def test_expectation_second_moment_closed_form():
    b = Gaussian(0.02, 0.01)
    assert expectation(b, lambda x: x**2) == pytest.approx(5e-4, rel=1e-12)


def test_expectation_exact_for_polynomials():
    # Gauss-Hermite with n nodes integrates polynomials up to degree 2n-1
    b = Gaussian(0.01, 0.02)
    mu, sd = 0.01, 0.02
    # E[(x - mu)^6] = 15 sd^6 for a Gaussian
    got = expectation(b, lambda x: (x - mu) ** 6, n=8)
    assert got == pytest.approx(15.0 * sd**6, rel=1e-12)


def test_expectation_linearity():
    b = TwoPieceNormal(0.01, 0.008, 0.012)
    f = lambda x: np.sin(50.0 * x)
    g = lambda x: x**2
    lhs = expectation(b, lambda x: 2.0 * f(x) + 3.0 * g(x))
    rhs = 2.0 * expectation(b, f) + 3.0 * expectation(b, g)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_expectation_node_doubling_converges():
    for b in (Gaussian(0.02, 0.01), TwoPieceNormal(0.02, 0.005, 0.015)):
        h = lambda x: np.exp(3.0 * x) + x**3
        assert abs(expectation(b, h, 64) - expectation(b, h, 128)) < 1e-9


def test_expectation_exact_summation_for_grids():
    b = DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25))
    got = expectation(b, lambda x: x**2)
    assert got == pytest.approx(0.25 * 0.0 + 0.5 * 0.02**2 + 0.25 * 0.04**2, abs=0)


def test_expectation_reports_bad_node():
    b = Gaussian(0.02, 0.01)
    with pytest.raises(QuadratureError, match="non-finite"):
        expectation(b, lambda x: np.where(x > 0.02, np.inf, 1.0))


def test_expectation_rejects_few_nodes():
    with pytest.raises(ValueError):
        expectation(Gaussian(0.02, 0.01), lambda x: x, n=4)


# ---------------------------------------------------------------------------
# construction invariants, measure, serialization


def test_grid_validation():
    with pytest.raises(BeliefError):
        DiscreteGrid((0.02, 0.0), (0.5, 0.5))  # not increasing
    with pytest.raises(BeliefError):
        DiscreteGrid((0.0, 0.02), (0.7, 0.7))  # sum != 1
    with pytest.raises(BeliefError):
        DiscreteGrid((0.0, 0.02), (-0.1, 1.1))  # negative
    with pytest.raises(BeliefError):
        Gaussian(0.02, 0.0)
    with pytest.raises(BeliefError):
        TwoPieceNormal(0.02, 0.01, -0.01)


def test_grid_from_csv(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("point,prob\n0.0,0.25\n0.02,0.5\n0.04,0.25\n")
    b = DiscreteGrid.from_csv(path)
    assert b.points == (0.0, 0.02, 0.04)
    assert b.probs == (0.25, 0.5, 0.25)


def test_measure_validation_and_map():
    with pytest.raises(BeliefError):
        SecondOrderMeasure(())
    with pytest.raises(BeliefError):
        SecondOrderMeasure(((Gaussian(0.02, 0.01), 0.6), (Gaussian(0.0, 0.01), 0.6)))
    mu = SecondOrderMeasure(((Gaussian(0.02, 0.01), 0.5), (Gaussian(0.0, 0.02), 0.5)))
    wide = mu.map(lambda b: mps_dilate(b, 2.0))
    assert wide.weights == (0.5, 0.5)
    assert wide.beliefs[0].sd == pytest.approx(0.02)


def test_belief_config_round_trip():
    for b in (
        Gaussian(0.02, 0.01),
        TwoPieceNormal(0.015, 0.004, 0.02),
        DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25)),
    ):
        block = belief_to_config(b)
        assert belief_from_config({k: str(v) for k, v in block.items()}) == b


@st.composite
def discrete_grids(draw, max_points=6):
    n = draw(st.integers(2, max_points))
    base = draw(
        st.lists(st.floats(-0.05, 0.10, allow_nan=False), min_size=n, max_size=n,
                 unique=True)
    )
    pts = tuple(sorted(base))
    if min(b - a for a, b in zip(pts, pts[1:])) < 1e-6:
        pts = tuple(p + i * 1e-5 for i, p in enumerate(pts))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    total = sum(raw)
    return DiscreteGrid(pts, tuple(r / total for r in raw))


@settings(max_examples=60, deadline=None)
@given(grid=discrete_grids(), s=st.floats(1.0, 3.0), lam=st.floats(0.0, 1.0))
def test_grid_transform_properties(grid, s, lam):
    m0, v0, _ = moments(grid)
    wide = mps_dilate(grid, s)
    m1, v1, _ = moments(wide)
    assert abs(m1 - m0) < 1e-10
    assert abs(v1 - s**2 * v0) < 1e-10 + 1e-8 * v0
    mid = sorted(grid.points, key=lambda q: abs(q - m0))[0]
    if mid > grid.points[0]:  # a downward neighbour exists for the transfer
        shifted = skew_shift(grid, lam)
        m2, v2, s2 = moments(shifted)
        assert abs(m2 - m0) < 1e-10
        _, _, s0_ = moments(grid)
        if lam > 1e-9:
            assert s2 * v2**1.5 > s0_ * v0**1.5 - 1e-15  # third moment never falls
