"""Comparative-statics verification procedures on the default configuration."""

import numpy as np
import pytest

from loanlab.bank import BankParameters
from loanlab.beliefs import (
    DiscreteGrid,
    Gaussian,
    SecondOrderMeasure,
    TwoPieceNormal,
)
from loanlab.pricing import MarketConfig, expected_utility, solve_optimal_rate
from loanlab.statics import (
    SkewOrderPrecondition,
    verify_ambiguity_amplification,
    verify_mps_tightening,
    verify_neutrality,
    verify_rationing,
    verify_skew_tightening,
)


@pytest.fixture(scope="module")
def p():
    return BankParameters()


@pytest.fixture(scope="module")
def mu():
    return SecondOrderMeasure.point_mass(Gaussian(0.02, 0.01))


@pytest.fixture(scope="module")
def mu2():
    return SecondOrderMeasure(((Gaussian(0.02, 0.007), 0.5), (Gaussian(0.02, 0.018), 0.5)))


@pytest.fixture(scope="module")
def mu_grid():
    return SecondOrderMeasure.point_mass(DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25)))


# ---------------------------------------------------------------------------
# dilation tightening


def test_mps_single_point_grid_passes(p, mu):
    report = verify_mps_tightening(mu, [1.0], p)
    assert report.passed
    assert report.margins == float("inf")


def test_mps_default_grid_passes(p, mu):
    report = verify_mps_tightening(mu, [1.0, 1.25, 1.5, 2.0], p)
    assert report.passed
    assert report.margins > 1e-8
    assert np.all(np.diff(report.r_star_by_level) > 1e-8)


def test_mps_with_ambiguity_passes(p, mu2):
    report = verify_mps_tightening(mu2, [1.0, 1.25, 1.5, 2.0], p, ambiguity=True)
    assert report.passed


def test_mps_grid_validation(p, mu):
    with pytest.raises(ValueError):
        verify_mps_tightening(mu, [1.25, 1.5], p)  # must start at 1
    with pytest.raises(ValueError):
        verify_mps_tightening(mu, [1.0, 1.0], p)  # strictly increasing


def test_mps_records_solver_failures_per_level(p, mu):
    from loanlab.pricing import SolverConfig

    report = verify_mps_tightening(mu, [1.0, 1.5], p, cfg=SolverConfig(bracket=(0.002, 0.004)))
    assert report.verdict == "fail"
    assert report.details["errors"]


# ---------------------------------------------------------------------------
# skew tightening


def test_skew_trivial_grid_passes(p, mu_grid):
    report = verify_skew_tightening(mu_grid, [0.0], p)
    assert report.passed


def test_skew_default_grid_passes(p, mu_grid):
    report = verify_skew_tightening(mu_grid, [0.0, 0.1, 0.2], p)
    assert report.passed
    assert report.margins > 1e-8


def test_skew_gate_failure_raises_not_verdicts(p):
    # the two-piece-normal shift raises the third moment but is not an
    # improvement in the skewness order, so the gate must refuse a verdict
    tpn = SecondOrderMeasure.point_mass(TwoPieceNormal(0.02, 0.01, 0.01))
    with pytest.raises(SkewOrderPrecondition):
        verify_skew_tightening(tpn, [0.0, 0.3], p)


# ---------------------------------------------------------------------------
# rationing


def test_rationing_dominance_on_default_grid(p, mu):
    report = verify_rationing(mu, 1.5, p, market=MarketConfig())
    assert report.passed
    assert report.details["min_supply_drop"] > 0.0
    assert report.details["min_gap_rise"] > 0.0


def test_rationing_identity_dilation(p, mu):
    report = verify_rationing(mu, 1.0, p, market=MarketConfig())
    assert report.passed
    assert report.margins == 0.0


# ---------------------------------------------------------------------------
# ambiguity amplification


def test_ambiguity_amplification_on_defaults(p, mu2):
    report = verify_ambiguity_amplification(mu2, 1.5, p)
    assert report.passed
    deltas = report.details["delta_r_star"]
    assert all(b >= a - 1e-10 for a, b in zip(deltas, deltas[1:]))
    assert deltas[-1] > deltas[0]


def test_eta_zero_level_matches_plain_solver(p, mu2):
    report = verify_ambiguity_amplification(mu2, 1.5, p, eta_grid=[0.0, 1e4])
    plain = solve_optimal_rate(mu2, p, 0).r_star_loan
    assert report.r_star_by_level[0] == pytest.approx(plain, abs=0)


def test_low_utility_atoms_get_more_foc_weight(p, mu2):
    from loanlab.pricing import ambiguity_weight

    r = solve_optimal_rate(mu2, p, 0).r_star_loan
    v_narrow = expected_utility(mu2.beliefs[0], p, r, 0)
    v_wide = expected_utility(mu2.beliefs[1], p, r, 0)
    assert v_wide < v_narrow
    assert ambiguity_weight(v_wide, p.eta) > ambiguity_weight(v_narrow, p.eta)


# ---------------------------------------------------------------------------
# reserve-and-cost neutrality


def test_neutrality_exact_identity_and_default_grid(p, mu):
    report = verify_neutrality(mu, p)
    assert report.passed
    assert report.details["max_rate_deviation"] < 1e-9
    assert report.details["max_foc_deviation"] < 1e-12
    base = report.details["base_r_star"]
    assert report.r_star_by_level[0] == pytest.approx(base, abs=0)  # (0, 0) pair


def test_reports_are_reproducible(p, mu):
    a = verify_mps_tightening(mu, [1.0, 1.5], p)
    b = verify_mps_tightening(mu, [1.0, 1.5], p)
    assert a == b


def test_propositions_hold_under_adverse_macro_state(p, mu, mu_grid):
    assert verify_mps_tightening(mu, [1.0, 1.25, 1.5, 2.0], p, x=1).passed
    assert verify_skew_tightening(mu_grid, [0.0, 0.1, 0.2], p, x=1).passed
    assert verify_rationing(mu, 1.5, p, x=1).passed
