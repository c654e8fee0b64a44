"""Executable comparative-statics checks with pass/fail verdicts.

Each check solves the pricing problem along a grid of perturbation levels and
tests the claimed strict ordering of the optimal rates (or of the supply
schedule) at a configurable strictness margin.  Verdicts are reproducible
bit-for-bit for a fixed configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import pricing
from .bank import BankParameters, CostStructure, Macro
from .beliefs import SecondOrderMeasure, check_sk_order, mps_dilate, skew_shift
from .pricing import MarketConfig, SolverConfig

DEFAULT_STRICTNESS = 1e-8


class SkewOrderPrecondition(RuntimeError):
    """The shifted beliefs failed the skewness-order gate; no verdict issued."""


@dataclass(frozen=True)
class StaticsReport:
    proposition: str
    grid: tuple
    r_star_by_level: tuple
    verdict: str          # "pass" | "fail"
    margins: float        # min separation between consecutive optima (or min gap)
    details: dict

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        return {
            "proposition": self.proposition,
            "grid": list(self.grid),
            "r_star_by_level": list(self.r_star_by_level),
            "verdict": self.verdict,
            "margins": self.margins,
            "details": self.details,
        }


def _verdict_from_steps(steps, strictness: float) -> tuple:
    steps = np.asarray(steps, dtype=float)
    if steps.size == 0:
        return "pass", float("inf")
    m = float(steps.min())
    return ("pass" if m > strictness else "fail"), m


def verify_mps_tightening(
    base: SecondOrderMeasure,
    s_grid: Sequence[float],
    p: BankParameters,
    x: Macro = 0,
    ambiguity: bool = False,
    cfg: Optional[SolverConfig] = None,
    strictness: float = DEFAULT_STRICTNESS,
) -> StaticsReport:
    """Optimal rate must rise strictly along a grid of mean-preserving dilations."""
    s_grid = [float(s) for s in s_grid]
    if s_grid[0] != 1.0 or any(b <= a for a, b in zip(s_grid, s_grid[1:])):
        raise ValueError(f"dilation grid must be strictly increasing from 1, got {s_grid}")
    r_stars, errors = [], {}
    for s in s_grid:
        mu = base.map(lambda b: mps_dilate(b, s))
        try:
            r_stars.append(pricing.solve_optimal_rate(mu, p, x, cfg, ambiguity).r_star_loan)
        except (pricing.NoSignChange, pricing.NonConcaveAtRoot) as exc:
            errors[s] = f"{type(exc).__name__}: {exc}"
            r_stars.append(float("nan"))
    steps = np.diff(r_stars)
    if errors:
        verdict, margin = "fail", float("nan")
    else:
        verdict, margin = _verdict_from_steps(steps, strictness)
    return StaticsReport(
        proposition="mps",
        grid=tuple(s_grid),
        r_star_by_level=tuple(r_stars),
        verdict=verdict,
        margins=margin,
        details={"steps": list(steps), "ambiguity": ambiguity, "errors": errors},
    )


def verify_skew_tightening(
    base: SecondOrderMeasure,
    lam_grid: Sequence[float],
    p: BankParameters,
    x: Macro = 0,
    cfg: Optional[SolverConfig] = None,
    strictness: float = DEFAULT_STRICTNESS,
) -> StaticsReport:
    """Optimal rate must rise strictly along a skew-shift grid.

    Consecutive shifted beliefs are first gated through the skewness-order
    check; a gate failure raises SkewOrderPrecondition instead of returning a
    verdict, so ordering failures are never conflated with monotonicity ones.
    """
    lam_grid = [float(v) for v in lam_grid]
    if any(v < 0 for v in lam_grid) or any(b <= a for a, b in zip(lam_grid, lam_grid[1:])):
        raise ValueError(f"shift grid must be nonnegative and strictly increasing, got {lam_grid}")
    shifted = [base.map(lambda b: skew_shift(b, lam)) for lam in lam_grid]
    for lo_mu, hi_mu, lo_l, hi_l in zip(shifted, shifted[1:], lam_grid, lam_grid[1:]):
        for b_lo, b_hi in zip(lo_mu.beliefs, hi_mu.beliefs):
            verdict = check_sk_order(b_lo, b_hi)
            if not verdict.holds:
                raise SkewOrderPrecondition(
                    f"skewness order fails between levels {lo_l} and {hi_l} "
                    f"(violation {verdict.max_violation:.3e})"
                )
    r_stars = [
        pricing.solve_optimal_rate(mu, p, x, cfg).r_star_loan for mu in shifted
    ]
    steps = np.diff(r_stars)
    verdict_str, margin = _verdict_from_steps(steps, strictness)
    return StaticsReport(
        proposition="skew",
        grid=tuple(lam_grid),
        r_star_by_level=tuple(r_stars),
        verdict=verdict_str,
        margins=margin,
        details={"steps": list(steps)},
    )


def verify_rationing(
    base: SecondOrderMeasure,
    s: float,
    p: BankParameters,
    x: Macro = 0,
    market: Optional[MarketConfig] = None,
    r_grid: Optional[Sequence[float]] = None,
    strictness: float = DEFAULT_STRICTNESS,
    quad_nodes: int = 64,
) -> StaticsReport:
    """Under a dilation the supply schedule must sit strictly below the base
    schedule at every grid rate, and the rationing gap strictly above."""
    market = market or MarketConfig()
    if r_grid is None:
        cfg = pricing.default_solver_config(p, x)
        r_grid = np.linspace(cfg.bracket[0], cfg.bracket[1], 50)
    spread = base.map(lambda b: mps_dilate(b, s))
    base_sched = pricing.supply_schedule(base, p, x, r_grid, market, quad_nodes)
    spread_sched = pricing.supply_schedule(spread, p, x, r_grid, market, quad_nodes)
    supply_drop = np.asarray(base_sched.supply) - np.asarray(spread_sched.supply)
    gap_rise = np.asarray(spread_sched.gap) - np.asarray(base_sched.gap)
    margin = float(min(supply_drop.min(), gap_rise.min()))
    verdict = "pass" if margin > strictness else "fail"
    if s == 1.0:
        # identity dilation: schedules coincide, dominance is vacuous
        verdict = "pass" if float(np.max(np.abs(supply_drop))) == 0.0 else "fail"
        margin = 0.0
    return StaticsReport(
        proposition="rationing",
        grid=tuple(float(r) for r in r_grid),
        r_star_by_level=(),
        verdict=verdict,
        margins=margin,
        details={
            "dilation": s,
            "min_supply_drop": float(supply_drop.min()),
            "min_gap_rise": float(gap_rise.min()),
            "base_rationed_points": int(sum(base_sched.rationed)),
            "spread_rationed_points": int(sum(spread_sched.rationed)),
        },
    )


def verify_ambiguity_amplification(
    base: SecondOrderMeasure,
    s: float,
    p: BankParameters,
    x: Macro = 0,
    eta_grid: Sequence[float] = (0.0, 2.5e3, 1e4, 2e4),
    cfg: Optional[SolverConfig] = None,
    slack: float = 1e-10,
) -> StaticsReport:
    """The rate premium a dilation commands must not shrink as ambiguity
    aversion rises.  A configuration-level check, not a theorem."""
    eta_grid = [float(e) for e in eta_grid]
    spread_mu = base.map(lambda b: mps_dilate(b, s))
    deltas, base_rates = [], []
    for eta in eta_grid:
        pe = replace(p, eta=eta)
        amb = eta > 0.0
        r_base = pricing.solve_optimal_rate(base, pe, x, cfg, ambiguity=amb).r_star_loan
        r_spread = pricing.solve_optimal_rate(spread_mu, pe, x, cfg, ambiguity=amb).r_star_loan
        base_rates.append(r_base)
        deltas.append(r_spread - r_base)
    steps = np.diff(deltas)
    verdict = "pass" if np.all(steps >= -slack) else "fail"
    return StaticsReport(
        proposition="ambiguity",
        grid=tuple(eta_grid),
        r_star_by_level=tuple(base_rates),
        verdict=verdict,
        margins=float(steps.min()) if len(steps) else float("inf"),
        details={"dilation": s, "delta_r_star": list(deltas)},
    )


def verify_neutrality(
    mu: SecondOrderMeasure,
    p: BankParameters,
    x: Macro = 0,
    theta_c_grid: Sequence[tuple] = ((0.0, 0.0), (0.0, 0.005), (0.1, 0.0), (0.1, 0.005)),
    r_grid: Optional[Sequence[float]] = None,
    cfg: Optional[SolverConfig] = None,
    rate_tol: float = 1e-9,
    foc_tol: float = 1e-12,
) -> StaticsReport:
    """Reserve requirements and per-loan costs must leave the optimal rate and
    the FOC values unchanged; the augmentation is additive and rate-free."""
    if cfg is None:
        cfg = pricing.default_solver_config(p, x)
    if r_grid is None:
        r_grid = np.linspace(cfg.bracket[0], cfg.bracket[1], 21)
    p0 = replace(p, costs=CostStructure(0.0, 0.0))
    base_report = pricing.solve_optimal_rate(mu, p0, x, cfg)
    base_foc = np.array([pricing.foc_value(mu, p0, r, x, n=cfg.quad_nodes) for r in r_grid])
    r_stars, rate_devs, foc_devs = [], [], []
    for theta, c in theta_c_grid:
        pc = replace(p, costs=CostStructure(theta, c))
        rep = pricing.solve_optimal_rate(mu, pc, x, cfg)
        foc = np.array([pricing.foc_value(mu, pc, r, x, n=cfg.quad_nodes) for r in r_grid])
        r_stars.append(rep.r_star_loan)
        rate_devs.append(abs(rep.r_star_loan - base_report.r_star_loan))
        foc_devs.append(float(np.max(np.abs(foc - base_foc))))
    ok = all(d < rate_tol for d in rate_devs) and all(d < foc_tol for d in foc_devs)
    return StaticsReport(
        proposition="neutrality",
        grid=tuple(theta_c_grid),
        r_star_by_level=tuple(r_stars),
        verdict="pass" if ok else "fail",
        margins=float(max(rate_devs)),
        details={
            "base_r_star": base_report.r_star_loan,
            "max_rate_deviation": float(max(rate_devs)),
            "max_foc_deviation": float(max(foc_devs)),
        },
    )
