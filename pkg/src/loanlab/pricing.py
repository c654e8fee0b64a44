"""Objective evaluation and the optimal-loan-rate solver.

The first layer averages real profit over one inflation belief; the second
averages (or concavely aggregates, when ambiguity aversion is on) across the
atoms of a second-order measure.  The first-order condition is solved by a
bracketed bisection/secant hybrid that certifies the bracket signs and the
local concavity of the objective at the reported root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import bank
from .bank import BankParameters, Macro
from .beliefs import InflationBelief, SecondOrderMeasure, expectation


class NoSignChange(RuntimeError):
    """The FOC does not show (+, -) signs at the bracket ends."""


class NonConcaveAtRoot(RuntimeError):
    """The objective is not locally concave at the stationary point found."""


@dataclass(frozen=True)
class SolverConfig:
    bracket: tuple = (0.002, 0.054)
    foc_tol: float = 1e-12
    max_iter: int = 200
    quad_nodes: int = 64

    def __post_init__(self):
        lo, hi = self.bracket
        if not 0.0 < lo < hi:
            raise ValueError(f"need 0 < r_lo < r_hi, got {self.bracket}")
        if self.foc_tol > 1e-10:
            raise ValueError(f"foc_tol must be <= 1e-10, got {self.foc_tol}")
        if self.quad_nodes < 32:
            raise ValueError(f"need at least 32 quadrature nodes, got {self.quad_nodes}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


def default_solver_config(p: BankParameters, x: Macro = 0, **kwargs) -> SolverConfig:
    """Bracket capped at 95% of the hazard-convexity inflection at the target rate."""
    hi = 0.95 * float(bank.hazard_inflection(p, p.funding.pi_star, x))
    return SolverConfig(bracket=(0.002, hi), **kwargs)


@dataclass(frozen=True)
class SolveReport:
    r_star_loan: float
    v_at_opt: float
    v2_at_opt: float
    foc_residual: float
    bracket_signs: tuple
    iterations: int

    def __post_init__(self):
        if self.bracket_signs != (1, -1):
            raise ValueError(f"bracket signs must be (+1, -1), got {self.bracket_signs}")
        if not self.v2_at_opt < 0.0:
            raise ValueError(f"objective must be locally concave, got v2={self.v2_at_opt}")

    def as_dict(self) -> dict:
        return {
            "r_star_loan": self.r_star_loan,
            "v_at_opt": self.v_at_opt,
            "v2_at_opt": self.v2_at_opt,
            "foc_residual": self.foc_residual,
            "bracket_signs": list(self.bracket_signs),
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class MarketConfig:
    """Logistic supply of expected utility and linear demand in the rate."""

    s_max: float = 1.0
    kappa_s: float = 200.0
    d0: float = 1.1
    d1: float = 5.0

    def __post_init__(self):
        for name in ("s_max", "kappa_s", "d0", "d1"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")


# ---------------------------------------------------------------------------
# Objective layers


def expected_utility(
    belief: InflationBelief,
    p: BankParameters,
    r_l: float,
    x: Macro,
    n: int = 64,
    augmented: bool = False,
) -> float:
    """Expected utility of real profit under one candidate inflation belief."""
    return expectation(belief, lambda pi: bank.real_profit(p, r_l, pi, x, augmented), n)


def expected_marginal(
    belief: InflationBelief, p: BankParameters, r_l: float, x: Macro, n: int = 64
) -> float:
    """Derivative of expected utility in the loan rate under one belief."""
    return expectation(belief, lambda pi: bank.marginal_integrand(p, pi, r_l, x), n)


def ambiguity_aggregator(v, eta: float):
    """Concave aggregator (1 - exp(-eta*v))/eta, normalized so eta -> 0 gives v."""
    if eta == 0.0:
        return np.asarray(v, dtype=float)
    return -np.expm1(-eta * np.asarray(v, dtype=float)) / eta


def ambiguity_weight(v, eta: float):
    """Derivative of the aggregator; rises as the atom's expected utility falls."""
    return np.exp(-eta * np.asarray(v, dtype=float))


def objective(
    mu: SecondOrderMeasure,
    p: BankParameters,
    r_l: float,
    x: Macro,
    ambiguity: bool = False,
    n: int = 64,
    augmented: bool = False,
) -> float:
    """Second-order objective: weighted (aggregated) atom-level expected utilities.

    Atoms are reduced in ascending index order so repeated runs are
    bit-identical.
    """
    eta = p.eta if ambiguity else 0.0
    total = 0.0
    for belief, w in mu.atoms:
        v = expected_utility(belief, p, r_l, x, n, augmented)
        total += w * float(ambiguity_aggregator(v, eta))
    return total


def foc_value(
    mu: SecondOrderMeasure,
    p: BankParameters,
    r_l: float,
    x: Macro,
    ambiguity: bool = False,
    n: int = 64,
) -> float:
    """Derivative of the second-order objective in the loan rate.

    With ambiguity on, each atom's marginal value is weighted by the
    aggregator slope at that atom's expected utility, which tilts the
    optimality condition toward low-utility scenarios.
    """
    eta = p.eta if ambiguity else 0.0
    total = 0.0
    for belief, w in mu.atoms:
        gi = expected_marginal(belief, p, r_l, x, n)
        if eta > 0.0:
            vi = expected_utility(belief, p, r_l, x, n)
            gi *= float(ambiguity_weight(vi, eta))
        total += w * gi
    return total


def _tilted_foc(
    mu: SecondOrderMeasure, p: BankParameters, r_l: float, x: Macro,
    ambiguity: bool, n: int,
) -> tuple:
    """FOC with the aggregator-slope weights renormalized to sum to one.

    Shares the root of foc_value (the tilt factor is strictly positive) but
    keeps an O(1) scale for any eta, so an absolute residual tolerance stays
    meaningful.  Returns (normalized foc, tilt normalizer).
    """
    eta = p.eta if ambiguity else 0.0
    gs = np.array([expected_marginal(b, p, r_l, x, n) for b in mu.beliefs])
    ws = np.asarray(mu.weights)
    if eta == 0.0:
        return float(ws @ gs), 1.0
    vs = np.array([expected_utility(b, p, r_l, x, n) for b in mu.beliefs])
    log_tilt = np.log(ws) - eta * vs
    top = log_tilt.max()
    tilt = np.exp(log_tilt - top)
    normalizer = float(np.exp(top) * tilt.sum())
    return float((tilt @ gs) / tilt.sum()), normalizer


# ---------------------------------------------------------------------------
# Root solver


def _refine_root(f, lo: float, hi: float, f_lo: float, f_hi: float, tol: float, max_iter: int):
    """Bisection with secant acceleration on a (+, -) bracket.

    Returns (root, residual, iterations).  A secant step is taken when it
    lands inside the bracket and the bracket has at least halved over the
    last two iterations; otherwise a bisection step restores the guaranteed
    contraction (secant alone stagnates when the endpoint magnitudes are
    wildly asymmetric, as under strong ambiguity weighting).
    """
    a, b, fa, fb = lo, hi, f_lo, f_hi
    older_width = math.inf
    prev_width = math.inf
    for i in range(1, max_iter + 1):
        width = b - a
        m = b - fb * (b - a) / (fb - fa)
        if not (a < m < b) or not (width <= 0.5 * older_width):
            m = 0.5 * (a + b)
        fm = f(m)
        if abs(fm) <= tol:
            return m, fm, i
        if fm > 0.0:
            a, fa = m, fm
        else:
            b, fb = m, fm
        older_width, prev_width = prev_width, width
        if (b - a) <= 4.0 * np.finfo(float).eps * max(abs(a), abs(b)):
            if abs(fm) <= tol:
                return m, fm, i
            raise RuntimeError(
                f"bracket collapsed to machine width with residual {fm:.3e} > tol {tol:.1e}"
            )
    raise RuntimeError(f"no convergence to |foc| <= {tol:.1e} in {max_iter} iterations")


def solve_optimal_rate(
    mu: SecondOrderMeasure,
    p: BankParameters,
    x: Macro,
    cfg: Optional[SolverConfig] = None,
    ambiguity: bool = False,
) -> SolveReport:
    """Solve the first-order condition for the optimal loan rate.

    Certifies (+, -) bracket signs, refines to |foc| <= foc_tol, and checks
    local concavity with a central difference of the FOC at the root.
    """
    if cfg is None:
        cfg = default_solver_config(p, x)
    lo, hi = cfg.bracket
    infl = float(bank.hazard_inflection(p, p.funding.pi_star, x))
    if hi > infl:
        raise ValueError(
            f"bracket top {hi} exceeds the hazard-convexity inflection {infl:.6f} "
            "for the active parameters"
        )

    def f(r: float) -> float:
        return _tilted_foc(mu, p, r, x, ambiguity, cfg.quad_nodes)[0]

    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo > 0.0 > f_hi):
        raise NoSignChange(
            f"FOC signs at bracket ends are ({f_lo:+.3e}, {f_hi:+.3e}); need (+, -)"
        )
    tol = cfg.foc_tol
    scale = 1.0
    for _ in range(3):
        try:
            root, _, iters = _refine_root(f, lo, hi, f_lo, f_hi, tol, cfg.max_iter)
        except RuntimeError as exc:
            # the normalized FOC hit its rounding floor before the raw
            # tolerance was met; no float64 root can certify better
            raise RuntimeError(
                f"foc_tol {cfg.foc_tol:.1e} is unattainable here: the ambiguity "
                f"tilt normalizer {scale:.2e} at the stationary point amplifies "
                "rounding noise beyond it; lower eta or relax foc_tol"
            ) from exc
        resid = foc_value(mu, p, root, x, ambiguity, cfg.quad_nodes)
        if abs(resid) <= cfg.foc_tol:
            break
        # tilt normalizer above one: tighten the normalized solve to match
        scale = _tilted_foc(mu, p, root, x, ambiguity, cfg.quad_nodes)[1]
        tol = 0.1 * cfg.foc_tol / max(scale, 1.0)
    else:
        raise RuntimeError(
            f"raw FOC residual {resid:.3e} above tolerance {cfg.foc_tol:.1e}"
        )

    h = 1e-6
    v2 = (
        foc_value(mu, p, root + h, x, ambiguity, cfg.quad_nodes)
        - foc_value(mu, p, root - h, x, ambiguity, cfg.quad_nodes)
    ) / (2.0 * h)
    if not v2 < 0.0:
        raise NonConcaveAtRoot(
            f"second derivative {v2:+.3e} at the stationary point; parameters are "
            "outside the model's validity region"
        )
    v = objective(mu, p, root, x, ambiguity, cfg.quad_nodes)
    return SolveReport(
        r_star_loan=root,
        v_at_opt=v,
        v2_at_opt=v2,
        foc_residual=abs(resid),
        bracket_signs=(1, -1),
        iterations=iters,
    )


# ---------------------------------------------------------------------------
# Supply, demand, rationing


@dataclass(frozen=True)
class RationingSchedule:
    rates: tuple
    supply: tuple
    demand: tuple
    gap: tuple       # demand - supply; positive means rationing
    rationed: tuple  # bool per grid point

    def rows(self) -> list:
        return [
            {"r_l": r, "supply": s, "demand": d, "gap": g, "rationed": bool(f)}
            for r, s, d, g, f in zip(self.rates, self.supply, self.demand, self.gap, self.rationed)
        ]


def supply_schedule(
    mu: SecondOrderMeasure,
    p: BankParameters,
    x: Macro,
    r_grid: Sequence[float],
    market: MarketConfig,
    n: int = 64,
) -> RationingSchedule:
    """Loan supply (logistic in the objective), linear demand, and the gap."""
    rates = [float(r) for r in r_grid]
    supply, demand, gap = [], [], []
    for r in rates:
        v = objective(mu, p, r, x, ambiguity=False, n=n)
        s = market.s_max / (1.0 + math.exp(-market.kappa_s * v))
        d = market.d0 - market.d1 * r
        supply.append(s)
        demand.append(d)
        gap.append(d - s)
    return RationingSchedule(
        rates=tuple(rates),
        supply=tuple(supply),
        demand=tuple(demand),
        gap=tuple(gap),
        rationed=tuple(g > 0.0 for g in gap),
    )


def representative_bank(banks: Sequence[tuple]) -> SecondOrderMeasure:
    """Pool per-bank measures with loan-volume weights into one measure.

    Atom weights are volume-share times within-bank weight; identical beliefs
    are merged (weights summed) in first-occurrence order, so the pooled
    objective is the volume-weighted average of the banks' objectives.
    """
    banks = list(banks)
    if not banks:
        raise ValueError("need at least one bank")
    volumes = [float(v) for v, _ in banks]
    if any(v < 0.0 for v in volumes):
        raise ValueError("loan volumes must be nonnegative")
    total = sum(volumes)
    if total <= 0.0:
        raise ValueError("at least one bank must have positive loan volume")
    pooled: dict = {}
    order: list = []
    for vol, mu in banks:
        share = vol / total
        for belief, w in mu.atoms:
            if belief not in pooled:
                pooled[belief] = 0.0
                order.append(belief)
            pooled[belief] += share * w
    return SecondOrderMeasure(tuple((b, pooled[b]) for b in order))
