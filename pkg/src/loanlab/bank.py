"""Model primitives: CARA utility, Weibull-type default hazard, Taylor-type
funding rule, and the per-outcome real-profit and marginal integrands the
pricing objective integrates over.

Everything here is a pure, stateless function of its inputs and vectorizes
over the inflation argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Union

import numpy as np


class MacroState(IntEnum):
    NORMAL = 0
    ADVERSE = 1


Macro = Union[MacroState, int]


@dataclass(frozen=True)
class HazardParameters:
    """Default probability 1 - exp(-(r/s)^kappa), s = s0*exp(a_pi*pi - a_x*x)."""

    s0: float = 0.07
    kappa: float = 2.5
    a_pi: float = 0.5
    a_x: float = 0.4

    def __post_init__(self):
        if self.s0 <= 0.0:
            raise ValueError(f"hazard scale s0 must be > 0, got {self.s0}")
        if self.kappa <= 1.0:
            raise ValueError(f"hazard shape kappa must be > 1, got {self.kappa}")
        if self.a_pi <= 0.0:
            raise ValueError(f"inflation sensitivity a_pi must be > 0, got {self.a_pi}")
        if self.a_x <= 0.0:
            raise ValueError(f"macro sensitivity a_x must be > 0, got {self.a_x}")


@dataclass(frozen=True)
class FundingRule:
    """Deposit rate r_star + rho_pi*(pi - pi_star), affine in inflation."""

    r_star: float = 0.03
    rho_pi: float = 0.5
    pi_star: float = 0.02

    def __post_init__(self):
        if self.rho_pi <= 0.0:
            raise ValueError(f"pass-through rho_pi must be > 0, got {self.rho_pi}")


@dataclass(frozen=True)
class CostStructure:
    theta: float = 0.0  # non-remunerated reserve ratio
    c: float = 0.0      # per-loan operating cost

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise ValueError(f"reserve ratio theta must be in [0, 1), got {self.theta}")
        if self.c < 0.0:
            raise ValueError(f"per-loan cost c must be >= 0, got {self.c}")


@dataclass(frozen=True)
class BankParameters:
    gamma_u: float = 5.0
    hazard: HazardParameters = field(default_factory=HazardParameters)
    funding: FundingRule = field(default_factory=FundingRule)
    costs: CostStructure = field(default_factory=CostStructure)
    eta: float = 5e3  # ambiguity coefficient; see pricing.objective

    def __post_init__(self):
        if self.gamma_u <= 0.0:
            raise ValueError(f"utility curvature gamma_u must be > 0, got {self.gamma_u}")
        if self.eta < 0.0:
            raise ValueError(f"ambiguity coefficient eta must be >= 0, got {self.eta}")

    def as_dict(self) -> dict:
        return {
            "gamma_u": self.gamma_u,
            "s0": self.hazard.s0,
            "kappa": self.hazard.kappa,
            "a_pi": self.hazard.a_pi,
            "a_x": self.hazard.a_x,
            "r_star": self.funding.r_star,
            "rho_pi": self.funding.rho_pi,
            "pi_star": self.funding.pi_star,
            "theta": self.costs.theta,
            "c": self.costs.c,
            "eta": self.eta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BankParameters":
        base = cls()
        ref = base.as_dict()
        vals = {k: float(d.get(k, ref[k])) for k in ref}
        return cls(
            gamma_u=vals["gamma_u"],
            hazard=HazardParameters(vals["s0"], vals["kappa"], vals["a_pi"], vals["a_x"]),
            funding=FundingRule(vals["r_star"], vals["rho_pi"], vals["pi_star"]),
            costs=CostStructure(vals["theta"], vals["c"]),
            eta=vals["eta"],
        )


def _check_x(x: Macro) -> int:
    xi = int(x)
    if xi not in (0, 1):
        raise ValueError(f"macro state must be 0 or 1, got {x}")
    return xi


def _check_pi(pi):
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= -1.0):
        raise ValueError("inflation at or below -100% makes the deflator degenerate")
    return pi


def deposit_rate(p: BankParameters, pi):
    """Funding cost under the Taylor-type rule; affine in inflation."""
    f = p.funding
    return f.r_star + f.rho_pi * (np.asarray(pi, dtype=float) - f.pi_star)


def hazard_scale(p: BankParameters, pi, x: Macro):
    h = p.hazard
    return h.s0 * np.exp(h.a_pi * np.asarray(pi, dtype=float) - h.a_x * _check_x(x))


def hazard_inflection(p: BankParameters, pi, x: Macro):
    """Rate below which the default probability is convex in the loan rate."""
    k = p.hazard.kappa
    return hazard_scale(p, pi, x) * ((k - 1.0) / k) ** (1.0 / k)


def default_prob(p: BankParameters, r_l: float, pi, x: Macro):
    """P(default | loan rate, inflation, macro state); 0 at r_l = 0, -> 1 as r_l grows."""
    if np.any(np.asarray(r_l) < 0.0):
        raise ValueError(f"loan rate must be >= 0, got {r_l}")
    s = hazard_scale(p, pi, x)
    return 1.0 - np.exp(-((r_l / s) ** p.hazard.kappa))


def default_prob_dr(p: BankParameters, r_l: float, pi, x: Macro):
    """Closed-form derivative of the default probability in the loan rate."""
    if np.any(np.asarray(r_l) < 0.0):
        raise ValueError(f"loan rate must be >= 0, got {r_l}")
    k = p.hazard.kappa
    s = hazard_scale(p, pi, x)
    z = (r_l / s) ** k
    return np.exp(-z) * k * np.asarray(r_l, dtype=float) ** (k - 1.0) / s**k


def utility(p: BankParameters, w):
    """CARA utility (1 - exp(-gamma*w))/gamma; U(0) = 0, U'(0) = 1."""
    g = p.gamma_u
    return -np.expm1(-g * np.asarray(w, dtype=float)) / g


def utility_prime(p: BankParameters, w):
    return np.exp(-p.gamma_u * np.asarray(w, dtype=float))


def utility_second(p: BankParameters, w):
    return -p.gamma_u * np.exp(-p.gamma_u * np.asarray(w, dtype=float))


def real_profit(p: BankParameters, r_l: float, pi, x: Macro, augmented: bool = False):
    """Expected utility of real profit at one inflation outcome.

    Repayment pays the deflated margin, default loses the deflated funding
    cost.  The augmented variant subtracts the deflated reserve-and-cost drag
    as an additive term after the utility, so its loan-rate derivative is
    identical to the plain variant by construction.
    """
    pi = _check_pi(pi)
    rd = deposit_rate(p, pi)
    defl = 1.0 + pi
    prob = default_prob(p, r_l, pi, x)
    value = (1.0 - prob) * utility(p, (r_l - rd) / defl) + prob * utility(p, -rd / defl)
    if augmented:
        value = value - (p.costs.theta * rd + p.costs.c) / defl
    return value


def marginal_integrand(p: BankParameters, pi, r_l: float, x: Macro):
    """Derivative of real_profit in the loan rate, in closed form."""
    pi = _check_pi(pi)
    rd = deposit_rate(p, pi)
    defl = 1.0 + pi
    prob = default_prob(p, r_l, pi, x)
    w_repay = (r_l - rd) / defl
    gap = utility(p, -rd / defl) - utility(p, w_repay)
    margin = (1.0 - prob) / defl * utility_prime(p, w_repay)
    return default_prob_dr(p, r_l, pi, x) * gap + margin
