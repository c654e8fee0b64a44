"""Desk-scale engine for loan pricing under dispersed subjective inflation
beliefs, plus the matching empirical pipeline on synthetic loan panels."""

__version__ = "0.1.0"

from .bank import BankParameters, CostStructure, FundingRule, HazardParameters, MacroState
from .beliefs import (
    DiscreteGrid,
    Gaussian,
    SecondOrderMeasure,
    TwoPieceNormal,
    check_sk_order,
    expectation,
    moments,
    mps_dilate,
    skew_shift,
)
from .design import Design, build_design
from .mixture import MixtureModel, em_fit, interest_cost_impact, quantile_shift, select_components
from .pricing import (
    MarketConfig,
    SolveReport,
    SolverConfig,
    foc_value,
    objective,
    representative_bank,
    solve_optimal_rate,
    supply_schedule,
)

__all__ = [
    "BankParameters",
    "CostStructure",
    "Design",
    "DiscreteGrid",
    "FundingRule",
    "Gaussian",
    "HazardParameters",
    "MacroState",
    "MarketConfig",
    "MixtureModel",
    "SecondOrderMeasure",
    "SolveReport",
    "SolverConfig",
    "TwoPieceNormal",
    "build_design",
    "check_sk_order",
    "em_fit",
    "expectation",
    "foc_value",
    "interest_cost_impact",
    "moments",
    "mps_dilate",
    "objective",
    "quantile_shift",
    "representative_bank",
    "select_components",
    "skew_shift",
    "solve_optimal_rate",
    "supply_schedule",
]
