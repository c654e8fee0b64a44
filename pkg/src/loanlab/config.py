"""Key-value (INI-style) run configuration with flag overrides.

Sections: [bank] for model parameters, one or more [belief]/[belief:NAME]
sections forming the second-order measure (optional per-atom weight), and
optional [solver] and [market] sections.  Flags win over file values; the
resolved merge is what run manifests record.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Optional

from .bank import BankParameters
from .beliefs import Gaussian, SecondOrderMeasure, belief_from_config, belief_to_config
from .pricing import MarketConfig, SolverConfig

DEFAULT_MEASURE = SecondOrderMeasure.point_mass(Gaussian(0.02, 0.01))
# Two plausible models of differing spread: the measure used when a check
# needs genuine model uncertainty (a point mass makes ambiguity inert).
DEFAULT_AMBIGUITY_MEASURE = SecondOrderMeasure(
    ((Gaussian(0.02, 0.007), 0.5), (Gaussian(0.02, 0.018), 0.5))
)


@dataclass
class RunConfig:
    bank: BankParameters
    measure: SecondOrderMeasure
    solver: Optional[SolverConfig]
    market: MarketConfig

    def as_dict(self) -> dict:
        atoms = []
        for belief, weight in self.measure.atoms:
            block = belief_to_config(belief)
            block["weight"] = weight
            atoms.append(block)
        d = {
            "bank": self.bank.as_dict(),
            "measure": atoms,
            "market": {
                "s_max": self.market.s_max,
                "kappa_s": self.market.kappa_s,
                "d0": self.market.d0,
                "d1": self.market.d1,
            },
        }
        if self.solver is not None:
            d["solver"] = {
                "r_lo": self.solver.bracket[0],
                "r_hi": self.solver.bracket[1],
                "foc_tol": self.solver.foc_tol,
                "max_iter": self.solver.max_iter,
                "quad_nodes": self.solver.quad_nodes,
            }
        return d


def default_run_config() -> RunConfig:
    return RunConfig(
        bank=BankParameters(),
        measure=DEFAULT_MEASURE,
        solver=None,
        market=MarketConfig(),
    )


def load_run_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file {path} not found or unreadable")

    bank = BankParameters()
    if parser.has_section("bank"):
        bank = BankParameters.from_dict(dict(parser.items("bank")))

    belief_sections = [s for s in parser.sections() if s == "belief" or s.startswith("belief:")]
    if belief_sections:
        atoms = []
        weights = []
        for section in belief_sections:
            block = dict(parser.items(section))
            weight = block.pop("weight", None)
            atoms.append(belief_from_config(block))
            weights.append(None if weight is None else float(weight))
        if all(w is None for w in weights):
            weights = [1.0 / len(atoms)] * len(atoms)
        elif any(w is None for w in weights):
            raise ValueError("either every belief section sets a weight or none does")
        measure = SecondOrderMeasure(tuple(zip(atoms, weights)))
    else:
        measure = DEFAULT_MEASURE

    solver = None
    if parser.has_section("solver"):
        block = dict(parser.items("solver"))
        defaults = SolverConfig()
        solver = SolverConfig(
            bracket=(
                float(block.get("r_lo", defaults.bracket[0])),
                float(block.get("r_hi", defaults.bracket[1])),
            ),
            foc_tol=float(block.get("foc_tol", defaults.foc_tol)),
            max_iter=int(block.get("max_iter", defaults.max_iter)),
            quad_nodes=int(block.get("quad_nodes", defaults.quad_nodes)),
        )

    market = MarketConfig()
    if parser.has_section("market"):
        block = dict(parser.items("market"))
        ref = MarketConfig()
        market = MarketConfig(
            s_max=float(block.get("s_max", ref.s_max)),
            kappa_s=float(block.get("kappa_s", ref.kappa_s)),
            d0=float(block.get("d0", ref.d0)),
            d1=float(block.get("d1", ref.d1)),
        )
    return RunConfig(bank=bank, measure=measure, solver=solver, market=market)
