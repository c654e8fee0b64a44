import numpy as np
import pytest

from loanlab.bank import BankParameters, FundingRule, HazardParameters
from loanlab.beliefs import DiscreteGrid, Gaussian, SecondOrderMeasure, TwoPieceNormal
from loanlab.pricing import default_solver_config


@pytest.fixture(scope="session")
def params():
    return BankParameters()


@pytest.fixture(scope="session")
def base_measure():
    return SecondOrderMeasure.point_mass(Gaussian(0.02, 0.01))


@pytest.fixture(scope="session")
def two_atom_measure():
    return SecondOrderMeasure(((Gaussian(0.02, 0.007), 0.5), (Gaussian(0.02, 0.018), 0.5)))


@pytest.fixture(scope="session")
def grid_measure():
    return SecondOrderMeasure.point_mass(
        DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25))
    )


def random_belief(rng):
    """One random belief from any family, scaled like an inflation rate."""
    kind = rng.integers(0, 3)
    mean = rng.uniform(-0.01, 0.05)
    if kind == 0:
        return Gaussian(mean, rng.uniform(0.003, 0.03))
    if kind == 1:
        return TwoPieceNormal(mean, rng.uniform(0.003, 0.02), rng.uniform(0.003, 0.02))
    n_pts = int(rng.integers(2, 7))
    pts = np.sort(rng.uniform(-0.05, 0.10, n_pts))
    while np.any(np.diff(pts) < 1e-6):
        pts = np.sort(rng.uniform(-0.05, 0.10, n_pts))
    probs = rng.dirichlet(np.ones(n_pts))
    probs = probs / probs.sum()
    return DiscreteGrid(tuple(pts), tuple(probs))


def random_config(rng):
    """A sane random (params, measure, r, x) tuple for consistency sweeps."""
    params = BankParameters(
        gamma_u=rng.uniform(2.0, 10.0),
        hazard=HazardParameters(
            s0=rng.uniform(0.05, 0.12),
            kappa=rng.uniform(1.8, 3.2),
            a_pi=rng.uniform(0.2, 1.0),
            a_x=rng.uniform(0.2, 0.6),
        ),
        funding=FundingRule(
            r_star=rng.uniform(0.01, 0.04),
            rho_pi=rng.uniform(0.2, 0.8),
            pi_star=0.02,
        ),
        eta=rng.uniform(1e3, 1e4),
    )
    n_atoms = int(rng.integers(1, 4))
    beliefs = [
        Gaussian(rng.uniform(0.0, 0.04), rng.uniform(0.004, 0.02)) for _ in range(n_atoms)
    ]
    w = rng.dirichlet(np.ones(n_atoms))
    measure = SecondOrderMeasure(tuple(zip(beliefs, w / w.sum())))
    x = int(rng.integers(0, 2))
    cfg = default_solver_config(params, x)
    r = rng.uniform(cfg.bracket[0] * 2, cfg.bracket[1] * 0.9)
    return params, measure, r, x
