"""Synthetic loan/overdraft panels, validated CSV ingestion, sample filters,
and descriptive statistics.

All randomness flows from one seed through spawned counter-based (Philox)
streams, so individual draws are independent across uses but the whole
dataset is reproducible bit-for-bit.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .design import build_design

_NORMAL_Q75 = 0.6744897501960817
_DATE_RE = re.compile(r"^\d{4}-\d{2}$")

LOAN_COLUMNS = (
    "loan_id", "bank_id", "borrower_id", "sector", "department", "size_class",
    "date", "rate_pct", "volume_eur", "maturity_months", "pd", "ecb_dfr",
    "gdp_growth", "niu", "asi", "disagreement",
)
LOAN_NUMERIC = (
    "rate_pct", "volume_eur", "maturity_months", "pd", "ecb_dfr",
    "gdp_growth", "niu", "asi", "disagreement",
)
OVERDRAFT_COLUMNS = (
    "loan_id", "bank_id", "borrower_id", "sector", "department", "size_class",
    "date", "rate_pct", "benchmark_pct", "pd", "ecb_dfr", "gdp_growth",
    "niu", "asi", "disagreement",
)
OVERDRAFT_NUMERIC = (
    "rate_pct", "benchmark_pct", "pd", "ecb_dfr", "gdp_growth",
    "niu", "asi", "disagreement",
)

SECTORS = ("AGR", "CON", "MFG", "RET", "SRV")
SIZE_CLASSES = ("large", "medium", "micro", "small")
DEPARTMENTS = tuple(f"D{i:02d}" for i in range(1, 9))

# Per-regime slopes on the numeric covariates of the rate regression.
DEFAULT_NUMERIC_EFFECTS = {
    "pd_pct": (0.08, 0.12, 0.17),
    "log_volume": (-0.08, -0.05, -0.12),
    "ecb_dfr": (0.75, 0.85, 0.70),
    "maturity_months": (0.002, 0.001, 0.003),
    "gdp_growth": (0.05, 0.10, 0.15),
}

MATURITY_CHOICES = (12, 24, 36, 48, 60, 84, 120)
MATURITY_WEIGHTS = (0.08, 0.12, 0.15, 0.15, 0.30, 0.12, 0.08)


class SchemaError(ValueError):
    """A CSV file does not conform to the loan/overdraft schema."""


@dataclass(frozen=True)
class GeneratorConfig:
    n: int = 10_000
    seed: int = 0
    weights: tuple = (0.30, 0.45, 0.25)
    intercepts: tuple = (1.6, 2.6, 3.6)
    sigmas: tuple = (0.12, 0.10, 0.15)
    numeric_effects: Optional[dict] = None
    indicator_effect_bp: float = 14.0
    indicator_mean: float = 0.55
    indicator_sd: float = 0.25
    maturity_mode_months: int = 60
    mean_volume_eur: float = 20_000.0
    sd_log_volume: float = 0.9
    n_months: int = 48
    n_banks: int = 12

    def __post_init__(self):
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("regime weights must sum to 1")
        if any(s <= 0 for s in self.sigmas):
            raise ValueError("regime scales must be strictly positive")
        if len(self.weights) != len(self.intercepts) or len(self.weights) != len(self.sigmas):
            raise ValueError("weights, intercepts, and sigmas must align")

    @property
    def n_regimes(self) -> int:
        return len(self.weights)

    def effects(self) -> dict:
        return dict(self.numeric_effects or DEFAULT_NUMERIC_EFFECTS)

    def indicator_coefficient(self) -> float:
        """Per-unit rate effect giving indicator_effect_bp across the
        population interquartile range of the indicator series."""
        iqr = 2.0 * _NORMAL_Q75 * self.indicator_sd
        return (self.indicator_effect_bp / 100.0) / iqr

    def indicator_quartiles(self) -> tuple:
        lo = self.indicator_mean - _NORMAL_Q75 * self.indicator_sd
        return lo, 2.0 * self.indicator_mean - lo


def _rng(seed_seq) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_seq))


def _month_labels(n_months: int, start_year: int = 2018) -> list:
    return [f"{start_year + t // 12}-{t % 12 + 1:02d}" for t in range(n_months)]


def _monthly_series(cfg: GeneratorConfig, rng: np.random.Generator) -> pd.DataFrame:
    months = _month_labels(cfg.n_months)
    gdp = np.empty(cfg.n_months)
    level = 0.0
    shocks = rng.normal(0.0, 0.6, cfg.n_months)
    for t in range(cfg.n_months):
        level = 0.7 * level + shocks[t]
        gdp[t] = 1.5 + level
    return pd.DataFrame(
        {
            "date": months,
            "ecb_dfr": np.linspace(-0.5, 4.0, cfg.n_months),
            "gdp_growth": gdp,
            "niu": rng.normal(cfg.indicator_mean, cfg.indicator_sd, cfg.n_months),
            "asi": rng.normal(0.2, 0.3, cfg.n_months),
            "disagreement": rng.normal(0.4, 0.2, cfg.n_months),
        }
    )


def simulate_loans(cfg: GeneratorConfig) -> tuple:
    """Draw a synthetic loan panel plus a ground-truth sidecar.

    Regime membership, covariates, and noise come from independent spawned
    streams of the config seed.  The sidecar records the exact coefficient
    vectors, scales, weights, and indicator quartiles used, for
    construct-and-recover tests.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(6)
    rng_series = _rng(streams[0])
    rng_cov = _rng(streams[1])
    rng_cat = _rng(streams[2])
    rng_regime = _rng(streams[3])
    rng_noise = _rng(streams[4])
    rng_fx = _rng(streams[5])

    series = _monthly_series(cfg, rng_series)
    month_idx = rng_cov.integers(0, cfg.n_months, cfg.n)

    maturity_weights = np.asarray(MATURITY_WEIGHTS)
    mode_pos = MATURITY_CHOICES.index(cfg.maturity_mode_months)
    maturity_weights = maturity_weights / maturity_weights.sum()
    if maturity_weights.argmax() != mode_pos:  # honor a non-default mode choice
        maturity_weights = maturity_weights.copy()
        maturity_weights[mode_pos] = maturity_weights.max() * 1.5
        maturity_weights /= maturity_weights.sum()

    mu_log = math.log(cfg.mean_volume_eur) - 0.5 * cfg.sd_log_volume**2
    bank_probs = np.arange(2, 2 + cfg.n_banks, dtype=float)
    bank_probs /= bank_probs.sum()

    df = pd.DataFrame(
        {
            "loan_id": [f"L{i:07d}" for i in range(cfg.n)],
            "bank_id": rng_cat.choice(
                [f"B{i:02d}" for i in range(1, cfg.n_banks + 1)], cfg.n, p=bank_probs
            ),
            "borrower_id": [f"F{i:07d}" for i in range(cfg.n)],
            "sector": rng_cat.choice(SECTORS, cfg.n, p=(0.08, 0.15, 0.30, 0.22, 0.25)),
            "department": rng_cat.choice(DEPARTMENTS, cfg.n),
            "size_class": rng_cat.choice(SIZE_CLASSES, cfg.n, p=(0.07, 0.18, 0.45, 0.30)),
            "date": [series["date"].iat[t] for t in month_idx],
            "volume_eur": rng_cov.lognormal(mu_log, cfg.sd_log_volume, cfg.n),
            "maturity_months": rng_cov.choice(MATURITY_CHOICES, cfg.n, p=maturity_weights),
            "pd": rng_cov.beta(2.0, 60.0, cfg.n),
        }
    )
    df = df.merge(series, on="date", how="left", sort=False)
    df["rate_pct"] = 0.0

    data = build_design(df, indicator="niu")
    names = data.names
    effects = cfg.effects()
    ind_coef = cfg.indicator_coefficient()
    dummy_fx = {
        name: float(rng_fx.normal(0.0, 0.03))
        for name in names
        if "[" in name
    }
    betas = np.zeros((cfg.n_regimes, len(names)))
    for g in range(cfg.n_regimes):
        for j, name in enumerate(names):
            if name == "intercept":
                betas[g, j] = cfg.intercepts[g]
            elif name == "niu":
                betas[g, j] = ind_coef
            elif name in effects:
                betas[g, j] = effects[name][g]
            else:
                betas[g, j] = dummy_fx[name]

    regime = rng_regime.choice(cfg.n_regimes, cfg.n, p=cfg.weights)
    noise = rng_noise.standard_normal(cfg.n) * np.asarray(cfg.sigmas)[regime]
    df["rate_pct"] = np.einsum("ij,ij->i", data.matrix, betas[regime]) + noise
    df = df[list(LOAN_COLUMNS)]

    lo, hi = cfg.indicator_quartiles()
    sidecar = {
        "seed": cfg.seed,
        "n": cfg.n,
        "weights": list(cfg.weights),
        "sigmas": list(cfg.sigmas),
        "feature_names": list(names),
        "betas": [dict(zip(names, row.tolist())) for row in betas],
        "indicator": "niu",
        "indicator_coefficient": ind_coef,
        "indicator_effect_bp": cfg.indicator_effect_bp,
        "indicator_level_lo": lo,
        "indicator_level_hi": hi,
        "regime_counts": np.bincount(regime, minlength=cfg.n_regimes).tolist(),
    }
    return df, sidecar


@dataclass(frozen=True)
class OverdraftConfig:
    n: int = 8_000
    seed: int = 0
    n_banks: int = 10
    n_months: int = 36
    beta_indicator: float = 0.12
    indicator_mean: float = 0.55
    indicator_sd: float = 0.25
    noise_sd: float = 0.15
    via_composition: bool = False   # effect loads on bank means only
    repeat_borrowers: bool = False  # False: exactly one observation per borrower

    def __post_init__(self):
        if self.n_banks < 2:
            raise ValueError("need at least 2 banks")


def simulate_overdrafts(cfg: OverdraftConfig) -> tuple:
    """Synthetic new-overdraft sample with a known spread process.

    With via_composition the indicator's apparent effect runs purely through
    bank-level averages (absorbed by bank fixed effects); otherwise the
    spread loads on the bank-time indicator itself.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(4)
    rng_series = _rng(streams[0])
    rng_cov = _rng(streams[1])
    rng_bank = _rng(streams[2])
    rng_noise = _rng(streams[3])

    months = _month_labels(cfg.n_months)
    ecb = np.linspace(-0.25, 3.75, cfg.n_months)
    gdp = 1.5 + rng_series.normal(0.0, 0.8, cfg.n_months)
    common = rng_series.normal(cfg.indicator_mean, cfg.indicator_sd, cfg.n_months)
    wiggle = rng_series.normal(0.0, 0.3 * cfg.indicator_sd, cfg.n_months)

    banks = [f"B{i:02d}" for i in range(1, cfg.n_banks + 1)]
    bank_level = rng_bank.normal(cfg.indicator_mean, cfg.indicator_sd, cfg.n_banks)
    if cfg.via_composition:
        # high-indicator banks are also structurally high-spread banks
        alpha = rng_bank.normal(1.0, 0.1, cfg.n_banks) + bank_level
    else:
        alpha = rng_bank.normal(1.0, 0.25, cfg.n_banks)

    bank_idx = rng_cov.integers(0, cfg.n_banks, cfg.n)
    month_idx = rng_cov.integers(0, cfg.n_months, cfg.n)
    pd_draw = rng_cov.beta(2.0, 60.0, cfg.n)
    if cfg.repeat_borrowers:
        borrower = [f"F{i:06d}" for i in rng_cov.integers(0, max(cfg.n // 3, 1), cfg.n)]
    else:
        borrower = [f"F{i:06d}" for i in range(cfg.n)]

    if cfg.via_composition:
        # the apparent effect runs through which banks price high, not time
        indicator = bank_level[bank_idx] + wiggle[month_idx]
        effect = cfg.beta_indicator * bank_level[bank_idx]
    else:
        # a genuine common monthly dispersion series priced by every bank
        indicator = common[month_idx]
        effect = cfg.beta_indicator * indicator
    spread = (
        alpha[bank_idx]
        + effect
        + 6.0 * pd_draw
        + 0.05 * gdp[month_idx]
        - 0.02 * ecb[month_idx]
        + rng_noise.normal(0.0, cfg.noise_sd, cfg.n)
    )
    benchmark = ecb[month_idx] + 0.2

    df = pd.DataFrame(
        {
            "loan_id": [f"O{i:07d}" for i in range(cfg.n)],
            "bank_id": [banks[i] for i in bank_idx],
            "borrower_id": borrower,
            "sector": rng_cov.choice(SECTORS, cfg.n),
            "department": rng_cov.choice(DEPARTMENTS, cfg.n),
            "size_class": rng_cov.choice(SIZE_CLASSES, cfg.n),
            "date": [months[t] for t in month_idx],
            "rate_pct": benchmark + spread,
            "benchmark_pct": benchmark,
            "pd": pd_draw,
            "ecb_dfr": ecb[month_idx],
            "gdp_growth": gdp[month_idx],
            "niu": indicator,
            "asi": rng_cov.normal(0.2, 0.3, cfg.n),
            "disagreement": rng_cov.normal(0.4, 0.2, cfg.n),
        }
    )
    sidecar = {
        "seed": cfg.seed,
        "n": cfg.n,
        "beta_indicator": cfg.beta_indicator,
        "via_composition": cfg.via_composition,
        "indicator": "niu",
        "bank_alpha": dict(zip(banks, alpha.tolist())),
    }
    return df[list(OVERDRAFT_COLUMNS)], sidecar


# ---------------------------------------------------------------------------
# CSV round-trip


def _format(value) -> str:
    if isinstance(value, float) and float(value).is_integer() and abs(value) < 1e15:
        return repr(value)
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(df: pd.DataFrame, path) -> None:
    """Write with full-precision float reprs so numeric round-trips are exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(df.columns.tolist())
        for row in df.itertuples(index=False):
            writer.writerow([_format(v) for v in row])


def _slow_scan(path) -> tuple:
    """csv-module pass used when the fast reader chokes; keeps line numbers."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty")
        rows = list(reader)
    problems, good, ragged = [], [], []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            problems.append(f"line {i + 2}: expected {len(header)} fields, got {len(row)}")
            ragged.append(i)
        else:
            good.append(row)
    frame = pd.DataFrame(good, columns=header, dtype=object)
    lines = np.delete(np.arange(len(rows)) + 2, ragged)  # 1-based, after header
    return frame, lines, problems


def _load_validated(path, required: Sequence[str], numeric: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, engine="c")
        lines = np.arange(len(frame)) + 2
        problems: list = []
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path}: file is empty")
    except pd.errors.ParserError:
        frame, lines, problems = _slow_scan(path)
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing required column(s) {missing}")
    for c in numeric:
        try:
            # float() is correctly rounded; pd.to_numeric's fast parser is not
            values = frame[c].astype(float)
        except (ValueError, TypeError):
            values = pd.to_numeric(frame[c], errors="coerce")
        bad = ~np.isfinite(values.to_numpy(dtype=float))
        for j in np.flatnonzero(bad)[:20]:
            problems.append(f"line {lines[j]}: non-numeric {c}={frame[c].iat[j]!r}")
        frame[c] = values
    if "date" in frame.columns:
        bad = ~frame["date"].astype(str).str.fullmatch(_DATE_RE.pattern).to_numpy()
        for j in np.flatnonzero(bad)[:20]:
            problems.append(f"line {lines[j]}: malformed date {frame['date'].iat[j]!r}")
    if problems:
        shown = "; ".join(problems[:20])
        more = f" (+{len(problems) - 20} more)" if len(problems) > 20 else ""
        raise SchemaError(f"{path}: {len(problems)} malformed row(s): {shown}{more}")
    if len(frame) == 0:
        raise SchemaError(f"{path}: no data rows")
    return frame


def load_loans(path) -> pd.DataFrame:
    """Schema-validated loan CSV; malformed rows are reported by line number."""
    return _load_validated(path, LOAN_COLUMNS, LOAN_NUMERIC)


def load_overdrafts(path) -> pd.DataFrame:
    return _load_validated(path, OVERDRAFT_COLUMNS, OVERDRAFT_NUMERIC)


# ---------------------------------------------------------------------------
# Filters and summaries


def filter_pd(df: pd.DataFrame, cutoff: float = 0.05) -> tuple:
    """Drop rows with pd strictly above the cutoff; ties are retained."""
    keep = df["pd"].to_numpy(dtype=float) <= cutoff
    return df.loc[keep].reset_index(drop=True), int((~keep).sum())


def describe(df: pd.DataFrame) -> pd.DataFrame:
    """Per-column mean/sd/quantiles/mode summary; deterministic ordering."""
    rows = []
    for col in df.columns:
        series = df[col]
        if pd.api.types.is_numeric_dtype(series):
            values = series.to_numpy(dtype=float)
            mode = series.mode()
            rows.append(
                {
                    "column": col,
                    "kind": "numeric",
                    "mean": float(values.mean()),
                    "sd": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
                    "q25": float(np.quantile(values, 0.25)),
                    "q50": float(np.quantile(values, 0.50)),
                    "q75": float(np.quantile(values, 0.75)),
                    "mode": float(mode.iloc[0]) if len(mode) else float("nan"),
                }
            )
        else:
            mode = series.mode()
            rows.append(
                {
                    "column": col,
                    "kind": "categorical",
                    "mean": float("nan"),
                    "sd": float("nan"),
                    "q25": float("nan"),
                    "q50": float("nan"),
                    "q75": float("nan"),
                    "mode": str(mode.iloc[0]) if len(mode) else "",
                }
            )
    return pd.DataFrame(rows)
