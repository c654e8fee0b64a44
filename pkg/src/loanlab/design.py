"""Design-matrix construction shared by the mixture and panel estimators.

Categorical codes become dummy columns with the first (sorted) level as the
reference; numeric covariates are taken as-is.  Column order is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

NUMERIC_COVARIATES = ("pd_pct", "log_volume", "ecb_dfr", "maturity_months", "gdp_growth")
CATEGORICAL_COVARIATES = ("bank_id", "sector", "size_class", "department")


class SingularDesign(ValueError):
    """The design matrix is rank-deficient."""


@dataclass(frozen=True)
class Design:
    response: np.ndarray
    matrix: np.ndarray
    names: tuple

    def __post_init__(self):
        if self.matrix.shape[0] != self.response.shape[0]:
            raise ValueError("response and matrix row counts differ")
        if self.matrix.shape[1] != len(self.names):
            raise ValueError("names do not match matrix columns")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]


def expand_categoricals(df: pd.DataFrame, columns: Sequence[str]) -> tuple:
    """Dummy-encode; first sorted level per column is the dropped reference."""
    blocks, names = [], []
    for col in columns:
        levels = sorted(df[col].astype(str).unique())
        for level in levels[1:]:
            blocks.append((df[col].astype(str) == level).to_numpy(dtype=float))
            names.append(f"{col}[{level}]")
    if not blocks:
        return np.empty((len(df), 0)), []
    return np.column_stack(blocks), names


def build_design(
    df: pd.DataFrame,
    indicator: str,
    numeric: Sequence[str] = NUMERIC_COVARIATES,
    categoricals: Sequence[str] = CATEGORICAL_COVARIATES,
    response: str = "rate_pct",
) -> Design:
    """Assemble (response, matrix, names) with intercept first and one
    dispersion indicator entering at a time."""
    df = df.copy()
    if "log_volume" in numeric and "log_volume" not in df.columns:
        if "volume_eur" not in df.columns:
            raise KeyError("need volume_eur to derive log_volume")
        df["log_volume"] = np.log(df["volume_eur"].to_numpy(dtype=float))
    if "pd_pct" in numeric and "pd_pct" not in df.columns:
        # default probability in percent keeps the coefficient well scaled
        df["pd_pct"] = 100.0 * df["pd"].to_numpy(dtype=float)
    cols, names = [np.ones(len(df))], ["intercept"]
    for col in list(numeric[:3]) + [indicator] + list(numeric[3:]):
        cols.append(df[col].to_numpy(dtype=float))
        names.append(col)
    dummies, dummy_names = expand_categoricals(df, categoricals)
    matrix = np.column_stack(cols + ([dummies] if dummy_names else []))
    names.extend(dummy_names)
    y = df[response].to_numpy(dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("design matrix contains non-finite values")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    return Design(response=y, matrix=matrix, names=tuple(names))


def representative_point(design: Design) -> dict:
    """Feature means (category shares for dummies); intercept excluded."""
    means = design.matrix.mean(axis=0)
    return {name: float(m) for name, m in zip(design.names, means) if name != "intercept"}


def feature_vector(names: Sequence[str], values: Mapping[str, float]) -> np.ndarray:
    """Ordered covariate vector from a name/value mapping; intercept is implicit."""
    vec = np.empty(len(names))
    for i, name in enumerate(names):
        if name == "intercept":
            vec[i] = 1.0
        elif name in values:
            vec[i] = float(values[name])
        else:
            raise KeyError(f"no value supplied for feature {name!r}")
    return vec
