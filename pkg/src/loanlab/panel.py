"""Overdraft cost-spread construction and fixed-effects panel regressions
with cluster-robust standard errors.

Bank fixed effects are absorbed by within-bank demeaning; clustering is
one-way by bank or two-way bank/borrower via the inclusion-exclusion
combination of one-way covariances, with a CR1 small-sample factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .design import SingularDesign, expand_categoricals


class NoWithinVariation(ValueError):
    """The indicator is constant within every fixed-effect group."""


@dataclass
class FEEstimate:
    coefficients: dict
    std_errors: dict
    cluster_scheme: str
    n_obs: int
    n_clusters: dict
    r2_within: float
    dof: dict
    names: tuple
    vcov: np.ndarray
    psd_adjusted: bool = False
    label: str = ""

    def __post_init__(self):
        if any(se <= 0.0 for se in self.std_errors.values()):
            raise ValueError("standard errors must be strictly positive")

    def row(self, name: str) -> tuple:
        return self.coefficients[name], self.std_errors[name]

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "coefficients": self.coefficients,
            "std_errors": self.std_errors,
            "cluster_scheme": self.cluster_scheme,
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
            "r2_within": self.r2_within,
            "dof": self.dof,
            "psd_adjusted": self.psd_adjusted,
        }


def build_spread(
    df: pd.DataFrame,
    benchmark_column: str = "benchmark_pct",
    rate_column: str = "rate_pct",
) -> tuple:
    """Append spread = rate - benchmark; rows with a missing benchmark are
    dropped and their positional indices returned."""
    if benchmark_column not in df.columns:
        raise KeyError(f"no benchmark column {benchmark_column!r}")
    bench = pd.to_numeric(df[benchmark_column], errors="coerce")
    rate = pd.to_numeric(df[rate_column], errors="coerce")
    bad = ~np.isfinite(bench.to_numpy()) | ~np.isfinite(rate.to_numpy())
    rejected = list(np.flatnonzero(bad))
    out = df.loc[~bad].copy()
    out["spread"] = rate[~bad] - bench[~bad]
    return out, rejected


def _cluster_meat(scores: np.ndarray, ids) -> tuple:
    codes, uniques = pd.factorize(ids, sort=False)
    n_clusters = len(uniques)
    sums = np.zeros((n_clusters, scores.shape[1]))
    np.add.at(sums, codes, scores)
    return sums.T @ sums, n_clusters


def _cr1(n: int, k: int, g: int) -> float:
    return (g / (g - 1)) * ((n - 1) / (n - k))


def _pair_ids(df: pd.DataFrame) -> pd.Series:
    return df["bank_id"].astype(str) + "\x1f" + df["borrower_id"].astype(str)


def _clustered_ols(
    y: np.ndarray,
    X: np.ndarray,
    names: Sequence[str],
    df: pd.DataFrame,
    cluster: str,
    k_absorbed: int,
    label: str,
) -> FEEstimate:
    n, k = X.shape
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < k:
        raise SingularDesign(f"regressor matrix has rank {rank} < {k}")
    u = y - X @ beta
    bread = np.linalg.inv(X.T @ X)
    scores = X * u[:, None]
    k_dof = k + k_absorbed

    def one_way(ids) -> tuple:
        meat, g = _cluster_meat(scores, ids)
        if g < 2:
            raise ValueError(f"clustering needs at least 2 clusters, got {g}")
        return _cr1(n, k_dof, g) * (bread @ meat @ bread), g

    n_clusters = {"bank": int(df["bank_id"].nunique())}
    if cluster == "bank":
        vcov, g_bank = one_way(df["bank_id"])
        n_clusters["bank"] = g_bank
    elif cluster == "bank-borrower":
        v_bank, g_bank = one_way(df["bank_id"])
        v_borr, g_borr = one_way(df["borrower_id"])
        v_pair, g_pair = one_way(_pair_ids(df))
        vcov = v_bank + v_borr - v_pair
        n_clusters = {"bank": g_bank, "borrower": g_borr, "pair": g_pair}
    else:
        raise ValueError(f"unknown cluster scheme {cluster!r}")

    psd_adjusted = False
    eigvals = np.linalg.eigvalsh(vcov)
    if eigvals.min() < -1e-12 * max(eigvals.max(), 1e-300):
        w, q = np.linalg.eigh(vcov)
        vcov = (q * np.clip(w, 0.0, None)) @ q.T
        psd_adjusted = True

    sst = float(y @ y) if k_absorbed else float(((y - y.mean()) ** 2).sum())
    ssr = float(u @ u)
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    se = np.sqrt(np.diag(vcov))
    return FEEstimate(
        coefficients=dict(zip(names, beta.tolist())),
        std_errors=dict(zip(names, se.tolist())),
        cluster_scheme=cluster,
        n_obs=n,
        n_clusters=n_clusters,
        r2_within=r2,
        dof={"n": n, "k_regressors": k, "k_absorbed": k_absorbed,
             "resid": n - k_dof},
        names=tuple(names),
        vcov=vcov,
        psd_adjusted=psd_adjusted,
        label=label,
    )


def _assemble(df, indicator, controls, categoricals):
    cols, names = [df[indicator].to_numpy(dtype=float)], [indicator]
    for c in controls:
        cols.append(df[c].to_numpy(dtype=float))
        names.append(c)
    if categoricals:
        dummies, dummy_names = expand_categoricals(df, categoricals)
        if dummy_names:
            cols.append(dummies)
            names.extend(dummy_names)
    return np.column_stack(cols), names


def within_transform(values: np.ndarray, groups: pd.Series) -> np.ndarray:
    """Demean columns by group, exactly idempotent.

    Group means below 64 eps of the group's own data scale are
    indistinguishable from accumulated rounding, so they are treated as exact
    zeros and the input is returned unchanged.  Demeaned output therefore
    passes through verbatim on a second application.
    """
    frame = pd.DataFrame(np.atleast_2d(np.asarray(values, dtype=float).T).T)
    keys = pd.Series(groups).to_numpy()
    means = frame.groupby(keys).transform("mean")
    scale = frame.abs().groupby(keys).transform("mean").to_numpy() + 1e-300
    floor = 64.0 * np.finfo(float).eps * scale
    if bool((np.abs(means.to_numpy()) <= floor).all()):
        return frame.to_numpy()
    return (frame - means).to_numpy()


def fe_within(
    df: pd.DataFrame,
    controls: Sequence[str],
    indicator: str,
    fe: str = "bank_id",
    cluster: str = "bank",
    categoricals: Sequence[str] = (),
    label: str = "",
) -> FEEstimate:
    """Within-group OLS of the spread with cluster-robust covariance.

    All regressors and the outcome are demeaned by the fixed-effect group
    before least squares, so group intercepts are absorbed exactly.
    """
    groups = df[fe]
    n_groups = int(groups.nunique())
    if n_groups < 2:
        raise ValueError(f"need at least 2 {fe} groups, got {n_groups}")
    X_raw, names = _assemble(df, indicator, controls, categoricals)
    ind_within = within_transform(df[indicator].to_numpy(dtype=float), groups)
    if float(np.abs(ind_within).max()) < 1e-12:
        raise NoWithinVariation(
            f"{indicator} is constant within every {fe} group; "
            "the coefficient is not estimable"
        )
    y = within_transform(df["spread"].to_numpy(dtype=float), groups)[:, 0]
    X = within_transform(X_raw, groups)
    return _clustered_ols(
        y, X, names, df, cluster, k_absorbed=n_groups, label=label or f"within[{fe}]"
    )


def pooled_ols(
    df: pd.DataFrame,
    controls: Sequence[str],
    indicator: str,
    cluster: str = "bank",
    categoricals: Sequence[str] = (),
    label: str = "",
) -> FEEstimate:
    """Pooled OLS with an intercept and cluster-robust covariance."""
    X_raw, names = _assemble(df, indicator, controls, categoricals)
    X = np.column_stack([np.ones(len(df)), X_raw])
    names = ["intercept"] + names
    y = df["spread"].to_numpy(dtype=float)
    return _clustered_ols(y, X, names, df, cluster, k_absorbed=0, label=label or "pooled")


def saturation_ladder(
    df: pd.DataFrame, indicator: str, cluster: str = "bank"
) -> list:
    """Progressively saturated spread regressions, one estimate per rung:
    bivariate, + macro controls, + bank fixed effects, + borrower-side
    sector/size/department dummies (with PD)."""
    macro = ["gdp_growth", "ecb_dfr"]
    borrower_cats = ("sector", "size_class", "department")
    return [
        pooled_ols(df, [], indicator, cluster, label="bivariate"),
        pooled_ols(df, macro, indicator, cluster, label="+macro"),
        fe_within(df, macro, indicator, cluster=cluster, label="+bank_fe"),
        fe_within(
            df, macro + ["pd"], indicator, cluster=cluster,
            categoricals=borrower_cats, label="+borrower_controls",
        ),
    ]
