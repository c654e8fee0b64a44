"""Subjective inflation distributions and the stochastic-order transforms on them.

Three parametric families are supported: a Gaussian, a two-piece normal
(separate left/right scales around a common mode, for skewed beliefs), and a
discrete grid (fully explicit, convenient for brute-force checks).  All values
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

# Truncation half-width, in units of the side scale, for quadrature over the
# continuous families.  The omitted tail mass is below 1e-15 per side.
TAIL_WIDTH = 8.0

_PROB_TOL = 1e-12
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class BeliefError(ValueError):
    """A belief (or a transform of one) violates its construction invariants."""


class QuadratureError(RuntimeError):
    """An integrand evaluated to a non-finite value at a quadrature node."""


# ---------------------------------------------------------------------------
# Families


@dataclass(frozen=True)
class Gaussian:
    mean: float
    sd: float

    def __post_init__(self):
        if not (self.sd > 0.0 and math.isfinite(self.sd)):
            raise BeliefError(f"sd must be strictly positive, got {self.sd}")
        if not math.isfinite(self.mean):
            raise BeliefError(f"mean must be finite, got {self.mean}")


@dataclass(frozen=True)
class TwoPieceNormal:
    """Density with half-normal pieces of scale sd_left / sd_right around mode."""

    mode: float
    sd_left: float
    sd_right: float

    def __post_init__(self):
        if not (self.sd_left > 0.0 and math.isfinite(self.sd_left)):
            raise BeliefError(f"sd_left must be strictly positive, got {self.sd_left}")
        if not (self.sd_right > 0.0 and math.isfinite(self.sd_right)):
            raise BeliefError(f"sd_right must be strictly positive, got {self.sd_right}")
        if not math.isfinite(self.mode):
            raise BeliefError(f"mode must be finite, got {self.mode}")


@dataclass(frozen=True)
class DiscreteGrid:
    points: tuple
    probs: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        prb = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", prb)
        if len(pts) != len(prb) or len(pts) == 0:
            raise BeliefError("points and probs must be non-empty and equally long")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise BeliefError("points must be strictly increasing")
        if any(p < 0.0 for p in prb):
            raise BeliefError("probabilities must be nonnegative")
        if abs(sum(prb) - 1.0) > _PROB_TOL:
            raise BeliefError(f"probabilities must sum to 1, got {sum(prb)!r}")

    @classmethod
    def from_csv(cls, path) -> "DiscreteGrid":
        """Read a two-column (point, prob) CSV; a non-numeric header row is skipped."""
        points, probs = [], []
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < 2:
                    raise BeliefError(f"{path}: line {i + 1}: expected two columns")
                try:
                    points.append(float(row[0]))
                    probs.append(float(row[1]))
                except ValueError:
                    if i == 0:
                        continue  # header
                    raise BeliefError(f"{path}: line {i + 1}: non-numeric value {row!r}")
        if not points:
            raise BeliefError(f"{path}: no data rows")
        return cls(tuple(points), tuple(probs))


InflationBelief = Union[Gaussian, TwoPieceNormal, DiscreteGrid]


# ---------------------------------------------------------------------------
# Support, density, quadrature


def support(b: InflationBelief) -> tuple:
    """Effective support used for truncated quadrature and test-function knots."""
    if isinstance(b, Gaussian):
        return (b.mean - TAIL_WIDTH * b.sd, b.mean + TAIL_WIDTH * b.sd)
    if isinstance(b, TwoPieceNormal):
        return (b.mode - TAIL_WIDTH * b.sd_left, b.mode + TAIL_WIDTH * b.sd_right)
    if isinstance(b, DiscreteGrid):
        return (b.points[0], b.points[-1])
    raise TypeError(f"not a belief: {b!r}")


def pdf(b: InflationBelief, x) -> np.ndarray:
    """Density of a continuous belief, vectorized over x."""
    x = np.asarray(x, dtype=float)
    if isinstance(b, Gaussian):
        z = (x - b.mean) / b.sd
        return np.exp(-0.5 * z * z) / (b.sd * math.sqrt(2.0 * math.pi))
    if isinstance(b, TwoPieceNormal):
        norm = 2.0 / (math.sqrt(2.0 * math.pi) * (b.sd_left + b.sd_right))
        sd = np.where(x < b.mode, b.sd_left, b.sd_right)
        z = (x - b.mode) / sd
        return norm * np.exp(-0.5 * z * z)
    raise TypeError(f"pdf is defined for continuous families only, got {type(b).__name__}")


def _gauss_legendre_panel(lo: float, hi: float, n: int) -> tuple:
    t, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * t, half * w


def _nodes_and_weights(b: InflationBelief, n: int) -> tuple:
    """Quadrature nodes/weights integrating h -> E[h] for the given belief."""
    if isinstance(b, Gaussian):
        t, w = np.polynomial.hermite.hermgauss(n)
        return b.mean + math.sqrt(2.0) * b.sd * t, w / math.sqrt(math.pi)
    if isinstance(b, TwoPieceNormal):
        # One Gauss-Legendre panel per side: the density is smooth away from
        # the mode, so splitting there keeps convergence spectral.
        lo, hi = support(b)
        xl, wl = _gauss_legendre_panel(lo, b.mode, n)
        xr, wr = _gauss_legendre_panel(b.mode, hi, n)
        x = np.concatenate([xl, xr])
        w = np.concatenate([wl, wr]) * pdf(b, x)
        return x, w
    if isinstance(b, DiscreteGrid):
        return np.asarray(b.points), np.asarray(b.probs)
    raise TypeError(f"not a belief: {b!r}")


def expectation(b: InflationBelief, h: Callable, n: int = 64) -> float:
    """E[h(pi)] under the belief.

    Gauss-Hermite for the Gaussian, exact summation for a grid, and
    two-panel Gauss-Legendre over the truncated support for the two-piece
    normal.  Doubling n moves the result by < 1e-9 for smooth h.
    """
    if n < 8:
        raise ValueError(f"need at least 8 nodes, got {n}")
    x, w = _nodes_and_weights(b, n)
    vals = np.asarray(h(x), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(np.atleast_1d(vals))]
        raise QuadratureError(f"integrand is non-finite at node(s) {bad[:5]}")
    return float(np.sum(w * vals))


# ---------------------------------------------------------------------------
# Moments


def _mean_var_m3(b: InflationBelief) -> tuple:
    if isinstance(b, Gaussian):
        return b.mean, b.sd**2, 0.0
    if isinstance(b, DiscreteGrid):
        pts = np.asarray(b.points)
        prb = np.asarray(b.probs)
        m = float(np.sum(pts * prb))
        d = pts - m
        return m, float(np.sum(prb * d**2)), float(np.sum(prb * d**3))
    m = expectation(b, lambda x: x, n=96)
    v = expectation(b, lambda x: (x - m) ** 2, n=96)
    m3 = expectation(b, lambda x: (x - m) ** 3, n=96)
    return m, v, m3


def moments(b: InflationBelief) -> tuple:
    """(mean, variance, skewness); closed form where available, quadrature otherwise."""
    m, v, m3 = _mean_var_m3(b)
    return m, v, m3 / v**1.5 if v > 0 else 0.0


def _tpn_mean(b: TwoPieceNormal) -> float:
    # Exact first moment of the two-piece normal; used as the centre of
    # mean-preserving maps so the preservation is exact, not approximate.
    return b.mode + _SQRT_2_OVER_PI * (b.sd_right - b.sd_left)


# ---------------------------------------------------------------------------
# Stochastic-order transforms


def mps_dilate(b: InflationBelief, s: float) -> InflationBelief:
    """Dilate about the mean: pi -> m + s*(pi - m).

    A pure spread: the mean is unchanged and the variance scales by s^2.
    Every family is closed under the map.
    """
    if s < 1.0:
        raise BeliefError(f"dilation factor must be >= 1, got {s}")
    if isinstance(b, Gaussian):
        return Gaussian(b.mean, s * b.sd)
    if isinstance(b, TwoPieceNormal):
        m = _tpn_mean(b)
        return TwoPieceNormal(m + s * (b.mode - m), s * b.sd_left, s * b.sd_right)
    if isinstance(b, DiscreteGrid):
        pts = np.asarray(b.points)
        m = float(np.sum(pts * np.asarray(b.probs)))
        return DiscreteGrid(tuple(m + s * (pts - m)), b.probs)
    raise TypeError(f"not a belief: {b!r}")


def skew_shift(b: InflationBelief, lam: float) -> InflationBelief:
    """Mean-preserving transfer that raises the third central moment.

    DiscreteGrid: a fraction lam of the mass at the point nearest the mean is
    split between the next point down and a new far-right point, in the unique
    proportion that keeps the mean fixed.  TwoPieceNormal: the right scale is
    stretched by (1+lam), the left shrunk by 1/(1+lam), and the mode moved to
    keep the exact mean fixed.
    """
    if lam < 0.0:
        raise BeliefError(f"shift intensity must be >= 0, got {lam}")
    if lam == 0.0:
        return b
    if isinstance(b, TwoPieceNormal):
        m = _tpn_mean(b)
        sd_l = b.sd_left / (1.0 + lam)
        sd_r = b.sd_right * (1.0 + lam)
        mode = m - _SQRT_2_OVER_PI * (sd_r - sd_l)
        return TwoPieceNormal(mode, sd_l, sd_r)
    if isinstance(b, DiscreteGrid):
        if len(b.points) < 2:
            raise BeliefError("skew shift needs at least two grid points")
        if lam > 1.0:
            raise BeliefError(
                f"shift intensity {lam} would make the source probability negative"
            )
        pts = np.asarray(b.points)
        prb = np.asarray(b.probs, dtype=float)
        m = float(np.sum(pts * prb))
        i_src = int(np.argmin(np.abs(pts - m)))
        if i_src == 0:
            raise BeliefError("no grid point below the mean to receive mass")
        i_dn = i_src - 1
        high = pts[-1] + (pts[-1] - pts[0])
        span = high - pts[i_dn]
        moved = lam * prb[i_src]
        up = moved * (pts[i_src] - pts[i_dn]) / span
        down = moved * (high - pts[i_src]) / span
        new_pts = np.append(pts, high)
        new_prb = np.append(prb, 0.0)
        new_prb[i_src] -= moved
        new_prb[i_dn] += down
        new_prb[-1] += up
        if np.any(new_prb < -_PROB_TOL):
            raise BeliefError("shift produced a negative probability")
        new_prb = np.clip(new_prb, 0.0, None)
        new_prb /= new_prb.sum()
        return DiscreteGrid(tuple(new_pts), tuple(new_prb))
    raise BeliefError(f"skew shift is defined for grids and two-piece normals, got {type(b).__name__}")


# ---------------------------------------------------------------------------
# Skew-order check against a library of non-increasing concave test functions


@dataclass(frozen=True)
class PiecewiseTest:
    """Piecewise-linear function: knots with per-segment slopes.

    Slopes are non-positive and strictly decreasing left to right, which makes
    the function non-increasing and concave on the whole line.
    """

    knots: tuple
    slopes: tuple  # len(knots) + 1 segment slopes, strictly decreasing, all <= 0

    def __post_init__(self):
        if len(self.slopes) != len(self.knots) + 1:
            raise ValueError("need one more slope than knots")
        if any(s > 0 for s in self.slopes):
            raise ValueError("slopes must be non-positive (non-increasing function)")
        if any(b >= a for a, b in zip(self.slopes, self.slopes[1:])):
            raise ValueError("slopes must be strictly decreasing (concave function)")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        knots = np.asarray(self.knots)
        slopes = np.asarray(self.slopes)
        # value at the knots, anchored at f(knots[0]) = 0
        vals = np.concatenate([[0.0], np.cumsum(slopes[1:-1] * np.diff(knots))])
        seg = np.searchsorted(knots, x, side="right")
        anchor = np.where(seg == 0, knots[0], knots[np.maximum(seg - 1, 0)])
        base = np.where(seg == 0, 0.0, vals[np.maximum(seg - 1, 0)])
        return base + slopes[seg] * (x - anchor)


def make_test_library(lo: float, hi: float, count: int = 200, seed: int = 20) -> list:
    """Seeded library of piecewise-linear non-increasing concave test functions."""
    rng = np.random.default_rng(seed)
    lib = []
    span = hi - lo
    for _ in range(count):
        k = int(rng.integers(1, 7))
        knots = np.sort(rng.uniform(lo - 0.1 * span, hi + 0.1 * span, size=k))
        # head slope mildly negative, then strictly decreasing drops
        head = -rng.exponential(0.05)
        drops = rng.exponential(1.0, size=k) + 1e-3
        slopes = head - np.concatenate([[0.0], np.cumsum(drops)])
        lib.append(PiecewiseTest(tuple(knots), tuple(slopes)))
    return lib


def _expect_piecewise(b: InflationBelief, test: PiecewiseTest, n: int = 32) -> float:
    """E[test(pi)] with knot-aligned panels so each panel integrand is smooth."""
    if isinstance(b, DiscreteGrid):
        return float(np.sum(np.asarray(b.probs) * test(np.asarray(b.points))))
    lo, hi = support(b)
    cuts = [lo]
    if isinstance(b, TwoPieceNormal):
        cuts.append(b.mode)
    cuts.extend(k for k in test.knots if lo < k < hi)
    cuts.append(hi)
    cuts = sorted(set(cuts))
    total = 0.0
    for a, c in zip(cuts, cuts[1:]):
        x, w = _gauss_legendre_panel(a, c, n)
        total += float(np.sum(w * pdf(b, x) * test(x)))
    return total


@dataclass(frozen=True)
class OrderVerdict:
    holds: bool
    strict: bool
    witness: Optional[PiecewiseTest]
    max_violation: float

    def __bool__(self) -> bool:
        return self.holds


def check_sk_order(
    f: InflationBelief,
    f_tilde: InflationBelief,
    tests: Optional[Sequence[PiecewiseTest]] = None,
    tol: float = 1e-10,
) -> OrderVerdict:
    """Does f_tilde dominate f in the skewness order?

    Requires equal means, then checks E_tilde[g] <= E[g] + tol for every
    non-increasing concave test function g in the library, reporting the first
    violating g as witness.  Strictness records whether at least one test ran
    strictly below.
    """
    m_f, _, _ = _mean_var_m3(f)
    m_t, _, _ = _mean_var_m3(f_tilde)
    if abs(m_f - m_t) > 1e-8:
        raise BeliefError(f"means differ ({m_f} vs {m_t}); the order needs equal means")
    if tests is None:
        lo = min(support(f)[0], support(f_tilde)[0])
        hi = max(support(f)[1], support(f_tilde)[1])
        tests = make_test_library(lo, hi)
    strict = False
    for g in tests:
        e_f = _expect_piecewise(f, g)
        e_t = _expect_piecewise(f_tilde, g)
        if e_t > e_f + tol:
            return OrderVerdict(False, False, g, e_t - e_f)
        if e_t < e_f - tol:
            strict = True
    return OrderVerdict(True, strict, None, 0.0)


# ---------------------------------------------------------------------------
# Second-order measure over beliefs


@dataclass(frozen=True)
class SecondOrderMeasure:
    """Weighted atoms of candidate inflation beliefs; the model-uncertainty layer."""

    atoms: tuple  # ((belief, weight), ...)

    def __post_init__(self):
        atoms = tuple((b, float(w)) for b, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise BeliefError("a measure needs at least one atom")
        if any(w < 0.0 for _, w in atoms):
            raise BeliefError("atom weights must be nonnegative")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > _PROB_TOL:
            raise BeliefError(f"atom weights must sum to 1, got {total!r}")

    @classmethod
    def point_mass(cls, belief: InflationBelief) -> "SecondOrderMeasure":
        return cls(((belief, 1.0),))

    @property
    def beliefs(self) -> tuple:
        return tuple(b for b, _ in self.atoms)

    @property
    def weights(self) -> tuple:
        return tuple(w for _, w in self.atoms)

    def map(self, fn: Callable) -> "SecondOrderMeasure":
        """Apply a belief transform atom-wise, keeping weights."""
        return SecondOrderMeasure(tuple((fn(b), w) for b, w in self.atoms))


# ---------------------------------------------------------------------------
# Key-value serialization


def belief_to_config(b: InflationBelief) -> dict:
    if isinstance(b, Gaussian):
        return {"family": "gaussian", "mean": b.mean, "sd": b.sd}
    if isinstance(b, TwoPieceNormal):
        return {
            "family": "two_piece_normal",
            "mode": b.mode,
            "sd_left": b.sd_left,
            "sd_right": b.sd_right,
        }
    if isinstance(b, DiscreteGrid):
        return {
            "family": "discrete_grid",
            "points": ",".join(repr(p) for p in b.points),
            "probs": ",".join(repr(p) for p in b.probs),
        }
    raise TypeError(f"not a belief: {b!r}")


def belief_from_config(block: dict) -> InflationBelief:
    family = str(block.get("family", "")).strip().lower()
    if family == "gaussian":
        return Gaussian(float(block["mean"]), float(block["sd"]))
    if family == "two_piece_normal":
        return TwoPieceNormal(
            float(block["mode"]), float(block["sd_left"]), float(block["sd_right"])
        )
    if family == "discrete_grid":
        if "csv" in block:
            return DiscreteGrid.from_csv(block["csv"])
        pts = tuple(float(v) for v in str(block["points"]).split(","))
        prb = tuple(float(v) for v in str(block["probs"]).split(","))
        return DiscreteGrid(pts, prb)
    raise BeliefError(f"unknown belief family {family!r}")
