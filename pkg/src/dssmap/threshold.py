"""Numeric selection thresholds and the one-site MAP oracle.

The one-site objective for a coordinate with partial residual ``z`` and
regressor value ``x`` is -(z - x*beta)^2 / 2 + Pen(beta | neighbours).  Zero
is its global maximizer exactly when Z = x*z falls inside an asymmetric band
(lower, upper); outside the band the maximizer satisfies a soft-threshold
fixed point driven by the total shrinkage term.

These routines run a dense grid scan with golden-section refinement.  They
are deliberately slow-and-sure: the production fitter lives in ``em``; this
module is the independent ground truth the fitter is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DesignError, StructuralError
from .params import DssParams
from .penalty import total_pen, total_shrinkage

__all__ = [
    "ThresholdPair",
    "selection_thresholds",
    "one_site_map",
    "one_site_objective",
    "fixed_point_residual",
    "threshold_scan",
]

_GRID_POINTS = 4001
_REFINE_TOL = 1e-10
_ZERO_TIE = 1e-12
# The band objective divides the penalty by beta; keep the grid off 0 itself.
_ZERO_GUARD = 1e-8


@dataclass(frozen=True)
class ThresholdPair:
    """Zero-decision band: the one-site maximizer is 0 on (lower, upper)."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise StructuralError(
                f"threshold band is empty: lower={self.lower} >= upper={self.upper}"
            )

    def contains(self, value: float) -> bool:
        return self.lower < value < self.upper


def _golden_max(f, lo: float, hi: float, tol: float = _REFINE_TOL) -> float:
    """Golden-section maximizer of a unimodal scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _refined_maxima(f_vec, grid: np.ndarray, n_brackets: int = 3) -> list[float]:
    """Grid-scan ``f_vec`` and golden-refine the best local-maximum brackets."""
    vals = f_vec(grid)
    n = grid.shape[0]
    interior = np.arange(1, n - 1)
    is_peak = (vals[interior] >= vals[interior - 1]) & (vals[interior] >= vals[interior + 1])
    peaks = interior[is_peak]
    # Boundary points count as candidate brackets too.
    if vals[0] >= vals[1]:
        peaks = np.append(peaks, 0)
    if vals[-1] >= vals[-2]:
        peaks = np.append(peaks, n - 1)
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(vals))])
    order = np.argsort(vals[peaks])[::-1]
    best = peaks[order[:n_brackets]]

    def f_scalar(b):
        return float(f_vec(np.asarray([b]))[0])

    out = []
    for idx in best:
        lo = grid[max(idx - 1, 0)]
        hi = grid[min(idx + 1, n - 1)]
        if hi > lo:
            out.append(_golden_max(f_scalar, float(lo), float(hi)))
        else:
            out.append(float(grid[idx]))
    return out


def _scan_halfwidth(params: DssParams, *neighbours: float) -> float:
    return abs(params.phi0) + 6.0 * params.stationary_sd + sum(abs(v) for v in neighbours)


def one_site_objective(beta, z: float, x: float, beta_prev: float, beta_next: float, params: DssParams):
    """-(z - x*beta)^2 / 2 + Pen(beta | beta_prev, beta_next), vectorized in beta."""
    b = np.asarray(beta, dtype=float)
    return -0.5 * (z - x * b) ** 2 + total_pen(b, beta_prev, beta_next, params)


def selection_thresholds(
    x: float, beta_prev: float, beta_next: float, params: DssParams
) -> ThresholdPair:
    """Compute the zero-decision band for effective signal Z = x*z.

    upper = inf over beta > 0 of  x^2 beta / 2 - Pen(beta | .) / beta,
    lower = sup over beta < 0 of the same expression; both by grid scan with
    golden-section refinement.  The one-site maximizer is zero exactly when
    lower < Z < upper.
    """
    if x == 0.0:
        raise DesignError("selection thresholds need a nonzero regressor value")
    halfwidth = _scan_halfwidth(params, beta_prev, beta_next)

    def band_obj(b):
        return 0.5 * x * x * b - total_pen(b, beta_prev, beta_next, params) / b

    pos = np.linspace(_ZERO_GUARD, halfwidth, _GRID_POINTS)
    upper_cands = _refined_maxima(lambda b: -band_obj(b), pos)
    upper = min(float(band_obj(np.asarray([c]))[0]) for c in upper_cands)

    neg = np.linspace(-halfwidth, -_ZERO_GUARD, _GRID_POINTS)
    lower_cands = _refined_maxima(lambda b: band_obj(b), neg)
    lower = max(float(band_obj(np.asarray([c]))[0]) for c in lower_cands)
    return ThresholdPair(lower=lower, upper=upper)


def one_site_map(
    z: float, x: float, beta_prev: float, beta_next: float, params: DssParams
) -> float:
    """Global maximizer of the one-site objective by grid scan plus refinement.

    Zero wins ties within 1e-12 of objective value, matching the open-band
    semantics of the selection thresholds.
    """
    if x == 0.0:
        raise DesignError("one-site maximization needs a nonzero regressor value")
    halfwidth = _scan_halfwidth(params, beta_prev, beta_next) + abs(z / x)
    grid = np.linspace(-halfwidth, halfwidth, _GRID_POINTS)

    def f_vec(b):
        return one_site_objective(b, z, x, beta_prev, beta_next, params)

    candidates = _refined_maxima(f_vec, grid)
    best_beta = 0.0
    best_val = float(f_vec(np.asarray([0.0]))[0])
    for c in candidates:
        v = float(f_vec(np.asarray([c]))[0])
        if v > best_val + _ZERO_TIE:
            best_val = v
            best_beta = c
    return best_beta


def fixed_point_residual(
    beta_hat: float, z: float, x: float, beta_prev: float, beta_next: float, params: DssParams
) -> float:
    """Residual of the soft-threshold fixed point at a nonzero maximizer.

    A nonzero maximizer must satisfy the first-order condition
    beta = (Z - Lambda(beta) * sign(beta)) / x^2 with Z = x*z and Lambda the
    total shrinkage at beta.  When the maximizer carries the sign of the data
    signal (always true for a symmetric penalty) this is the familiar
    [|Z| - Lambda]_+ * sign(Z) / x^2 rule; the asymmetric penalty can flip
    the sign of the maximizer, in which case the sign must come from the
    maximizer itself.
    """
    if beta_hat == 0.0:
        raise StructuralError("fixed-point residual is defined for nonzero maximizers")
    big_z = x * z
    lam = total_shrinkage(beta_hat, beta_prev, beta_next, params).total
    implied = (big_z - lam * math.copysign(1.0, beta_hat)) / (x * x)
    return abs(beta_hat - implied)


def threshold_scan(
    params: DssParams,
    x: float,
    beta_prev: float,
    beta_next: float,
    y_grid: np.ndarray,
):
    """Rows (y, lower, upper, beta_hat) over a grid of observations."""
    band = selection_thresholds(x, beta_prev, beta_next, params)
    rows = []
    for y in np.asarray(y_grid, dtype=float):
        beta_hat = one_site_map(float(y), x, beta_prev, beta_next, params)
        rows.append((float(y), band.lower, band.upper, beta_hat))
    return rows
