"""Penalty calculus implied by the process prior.

The log of the conditional spike/slab mixture, read as a function of the
current coefficient given its neighbour, acts as a self-adaptive penalty.
Looking forward from the past value gives the prospective penalty; looking
backward from the future value gives the retrospective penalty (the same
bivariate function with the conditioning role swapped).  Their derivatives
with respect to |beta| are the shrinkage terms assembled here.

Everything in this module is a pure function: the mixing weight and slab mean
are recomputed from the conditioning argument on every call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import (
    _maybe_scalar,
    _prep,
    _sigmoid,
    log_slab_cond_pdf,
    log_spike_pdf,
    slab_mean,
    transition_theta,
)
from .errors import ParameterError
from .params import DssParams

__all__ = [
    "ShrinkageBreakdown",
    "prospective_pen",
    "retrospective_pen",
    "total_pen",
    "pstar",
    "prospective_shrinkage",
    "retrospective_shrinkage",
    "total_shrinkage",
    "penalty_scan",
]


@dataclass(frozen=True)
class ShrinkageBreakdown:
    """Shrinkage split into its past-driven and future-driven parts."""

    prospective: float
    retrospective: float

    @property
    def total(self) -> float:
        return self.prospective + self.retrospective


def prospective_pen(beta, beta_prev, params: DssParams):
    """Log conditional prior of ``beta`` given the previous value.

    log[(1 - theta) * spike(beta) + theta * slab(beta | mu)], with the weight
    theta and slab mean mu computed from ``beta_prev``.
    """
    b, scalar = _prep(beta)
    theta = transition_theta(beta_prev, params)
    mu = slab_mean(beta_prev, params)
    out = np.logaddexp(
        np.log1p(-np.asarray(theta)) + log_spike_pdf(b, params.lambda0),
        np.log(theta) + log_slab_cond_pdf(b, mu, params.lambda1),
    )
    return _maybe_scalar(out, scalar and np.asarray(beta_prev).ndim == 0)


def retrospective_pen(beta_next, beta, params: DssParams):
    """Log conditional prior of the future value, as a function of ``beta``.

    Same bivariate function as :func:`prospective_pen`; here the conditioning
    argument ``beta`` is the variable of interest.
    """
    return prospective_pen(beta_next, beta, params)


def total_pen(beta, beta_prev, beta_next, params: DssParams):
    """Two-sided penalty, normed so that its value at beta = 0 is zero."""
    b, scalar = _prep(beta)
    raw = prospective_pen(b, beta_prev, params) + retrospective_pen(
        beta_next, b, params
    )
    at_zero = prospective_pen(0.0, beta_prev, params) + retrospective_pen(
        beta_next, 0.0, params
    )
    return _maybe_scalar(raw - at_zero, scalar)


def pstar(beta, beta_prev, params: DssParams):
    """Conditional slab membership probability of ``beta``.

    Posterior probability that ``beta`` arose from the conditional slab
    (centred at the autoregressive mean) rather than the spike, given the
    previous value.  Distinct from the transition weight, which classifies
    against the *stationary* slab.
    """
    b, scalar = _prep(beta)
    theta = np.asarray(transition_theta(beta_prev, params))
    mu = slab_mean(beta_prev, params)
    logit = (
        np.log(theta)
        - np.log1p(-theta)
        + log_slab_cond_pdf(b, mu, params.lambda1)
        - log_spike_pdf(b, params.lambda0)
    )
    out = _sigmoid(np.asarray(logit, dtype=float))
    return _maybe_scalar(out, scalar and np.asarray(beta_prev).ndim == 0)


def _require_nonzero(beta: np.ndarray):
    if np.any(beta == 0.0):
        raise ParameterError(
            "shrinkage terms differentiate with respect to |beta| and are "
            "undefined at beta = 0"
        )


def prospective_shrinkage(beta, beta_prev, params: DssParams):
    """Negative derivative of the prospective penalty w.r.t. |beta|.

    Adaptive blend of the Gaussian slab score and the constant Laplace rate:
    pstar * ((beta - mu) / lambda1) * sign(beta) + (1 - pstar) * lambda0.
    """
    b, scalar = _prep(beta)
    _require_nonzero(b)
    p = np.asarray(pstar(b, beta_prev, params))
    mu = slab_mean(beta_prev, params)
    out = p * ((b - mu) / params.lambda1) * np.sign(b) + (1.0 - p) * params.lambda0
    return _maybe_scalar(out, scalar and np.asarray(beta_prev).ndim == 0)


def retrospective_shrinkage(beta, beta_next, params: DssParams):
    """Negative derivative of the retrospective penalty w.r.t. |beta|.

    Two pieces: the transition-weight channel, whose log-odds derivative is
    lambda0 - sign(beta) * (beta - phi0) / A with A the stationary slab
    variance, and the slab-mean channel pulling toward the future value.
    """
    b, scalar = _prep(beta)
    _require_nonzero(b)
    a = params.stationary_var
    theta_next = np.asarray(transition_theta(b, params))
    mu_next = slab_mean(b, params)
    p_next = np.asarray(pstar(beta_next, b, params))
    sign = np.sign(b)
    bracket = params.lambda0 - sign * (b - params.phi0) / a
    weight_channel = bracket * ((1.0 - p_next) * theta_next - p_next * (1.0 - theta_next))
    mean_channel = p_next * params.phi1 * sign * (beta_next - mu_next) / params.lambda1
    out = weight_channel - mean_channel
    return _maybe_scalar(out, scalar and np.asarray(beta_next).ndim == 0)


def total_shrinkage(
    beta: float, beta_prev: float, beta_next: float, params: DssParams
) -> ShrinkageBreakdown:
    """Both shrinkage terms at a single (scalar) coefficient value."""
    return ShrinkageBreakdown(
        prospective=float(prospective_shrinkage(beta, beta_prev, params)),
        retrospective=float(retrospective_shrinkage(beta, beta_next, params)),
    )


def penalty_scan(
    params: DssParams,
    beta_prev: float,
    beta_next: float,
    grid: np.ndarray,
):
    """Evaluate penalties and shrinkage over a grid of beta values.

    Returns a list of rows (beta, prospective_pen, retrospective_pen,
    total_pen, prospective_shrinkage, retrospective_shrinkage,
    total_shrinkage); the shrinkage entries are None at beta = 0.
    """
    grid = np.asarray(grid, dtype=float)
    pros = prospective_pen(grid, beta_prev, params)
    retro = retrospective_pen(beta_next, grid, params)
    tot = total_pen(grid, beta_prev, beta_next, params)
    rows = []
    for i, b in enumerate(grid):
        if b == 0.0:
            lam = lam_r = lam_t = None
        else:
            brk = total_shrinkage(float(b), beta_prev, beta_next, params)
            lam, lam_r, lam_t = brk.prospective, brk.retrospective, brk.total
        rows.append((float(b), float(pros[i]), float(retro[i]), float(tot[i]), lam, lam_r, lam_t))
    return rows
