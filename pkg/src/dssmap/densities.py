"""Spike/slab density primitives and the dynamic spike-and-slab process.

The process mixes an iid Laplace "spike" (rate ``lambda0``) with a stationary
Gaussian AR(1) "slab" (conditional variance ``lambda1``, autoregression
``phi1``, stationary mean ``phi0``).  The mixing weight for the slab at each
step is a deterministic function of the lagged value, chosen so that the
marginal distribution of the process is the plain spike-and-slab mixture with
weight ``theta_marginal``.

All densities are computed in log space; ratios of densities go through a
stable log-sum-exp so they stay finite far out in the tails.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StructuralError
from .params import DssParams

__all__ = [
    "DssPath",
    "spike_pdf",
    "log_spike_pdf",
    "slab_cond_pdf",
    "log_slab_cond_pdf",
    "slab_mean",
    "slab_stationary_pdf",
    "log_slab_stationary_pdf",
    "stationary_mixture_pdf",
    "log_stationary_mixture_pdf",
    "stationary_mixture_cdf",
    "transition_theta",
    "theta_turning_point",
    "printed_turning_point",
    "sample_dss_path",
]

_LOG_2PI = math.log(2.0 * math.pi)

# Probabilities returned by transition weights stay strictly inside (0, 1):
# downstream penalty derivatives divide by theta and (1 - theta).
_PROB_FLOOR = 1e-300
_PROB_CEIL = 1.0 - 1e-16


def _maybe_scalar(x: np.ndarray, scalar: bool):
    return float(x) if scalar else x


def _prep(beta) -> tuple[np.ndarray, bool]:
    arr = np.asarray(beta, dtype=float)
    return arr, arr.ndim == 0


def log_spike_pdf(beta, lambda0: float):
    """Log density of the Laplace spike at ``beta``."""
    if not lambda0 > 0.0:
        raise ParameterError(f"lambda0 must be positive, got {lambda0}")
    b, scalar = _prep(beta)
    out = math.log(lambda0 / 2.0) - np.abs(b) * lambda0
    return _maybe_scalar(out, scalar)


def spike_pdf(beta, lambda0: float):
    """Laplace spike density (lambda0 / 2) * exp(-|beta| * lambda0)."""
    b, scalar = _prep(beta)
    return _maybe_scalar(np.exp(log_spike_pdf(b, lambda0)), scalar)


def log_slab_cond_pdf(beta, mu, lambda1: float):
    """Log density of the conditional Gaussian slab N(mu, lambda1)."""
    if not lambda1 > 0.0:
        raise ParameterError(f"lambda1 must be positive, got {lambda1}")
    b, scalar = _prep(beta)
    mu = np.asarray(mu, dtype=float)
    out = -0.5 * (_LOG_2PI + math.log(lambda1)) - (b - mu) ** 2 / (2.0 * lambda1)
    return _maybe_scalar(out, scalar and mu.ndim == 0)


def slab_cond_pdf(beta, mu, lambda1: float):
    """Conditional slab density: Gaussian with mean ``mu``, variance ``lambda1``."""
    b, scalar = _prep(beta)
    mu_arr = np.asarray(mu, dtype=float)
    out = np.exp(log_slab_cond_pdf(b, mu_arr, lambda1))
    return _maybe_scalar(out, scalar and mu_arr.ndim == 0)


def slab_mean(beta_prev, params: DssParams):
    """Conditional slab mean phi0 + phi1 * (beta_prev - phi0)."""
    b, scalar = _prep(beta_prev)
    out = params.phi0 + params.phi1 * (b - params.phi0)
    return _maybe_scalar(out, scalar)


def log_slab_stationary_pdf(beta, params: DssParams):
    """Log of the stationary slab density: N(phi0, lambda1 / (1 - phi1^2))."""
    b, scalar = _prep(beta)
    a = params.stationary_var
    out = -0.5 * (_LOG_2PI + math.log(a)) - (b - params.phi0) ** 2 / (2.0 * a)
    return _maybe_scalar(out, scalar)


def slab_stationary_pdf(beta, params: DssParams):
    b, scalar = _prep(beta)
    return _maybe_scalar(np.exp(log_slab_stationary_pdf(b, params)), scalar)


def log_stationary_mixture_pdf(beta, params: DssParams):
    """Log of the stationary marginal: the theta-weighted spike/slab mixture."""
    b, scalar = _prep(beta)
    th = params.theta_marginal
    out = np.logaddexp(
        math.log(th) + log_slab_stationary_pdf(b, params),
        math.log1p(-th) + log_spike_pdf(b, params.lambda0),
    )
    return _maybe_scalar(out, scalar)


def stationary_mixture_pdf(beta, params: DssParams):
    """Stationary marginal density of the process (mixture of spike and slab)."""
    b, scalar = _prep(beta)
    return _maybe_scalar(np.exp(log_stationary_mixture_pdf(b, params)), scalar)


def stationary_mixture_cdf(beta, params: DssParams):
    """CDF of the stationary marginal, from the closed-form component CDFs."""
    from scipy import stats

    b, scalar = _prep(beta)
    th = params.theta_marginal
    slab = stats.norm.cdf(b, loc=params.phi0, scale=params.stationary_sd)
    spike = stats.laplace.cdf(b, loc=0.0, scale=1.0 / params.lambda0)
    return _maybe_scalar(th * slab + (1.0 - th) * spike, scalar)


def transition_theta(beta_prev, params: DssParams):
    """Slab inclusion weight given the lagged coefficient value.

    Posterior probability that ``beta_prev`` came from the stationary slab
    rather than the spike, under prior weight ``theta_marginal``.  Strictly
    inside (0, 1) for finite input.
    """
    b, scalar = _prep(beta_prev)
    th = params.theta_marginal
    logit = (
        math.log(th)
        - math.log1p(-th)
        + log_slab_stationary_pdf(b, params)
        - log_spike_pdf(b, params.lambda0)
    )
    out = _sigmoid(np.asarray(logit, dtype=float))
    return _maybe_scalar(out, scalar)


def _sigmoid(logit: np.ndarray) -> np.ndarray:
    out = np.empty_like(logit)
    pos = logit >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-logit[pos]))
    e = np.exp(logit[~pos])
    out[~pos] = e / (1.0 + e)
    return np.clip(out, _PROB_FLOOR, _PROB_CEIL)


def theta_turning_point(params: DssParams) -> float:
    """Location of the maximum of ``transition_theta`` on [phi0, inf).

    The log-odds of the weight have derivative lambda0 - (beta - phi0) / A
    above phi0 (A = stationary slab variance), so the weight rises until
    beta = phi0 + lambda0 * A and falls beyond it as the Laplace tail takes
    over.
    """
    return params.phi0 + params.lambda0 * params.stationary_var


def printed_turning_point(params: DssParams) -> float:
    """As-printed closed form for the turning point, kept for diagnostics.

    Evaluates (lambda0 + sqrt(2 C / A)) * A with
    C = log[(1 - Theta) / Theta * lambda0 / 2 * sqrt(2 pi A)].  The expression
    is not the zero of the weight derivative and its square root is undefined
    for many parameter values; returns NaN there.  Use
    :func:`theta_turning_point` for the actual argmax.
    """
    a = params.stationary_var
    th = params.theta_marginal
    c = math.log(
        (1.0 - th) / th * params.lambda0 / 2.0 * math.sqrt(2.0 * math.pi * a)
    )
    if 2.0 * c / a < 0.0:
        return math.nan
    return (params.lambda0 + math.sqrt(2.0 * c / a)) * a


@dataclass(frozen=True)
class DssPath:
    """One simulated trajectory of the process.

    ``values`` holds beta_0..beta_T (length T+1).  ``regimes`` and ``weights``
    hold, for t = 1..T, the sampled slab indicator and the slab weight
    computed from the previous value.
    """

    values: np.ndarray
    regimes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        g = np.asarray(self.regimes)
        w = np.asarray(self.weights, dtype=float)
        if v.ndim != 1 or g.shape != w.shape or v.shape[0] != g.shape[0] + 1:
            raise StructuralError(
                "inconsistent path lengths: need len(values) == len(regimes) + 1"
                " == len(weights) + 1"
            )
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "regimes", np.asarray(g, dtype=int))
        object.__setattr__(self, "weights", w)

    @property
    def horizon(self) -> int:
        return self.weights.shape[0]

    def to_csv(self, path) -> None:
        """Write columns t, beta, gamma, theta; the t = 0 row has no regime."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "beta", "gamma", "theta"])
            writer.writerow([0, repr(float(self.values[0])), "", ""])
            for t in range(1, self.values.shape[0]):
                writer.writerow(
                    [
                        t,
                        repr(float(self.values[t])),
                        int(self.regimes[t - 1]),
                        repr(float(self.weights[t - 1])),
                    ]
                )


def sample_dss_path(params: DssParams, horizon: int, seed: int) -> DssPath:
    """Draw a trajectory of length ``horizon`` from the process.

    The initial value comes from the stationary marginal mixture; each later
    step draws the slab indicator from the transition weight at the previous
    value and then the coefficient from the spike or the conditional slab.
    Bit-reproducible for a fixed seed.
    """
    if horizon < 1:
        raise ParameterError(f"horizon must be >= 1, got {horizon}")
    rng = np.random.default_rng(seed)
    phi0, phi1 = params.phi0, params.phi1
    lam0 = params.lambda0
    sd1 = math.sqrt(params.lambda1)
    a = params.stationary_var

    # Scalar log-density constants for the transition weight.
    log_odds0 = math.log(params.theta_marginal) - math.log1p(-params.theta_marginal)
    norm_const = -0.5 * (_LOG_2PI + math.log(a))
    lap_const = math.log(lam0 / 2.0)

    if rng.random() < params.theta_marginal:
        beta0 = rng.normal(phi0, math.sqrt(a))
    else:
        beta0 = rng.laplace(0.0, 1.0 / lam0)

    uniforms = rng.random(horizon).tolist()
    normals = rng.standard_normal(horizon).tolist()
    laplaces = rng.laplace(0.0, 1.0 / lam0, size=horizon).tolist()

    values = [float(beta0)]
    regimes = []
    weights = []
    prev = float(beta0)
    for t in range(horizon):
        logit = (
            log_odds0
            + norm_const
            - (prev - phi0) ** 2 / (2.0 * a)
            - lap_const
            + abs(prev) * lam0
        )
        if logit >= 0.0:
            theta = 1.0 / (1.0 + math.exp(-logit))
        else:
            e = math.exp(logit)
            theta = e / (1.0 + e)
        theta = min(max(theta, _PROB_FLOOR), _PROB_CEIL)
        gamma = 1 if uniforms[t] < theta else 0
        if gamma:
            prev = phi0 + phi1 * (prev - phi0) + sd1 * normals[t]
        else:
            prev = laplaces[t]
        values.append(prev)
        regimes.append(gamma)
        weights.append(theta)

    return DssPath(
        values=np.asarray(values),
        regimes=np.asarray(regimes),
        weights=np.asarray(weights),
    )
