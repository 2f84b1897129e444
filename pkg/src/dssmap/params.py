"""Hyperparameter container for the dynamic spike-and-slab process."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

__all__ = ["DssParams"]


@dataclass(frozen=True)
class DssParams:
    """Parameters of the dynamic spike-and-slab process.

    Attributes
    ----------
    theta_marginal : float
        Marginal slab importance weight, strictly inside (0, 1).
    lambda0 : float
        Rate of the Laplace spike, > 0. Larger values shrink harder to zero.
    lambda1 : float
        Conditional slab (Gaussian) variance, > 0.
    phi0 : float
        Stationary mean of the slab autoregression.
    phi1 : float
        Slab autoregression coefficient, |phi1| < 1 so the slab is stationary.
    """

    theta_marginal: float
    lambda0: float
    lambda1: float
    phi0: float
    phi1: float

    def __post_init__(self):
        if not (0.0 < self.theta_marginal < 1.0):
            raise ParameterError(
                f"theta_marginal must lie in (0, 1), got {self.theta_marginal}"
            )
        if not self.lambda0 > 0.0:
            raise ParameterError(f"lambda0 must be positive, got {self.lambda0}")
        if not self.lambda1 > 0.0:
            raise ParameterError(f"lambda1 must be positive, got {self.lambda1}")
        if not abs(self.phi1) < 1.0:
            raise ParameterError(
                f"|phi1| must be < 1 for a stationary slab, got {self.phi1}"
            )
        for name in ("theta_marginal", "lambda0", "lambda1", "phi0", "phi1"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    @property
    def stationary_var(self) -> float:
        """Stationary slab variance lambda1 / (1 - phi1^2)."""
        return self.lambda1 / (1.0 - self.phi1**2)

    @property
    def stationary_sd(self) -> float:
        return math.sqrt(self.stationary_var)
