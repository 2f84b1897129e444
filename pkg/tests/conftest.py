import numpy as np
import pytest

from dssmap.params import DssParams


@pytest.fixture(scope="session")
def mild_params() -> DssParams:
    """Mild separation: stationary slab variance 10, gentle spike."""
    return DssParams(theta_marginal=0.9, lambda0=1.0, lambda1=1.9, phi0=0.0, phi1=0.9)


@pytest.fixture(scope="session")
def sticky_params() -> DssParams:
    """Best-cell settings of the benchmark grid: very persistent slab."""
    return DssParams(
        theta_marginal=0.9, lambda0=0.9, lambda1=10.0 * (1.0 - 0.98**2), phi0=0.0, phi1=0.98
    )


@pytest.fixture(scope="session")
def strong_spike_params() -> DssParams:
    """Heavier spike, balanced mixture weight."""
    return DssParams(theta_marginal=0.5, lambda0=2.0, lambda1=0.75, phi0=0.0, phi1=0.5)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
