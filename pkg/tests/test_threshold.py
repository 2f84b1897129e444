import numpy as np
import pytest

from dssmap.errors import DesignError, StructuralError
from dssmap.params import DssParams
from dssmap.threshold import (
    ThresholdPair,
    fixed_point_residual,
    one_site_map,
    one_site_objective,
    selection_thresholds,
    threshold_scan,
)


class TestThresholdPair:
    def test_band_membership(self):
        band = ThresholdPair(lower=-1.0, upper=0.5)
        assert band.contains(0.0)
        assert not band.contains(0.5)

    def test_rejects_empty_band(self):
        with pytest.raises(StructuralError):
            ThresholdPair(lower=1.0, upper=-1.0)


class TestSelectionThresholds:
    def test_spike_only_soft_threshold_band(self):
        # Without a slab the penalty is the Laplace rate, so the band is
        # the classic (-lambda0, lambda0).
        p = DssParams(1e-12, 1.0, 1.9, 0.0, 0.0)
        band = selection_thresholds(1.0, 0.0, 0.0, p)
        assert band.lower == pytest.approx(-1.0, abs=1e-6)
        assert band.upper == pytest.approx(1.0, abs=1e-6)

    def test_symmetric_case_regression(self, mild_params):
        band = selection_thresholds(1.0, 0.0, 0.0, mild_params)
        assert band.lower == pytest.approx(-band.upper, abs=1e-7)
        assert band.upper == pytest.approx(0.5584004196, abs=1e-6)

    def test_positive_neighbours_pull_the_band(self, mild_params):
        band = selection_thresholds(1.0, 1.5, 1.5, mild_params)
        assert band.upper < abs(band.lower)
        # Regression baselines from the grid+refinement optimizer.
        assert band.lower == pytest.approx(-1.2512646, abs=1e-5)
        assert band.upper == pytest.approx(-0.9234704, abs=1e-5)

    def test_continuity_in_neighbours(self, mild_params):
        base = selection_thresholds(1.0, 1.5, 1.5, mild_params)
        moved = selection_thresholds(1.0, 1.5 + 1e-4, 1.5, mild_params)
        assert abs(moved.lower - base.lower) < 1e-2
        assert abs(moved.upper - base.upper) < 1e-2

    def test_rejects_zero_regressor(self, mild_params):
        with pytest.raises(DesignError):
            selection_thresholds(0.0, 0.0, 0.0, mild_params)


class TestOneSiteMap:
    def test_no_signal_stays_zero(self, mild_params):
        assert one_site_map(0.0, 1.0, 0.0, 0.0, mild_params) == 0.0

    def test_strong_signal_sticky(self, sticky_params):
        beta_hat = one_site_map(3.0, 1.0, 3.0, 3.0, sticky_params)
        assert beta_hat != 0.0
        assert abs(beta_hat - 3.0) < 0.2
        assert fixed_point_residual(beta_hat, 3.0, 1.0, 3.0, 3.0, sticky_params) < 1e-6

    @pytest.mark.parametrize("neighbour", [0.0, 1.5])
    def test_band_equivalence_sweep(self, mild_params, neighbour):
        band = selection_thresholds(1.0, neighbour, neighbour, mild_params)
        for y in np.linspace(-3, 3, 41):
            beta_hat = one_site_map(float(y), 1.0, neighbour, neighbour, mild_params)
            assert (beta_hat == 0.0) == band.contains(y)
            if beta_hat != 0.0:
                res = fixed_point_residual(
                    beta_hat, float(y), 1.0, neighbour, neighbour, mild_params
                )
                assert res < 1e-6

    def test_never_below_zero_objective(self, mild_params, rng):
        for _ in range(25):
            z, prev, nxt = rng.normal(0, 1.5, size=3)
            x = float(rng.uniform(0.3, 2.0))
            beta_hat = one_site_map(float(z), x, float(prev), float(nxt), mild_params)
            obj = lambda b: float(
                one_site_objective(np.asarray([b]), float(z), x, float(prev), float(nxt), mild_params)[0]
            )
            assert obj(beta_hat) >= obj(0.0) - 1e-12

    def test_rejects_zero_regressor(self, mild_params):
        with pytest.raises(DesignError):
            one_site_map(1.0, 0.0, 0.0, 0.0, mild_params)

    def test_residual_defined_only_off_zero(self, mild_params):
        with pytest.raises(StructuralError):
            fixed_point_residual(0.0, 1.0, 1.0, 0.0, 0.0, mild_params)


class TestThresholdScan:
    def test_rows_shape_and_consistency(self, mild_params):
        rows = threshold_scan(mild_params, 1.0, 0.0, 0.0, np.linspace(-1, 1, 5))
        assert len(rows) == 5
        lower, upper = rows[0][1], rows[0][2]
        for y, lo, up, beta_hat in rows:
            assert lo == lower and up == upper
            assert (beta_hat == 0.0) == (lo < y < up)
