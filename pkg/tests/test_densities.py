import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dssmap.densities import (
    DssPath,
    printed_turning_point,
    sample_dss_path,
    slab_cond_pdf,
    slab_mean,
    slab_stationary_pdf,
    spike_pdf,
    stationary_mixture_cdf,
    stationary_mixture_pdf,
    theta_turning_point,
    transition_theta,
)
from dssmap.errors import ParameterError, StructuralError
from dssmap.params import DssParams

from oracles import density_mass, ks_distance, maximize_1d, quad_cdf


class TestParams:
    def test_stationary_variance(self, mild_params):
        assert mild_params.stationary_var == pytest.approx(10.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"theta_marginal": 0.0},
            {"theta_marginal": 1.0},
            {"lambda0": 0.0},
            {"lambda0": -1.0},
            {"lambda1": 0.0},
            {"phi1": 1.0},
            {"phi1": -1.3},
            {"phi0": math.inf},
        ],
    )
    def test_domain_validation(self, kwargs):
        base = dict(theta_marginal=0.9, lambda0=1.0, lambda1=1.0, phi0=0.0, phi1=0.5)
        base.update(kwargs)
        with pytest.raises(ParameterError):
            DssParams(**base)


class TestSpikePdf:
    def test_origin_value(self):
        assert spike_pdf(0.0, 1.0) == 0.5

    def test_closed_form_point(self):
        # 0.45 * exp(-0.9), cross-checked below by quadrature normalization
        assert spike_pdf(1.0, 0.9) == pytest.approx(0.18295634688326962, abs=1e-15)

    @given(st.floats(-50, 50), st.floats(0.1, 5.0))
    def test_symmetry(self, beta, lam0):
        assert spike_pdf(beta, lam0) == spike_pdf(-beta, lam0)

    def test_normalizes(self, mild_params):
        mass, _ = __import__("scipy.integrate", fromlist=["quad"]).quad(
            lambda b: spike_pdf(b, 0.9), -80, 80, points=[0.0], limit=200
        )
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_rejects_bad_rate(self):
        with pytest.raises(ParameterError):
            spike_pdf(1.0, 0.0)


class TestSlabCondPdf:
    def test_standard_normal_origin(self):
        assert slab_cond_pdf(0.0, 0.0, 1.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))

    @pytest.mark.parametrize("mu", [-3.0, 0.0, 1.7])
    def test_mode_value(self, mu):
        assert slab_cond_pdf(mu, mu, 0.5) == pytest.approx(1.0 / math.sqrt(math.pi))

    def test_closed_form_point(self):
        # N(0.9, 0.5) at 1.5 = exp(-0.36)/sqrt(pi)
        assert slab_cond_pdf(1.5, 0.9, 0.5) == pytest.approx(0.3936217158571437, abs=1e-15)

    def test_normalizes(self):
        mass, _ = __import__("scipy.integrate", fromlist=["quad"]).quad(
            lambda b: slab_cond_pdf(b, 0.9, 0.5), -30, 30, limit=200
        )
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_rejects_bad_variance(self):
        with pytest.raises(ParameterError):
            slab_cond_pdf(0.0, 0.0, -0.5)


class TestSlabMean:
    def test_fixed_point(self, mild_params):
        assert slab_mean(mild_params.phi0, mild_params) == mild_params.phi0

    def test_zero_centre(self):
        p = DssParams(0.9, 1.0, 1.9, 0.0, 0.9)
        assert slab_mean(1.5, p) == pytest.approx(1.35)

    def test_offset_centre(self):
        p = DssParams(0.9, 1.0, 0.5, 1.0, 0.98)
        assert slab_mean(2.0, p) == pytest.approx(1.98)


class TestStationarySlab:
    def test_value_at_origin(self, mild_params):
        assert slab_stationary_pdf(0.0, mild_params) == pytest.approx(
            1.0 / math.sqrt(20 * math.pi)
        )

    def test_mode_value(self, mild_params):
        a = mild_params.stationary_var
        assert slab_stationary_pdf(mild_params.phi0, mild_params) == pytest.approx(
            1.0 / math.sqrt(2 * math.pi * a)
        )

    def test_normalizes(self, mild_params):
        mass, _ = __import__("scipy.integrate", fromlist=["quad"]).quad(
            lambda b: slab_stationary_pdf(b, mild_params), -60, 60, limit=200
        )
        assert mass == pytest.approx(1.0, abs=1e-8)


class TestStationaryMixture:
    def test_degenerate_slab(self, mild_params):
        p = DssParams(1 - 1e-12, 1.0, 1.9, 0.0, 0.9)
        for b in (-2.0, 0.0, 1.3):
            assert stationary_mixture_pdf(b, p) == pytest.approx(
                slab_stationary_pdf(b, p), rel=1e-9
            )

    def test_degenerate_spike(self):
        p = DssParams(1e-12, 1.0, 1.9, 0.0, 0.9)
        for b in (-2.0, 0.0, 1.3):
            assert stationary_mixture_pdf(b, p) == pytest.approx(spike_pdf(b, 1.0), rel=1e-9)

    def test_convex_combination_value(self, mild_params):
        # 0.9 * N(0; 0, 10) + 0.1 * 0.5
        expected = 0.9 / math.sqrt(20 * math.pi) + 0.05
        assert stationary_mixture_pdf(0.0, mild_params) == pytest.approx(expected, abs=1e-15)

    def test_mass_one(self, mild_params, strong_spike_params):
        for p in (mild_params, strong_spike_params):
            mass = density_mass(lambda b: stationary_mixture_pdf(b, p), p)
            assert mass == pytest.approx(1.0, abs=1e-8)

    def test_cdf_matches_quadrature(self, mild_params):
        pdf = lambda b: stationary_mixture_pdf(b, mild_params)
        for b in (-2.0, 0.3, 4.0):
            assert stationary_mixture_cdf(b, mild_params) == pytest.approx(
                quad_cdf(pdf, b), abs=1e-9
            )


class TestTransitionTheta:
    def test_reference_value(self, mild_params):
        # ratio of the two component densities at 0, weight 0.9
        num = 0.9 / math.sqrt(20 * math.pi)
        expected = num / (num + 0.1 * 0.5)
        assert transition_theta(0.0, mild_params) == pytest.approx(expected, abs=1e-14)

    def test_equal_density_crossover(self):
        # Theta solving Theta*N(0;0,1) = (1-Theta)*lambda0/2 puts the weight at 1/2.
        theta = 0.5 / (1.0 / math.sqrt(2 * math.pi) + 0.5)
        p = DssParams(theta, 1.0, 1.0, 0.0, 1e-12)
        assert transition_theta(0.0, p) == pytest.approx(0.5, abs=1e-12)

    def test_strictly_inside_unit_interval(self, mild_params):
        grid = np.linspace(-1e6, 1e6, 4001)
        vals = transition_theta(grid, mild_params)
        assert np.all(vals > 0.0)
        assert np.all(vals < 1.0)

    @given(st.floats(-30, 30))
    @settings(max_examples=60)
    def test_even_function_when_centred(self, beta):
        p = DssParams(0.9, 1.0, 1.9, 0.0, 0.9)
        assert transition_theta(beta, p) == pytest.approx(
            transition_theta(-beta, p), rel=1e-12
        )

    def test_monotone_up_then_down(self, mild_params):
        peak = theta_turning_point(mild_params)
        up = np.linspace(mild_params.phi0 + 1e-3, peak - 1e-3, 300)
        down = np.linspace(peak + 1e-3, peak + 6 * mild_params.stationary_sd, 300)
        assert np.all(np.diff(transition_theta(up, mild_params)) > 0)
        assert np.all(np.diff(transition_theta(down, mild_params)) < 0)


class TestTurningPoint:
    def test_matches_numeric_argmax(self, mild_params):
        arg, _ = maximize_1d(
            lambda b: transition_theta(b, mild_params), 0.0, 30.0, exclude_zero=False
        )
        assert theta_turning_point(mild_params) == pytest.approx(arg, abs=1e-6)

    def test_matches_numeric_argmax_alt_rate(self):
        p = DssParams(0.9, 0.9, 1.9, 0.0, 0.9)
        arg, _ = maximize_1d(lambda b: transition_theta(b, p), 0.0, 30.0, exclude_zero=False)
        assert theta_turning_point(p) == pytest.approx(9.0, abs=1e-9)
        assert arg == pytest.approx(9.0, abs=1e-6)

    def test_translates_with_centre(self):
        p = DssParams(0.9, 1.0, 1.9, 2.0, 0.9)
        assert theta_turning_point(p) == pytest.approx(2.0 + 10.0, rel=1e-12)

    def test_printed_expression_undefined_here(self, mild_params):
        assert math.isnan(printed_turning_point(mild_params))

    def test_printed_expression_when_defined(self):
        p = DssParams(0.2, 2.0, 1.9, 0.0, 0.9)
        a = p.stationary_var
        c = math.log((0.8 / 0.2) * 1.0 * math.sqrt(2 * math.pi * a))
        assert printed_turning_point(p) == pytest.approx((2.0 + math.sqrt(2 * c / a)) * a)


class TestSampler:
    def test_bit_reproducible(self, mild_params):
        a = sample_dss_path(mild_params, 500, seed=42)
        b = sample_dss_path(mild_params, 500, seed=42)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.regimes, b.regimes)
        assert np.array_equal(a.weights, b.weights)

    def test_weights_self_consistent(self, mild_params):
        path = sample_dss_path(mild_params, 200, seed=7)
        recomputed = transition_theta(path.values[:-1], mild_params)
        np.testing.assert_allclose(path.weights, recomputed, rtol=1e-12)

    def test_degenerate_slab_is_gaussian_ar1(self):
        p = DssParams(1 - 1e-12, 1.0, 0.19, 0.0, 0.9)
        path = sample_dss_path(p, 2000, seed=3)
        assert path.regimes.all()
        innov = path.values[1:] - 0.9 * path.values[:-1]
        assert abs(innov.std() - math.sqrt(0.19)) < 0.03

    def test_degenerate_spike_is_iid_laplace(self):
        p = DssParams(1e-12, 2.0, 0.19, 0.0, 0.9)
        path = sample_dss_path(p, 2000, seed=3)
        assert not path.regimes.any()
        lag1 = np.corrcoef(path.values[1:-1], path.values[2:])[0, 1]
        assert abs(lag1) < 0.08

    def test_marginal_matches_mixture(self, mild_params):
        path = sample_dss_path(mild_params, 30_000, seed=11)
        dist = ks_distance(
            path.values[1:], lambda x: stationary_mixture_cdf(x, mild_params)
        )
        assert dist < 0.02

    def test_empty_horizon_rejected(self, mild_params):
        with pytest.raises(ParameterError):
            sample_dss_path(mild_params, 0, seed=1)

    def test_csv_serialization(self, mild_params, tmp_path):
        path = sample_dss_path(mild_params, 5, seed=1)
        out = tmp_path / "path.csv"
        path.to_csv(out)
        lines = out.read_text().splitlines()
        assert lines[0] == "t,beta,gamma,theta"
        assert len(lines) == 7
        assert lines[1].startswith("0,") and lines[1].endswith(",,")
        t, beta, gamma, theta = lines[2].split(",")
        assert float(beta) == path.values[1]
        assert int(gamma) == path.regimes[0]
        assert float(theta) == path.weights[0]

    def test_length_validation(self):
        with pytest.raises(StructuralError):
            DssPath(values=np.zeros(3), regimes=np.zeros(3), weights=np.full(3, 0.5))
