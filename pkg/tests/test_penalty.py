import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dssmap.densities import slab_cond_pdf, spike_pdf, transition_theta
from dssmap.errors import ParameterError
from dssmap.params import DssParams
from dssmap.penalty import (
    penalty_scan,
    prospective_pen,
    prospective_shrinkage,
    pstar,
    retrospective_pen,
    retrospective_shrinkage,
    total_pen,
    total_shrinkage,
)

from oracles import abs_derivative, local_maxima


class TestProspectivePen:
    def test_spike_only_limit(self):
        p = DssParams(1e-12, 1.0, 1.9, 0.0, 0.9)
        for b in (-1.2, 0.0, 0.4, 3.0):
            expected = math.log(0.5) - abs(b)
            assert prospective_pen(b, 0.7, p) == pytest.approx(expected, abs=1e-9)

    def test_zero_point_value(self, mild_params):
        # log[(1 - theta(0)) * spike(0) + theta(0) * N(0; 0, 1.9)], frozen
        assert prospective_pen(0.0, 0.0, mild_params) == pytest.approx(
            -1.0390132938773609, abs=1e-12
        )

    def test_composition_identity(self, mild_params, rng):
        for _ in range(20):
            b, prev = rng.normal(0, 2, size=2)
            theta = transition_theta(prev, mild_params)
            mu = 0.9 * prev
            direct = math.log(
                (1 - theta) * spike_pdf(b, 1.0)
                + theta * slab_cond_pdf(b, mu, 1.9)
            )
            assert prospective_pen(b, prev, mild_params) == pytest.approx(direct, rel=1e-12)

    def test_single_interior_peak_for_large_neighbour(self, mild_params):
        # Conditioning on 1.5: one bump near the slab mean 1.35, none at 0.
        grid = np.linspace(-3, 5, 1601)
        vals = prospective_pen(grid, 1.5, mild_params)
        peaks = local_maxima(vals)
        assert len(peaks) == 1
        assert 1.0 < grid[peaks[0]] < 1.6
        # No local maximum at 0: the curve rises through the spike kink.
        at_zero = prospective_pen(0.0, 1.5, mild_params)
        assert prospective_pen(1e-4, 1.5, mild_params) > at_zero
        assert prospective_pen(-1e-4, 1.5, mild_params) < at_zero


class TestRetrospectivePen:
    def test_same_bivariate_function(self, mild_params, rng):
        for _ in range(10):
            nxt, b = rng.normal(0, 2, size=2)
            assert retrospective_pen(nxt, b, mild_params) == prospective_pen(
                nxt, b, mild_params
            )

    def test_peak_at_zero_for_zero_future(self, mild_params):
        grid = np.linspace(-3, 3, 1201)
        vals = retrospective_pen(0.0, grid, mild_params)
        assert abs(grid[int(np.argmax(vals))]) < 0.01

    def test_peak_near_large_future(self, mild_params):
        grid = np.linspace(-3, 3, 1201)
        vals = retrospective_pen(1.5, grid, mild_params)
        assert grid[int(np.argmax(vals))] > 1.0


class TestTotalPen:
    def test_normed_to_zero(self, mild_params, rng):
        for _ in range(10):
            prev, nxt = rng.normal(0, 2, size=2)
            assert total_pen(0.0, prev, nxt, mild_params) == 0.0

    def test_differences_free_of_norming(self, mild_params):
        b1, b2, prev, nxt = 0.6, -1.1, 1.5, 0.4
        diff = total_pen(b1, prev, nxt, mild_params) - total_pen(b2, prev, nxt, mild_params)
        raw = lambda b: prospective_pen(b, prev, mild_params) + retrospective_pen(
            nxt, b, mild_params
        )
        assert diff == pytest.approx(raw(b1) - raw(b2), abs=1e-12)

    def test_derivative_matches_shrinkage(self, mild_params):
        fd = -abs_derivative(lambda b: total_pen(b, 1.5, 1.5, mild_params), 0.7)
        assert fd == pytest.approx(
            total_shrinkage(0.7, 1.5, 1.5, mild_params).total, abs=1e-5
        )


class TestPstar:
    def test_equal_weight_crossover(self):
        theta = 0.5 / (1.0 / math.sqrt(2 * math.pi) + 0.5)
        p = DssParams(theta, 1.0, 1.0, 0.0, 1e-12)
        expected = (1.0 / math.sqrt(2 * math.pi)) / (1.0 / math.sqrt(2 * math.pi) + 0.5)
        assert pstar(0.0, 0.0, p) == pytest.approx(expected, abs=1e-12)

    def test_no_spike_limit(self):
        p = DssParams(1 - 1e-12, 1.0, 1.9, 0.0, 0.9)
        for b in (-1.0, 0.0, 2.5):
            assert pstar(b, 0.5, p) > 1 - 1e-6

    def test_laplace_tail_dominates(self, mild_params):
        assert pstar(50.0, 1.5, mild_params) < 1e-6

    def test_distinct_from_transition_weight(self, mild_params):
        # The conditional and marginal slab classifications must be different
        # functions; the gap exceeds 0.1 somewhere on this grid.
        prev = 1.5
        theta = transition_theta(prev, mild_params)
        gaps = [abs(pstar(b, prev, mild_params) - theta) for b in (0.0, 0.25, 0.5, 1.0)]
        assert max(gaps) > 0.1
        assert pstar(0.5, prev, mild_params) != pytest.approx(theta, abs=1e-3)


class TestProspectiveShrinkage:
    def test_spike_only_is_constant_rate(self):
        p = DssParams(1e-12, 1.3, 1.9, 0.0, 0.9)
        for b in (-2.0, 0.5, 4.0):
            assert prospective_shrinkage(b, 0.8, p) == pytest.approx(1.3, abs=1e-6)

    def test_vanishes_at_slab_mean_without_spike(self):
        p = DssParams(1 - 1e-12, 1.0, 1.9, 0.0, 0.9)
        mu = 0.9 * 1.5
        assert prospective_shrinkage(mu, 1.5, p) == pytest.approx(0.0, abs=1e-9)

    def test_matches_finite_difference(self, mild_params):
        fd = -abs_derivative(lambda b: prospective_pen(b, 1.5, mild_params), 1.0)
        assert prospective_shrinkage(1.0, 1.5, mild_params) == pytest.approx(fd, abs=1e-5)

    def test_rejects_zero(self, mild_params):
        with pytest.raises(ParameterError):
            prospective_shrinkage(0.0, 1.0, mild_params)


class TestRetrospectiveShrinkage:
    def test_matches_finite_difference(self, mild_params):
        fd = -abs_derivative(lambda b: retrospective_pen(1.5, b, mild_params), 0.8)
        assert retrospective_shrinkage(0.8, 1.5, mild_params) == pytest.approx(fd, abs=1e-5)

    def test_no_autoregression_drops_mean_channel(self):
        p = DssParams(0.7, 1.0, 1.9, 0.0, 0.0)
        a = p.stationary_var
        for b, nxt in ((0.5, 1.0), (-1.2, 0.3)):
            theta_next = transition_theta(b, p)
            p_next = pstar(nxt, b, p)
            bracket = 1.0 - math.copysign(1.0, b) * b / a
            expected = bracket * ((1 - p_next) * theta_next - p_next * (1 - theta_next))
            assert retrospective_shrinkage(b, nxt, p) == pytest.approx(expected, rel=1e-12)

    def test_rejects_zero(self, mild_params):
        with pytest.raises(ParameterError):
            retrospective_shrinkage(0.0, 1.0, mild_params)


class TestTotalShrinkage:
    def test_exact_additivity(self, mild_params, rng):
        for _ in range(10):
            b = rng.normal() or 0.3
            prev, nxt = rng.normal(0, 2, size=2)
            brk = total_shrinkage(b, prev, nxt, mild_params)
            assert brk.total == brk.prospective + brk.retrospective

    @given(st.floats(0.05, 3.0), st.floats(-2.5, 2.5), st.floats(-2.5, 2.5))
    @settings(max_examples=40, deadline=None)
    def test_sign_symmetry_when_centred(self, b, prev, nxt):
        p = DssParams(0.9, 1.0, 1.9, 0.0, 0.9)
        direct = total_shrinkage(b, prev, nxt, p).total
        mirrored = total_shrinkage(-b, -prev, -nxt, p).total
        assert direct == pytest.approx(mirrored, rel=1e-10, abs=1e-12)

    def test_derivative_consistency_three_parameter_sets(
        self, mild_params, sticky_params, strong_spike_params, rng
    ):
        for params in (mild_params, sticky_params, strong_spike_params):
            for _ in range(8):
                b = float(rng.uniform(0.05, 2.5) * rng.choice([-1, 1]))
                prev, nxt = rng.normal(0, 1.5, size=2)
                fd = -abs_derivative(lambda v: total_pen(v, prev, nxt, params), b)
                assert total_shrinkage(b, prev, nxt, params).total == pytest.approx(
                    fd, abs=1e-5
                )


class TestPenaltyScan:
    def test_rows_and_zero_gap(self, mild_params):
        grid = np.linspace(-1.0, 1.0, 5)
        rows = penalty_scan(mild_params, 1.5, 1.5, grid)
        assert len(rows) == 5
        mid = rows[2]
        assert mid[0] == 0.0
        assert mid[4] is None and mid[6] is None
        nonzero = rows[0]
        assert nonzero[6] == pytest.approx(nonzero[4] + nonzero[5])
