import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tdx.baseline import (
    ENSEMBLE_OFFSETS,
    baseline_density,
    baseline_members,
    eval_spline,
    fit_natural_cubic_spline,
    sturges_bins,
    windowed_baseline,
)
from tdx.datagen import Stream, default_scenario, generate_stream
from tdx.errors import InsufficientDataError, ValidationError
from tdx.evaluation import mae
from tdx.model import forecast_grid


class TestSturges:
    @pytest.mark.parametrize("s,expected", [(1, 1), (2, 2), (64, 7), (100, 8), (100_000, 18)])
    def test_known_values(self, s, expected):
        assert sturges_bins(s) == expected

    @pytest.mark.parametrize("s", [0, -3, 2.5])
    def test_invalid(self, s):
        with pytest.raises(ValidationError):
            sturges_bins(s)

    @given(st.integers(1, 2**40))
    def test_closed_form(self, s):
        # Below 2**40 float log2 separates s from the next power of two.
        assert sturges_bins(s) == math.ceil(math.log2(s)) + 1


class TestNaturalSpline:
    def test_constant(self):
        sp = fit_natural_cubic_spline([0, 1, 3, 4], [2.5] * 4)
        np.testing.assert_allclose(sp(np.linspace(0, 4, 33)), 2.5, atol=1e-14)

    def test_reproduces_line(self):
        sp = fit_natural_cubic_spline([0, 1, 2], [1, 3, 5])
        x = np.linspace(0, 2, 21)
        np.testing.assert_allclose(sp(x), 1 + 2 * x, atol=1e-13)

    def test_interpolates_and_is_c2(self, rng):
        knots = np.sort(rng.uniform(0, 10, 12))
        values = rng.normal(size=12)
        sp = fit_natural_cubic_spline(knots, values)
        np.testing.assert_allclose(sp(knots), values, atol=1e-10)
        eps = 1e-5
        for k in knots[1:-1]:
            left = (sp(k - eps) - 2 * sp(k - 2 * eps) + sp(k - 3 * eps)) / eps**2
            right = (sp(k + 3 * eps) - 2 * sp(k + 2 * eps) + sp(k + eps)) / eps**2
            assert left == pytest.approx(right, abs=1e-2 * max(1.0, abs(left)))

    def test_natural_end_conditions(self, rng):
        knots = np.arange(6.0)
        sp = fit_natural_cubic_spline(knots, rng.normal(size=6))
        assert sp(knots[0], nu=2) == pytest.approx(0.0, abs=1e-12)
        assert sp(knots[-1], nu=2) == pytest.approx(0.0, abs=1e-12)

    def test_zero_outside_knots(self):
        sp = fit_natural_cubic_spline([0, 1, 2], [1, 1, 1])
        np.testing.assert_array_equal(sp([-0.5, 2.5]), [0.0, 0.0])
        assert eval_spline(sp, 1.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("knots", [[0, 1, 1, 2], [2, 1, 0], [0]])
    def test_invalid_knots(self, knots):
        with pytest.raises(ValidationError):
            fit_natural_cubic_spline(knots, np.zeros(len(knots)))


class TestBaselineDensity:
    def test_uniform_oracle(self, rng):
        samples = rng.uniform(0, 1, 100_000)
        curve = baseline_density(samples, forecast_grid(0.1, 0.9, 200))
        assert np.max(np.abs(curve.values - 1.0)) < 0.05

    def test_normal_oracle(self, rng):
        grid = forecast_grid(-3, 3, 200)
        curve = baseline_density(rng.standard_normal(100_000), grid)
        assert np.mean(np.abs(curve.values - stats.norm.pdf(grid))) < 0.02

    def test_nine_members_nonnegative(self, rng):
        # A sparse, spiky sample makes individual splines undershoot.
        samples = np.concatenate([rng.normal(0, 0.05, 30), rng.normal(5, 0.05, 30)])
        grid = forecast_grid(-1, 6, 300)
        members = baseline_members(samples, grid)
        assert members.shape == (len(ENSEMBLE_OFFSETS), 300)
        assert np.all(members >= 0)
        assert np.all(baseline_density(samples, grid).values >= 0)

    def test_members_use_shifted_bin_counts(self, rng):
        samples = rng.normal(size=64)
        grid = forecast_grid(-3, 3, 50)
        members = baseline_members(samples, grid)
        b = sturges_bins(64)
        for row, offset in zip(members, ENSEMBLE_OFFSETS):
            counts, edges = np.histogram(samples, bins=max(b + offset, 2))
            centres = 0.5 * (edges[:-1] + edges[1:])
            heights = counts / 64 / (edges[1] - edges[0])
            ref = np.maximum(fit_natural_cubic_spline(centres, heights)(grid), 0.0)
            np.testing.assert_allclose(row, ref, atol=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            baseline_density(np.arange(8.0), forecast_grid(0, 7, 10))

    def test_zero_range(self):
        with pytest.raises(InsufficientDataError):
            baseline_density(np.ones(20), forecast_grid(0, 2, 10))


class TestWindowedBaseline:
    @staticmethod
    def labelled_stream(n_times=120, per_time=20):
        # Each observation records its own time index, so pooling is visible.
        times = np.round(np.linspace(0, 1, n_times), 12)
        t = np.repeat(times, per_time)
        x = np.repeat(np.arange(n_times, dtype=float), per_time)
        return Stream(t, x + np.tile(np.linspace(0, 0.5, per_time), n_times))

    def pooled_indices(self, stream, index):
        grid = forecast_grid(-1, 130, 2000)
        curve = windowed_baseline(stream, index, grid)
        support = grid[curve.values > 0]
        return int(np.floor(support.min())), int(np.floor(support.max()))

    def test_interior_pools_nine_points(self):
        lo, hi = self.pooled_indices(self.labelled_stream(), 60)
        assert (lo, hi) == (56, 64)

    def test_start_truncated_to_five(self):
        lo, hi = self.pooled_indices(self.labelled_stream(), 0)
        assert (lo, hi) == (0, 4)

    def test_end_truncated_to_five(self):
        lo, hi = self.pooled_indices(self.labelled_stream(), 119)
        assert (lo, hi) == (115, 119)

    def test_bad_index(self):
        with pytest.raises(ValidationError):
            windowed_baseline(self.labelled_stream(), 120, forecast_grid(0, 1, 5))

    def test_stationary_neighbours_agree(self):
        stream = generate_stream(default_scenario("staticskewnormals"), seed=2)
        grid = forecast_grid(0, 12, 200)
        a = windowed_baseline(stream, 50, grid)
        b = windowed_baseline(stream, 51, grid)
        assert mae(a, b) < 0.02

    def test_too_sparse_window_names_range(self):
        stream = Stream(np.linspace(0, 1, 30), np.arange(30.0))
        with pytest.raises(InsufficientDataError, match="window"):
            windowed_baseline(stream, 0, forecast_grid(0, 30, 10))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(9, 400))
def test_baseline_always_nonnegative(seed, n):
    samples = np.random.default_rng(seed).standard_exponential(n)
    curve = baseline_density(samples, forecast_grid(-1, 10, 64))
    assert np.all(curve.values >= 0)
