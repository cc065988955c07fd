import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tdx.basis import BasisSet, build_basis
from tdx.compositional import build_ilr_basis
from tdx.errors import NumericalOverflowError, ValidationError
from tdx.objective import (
    Hyperparams,
    make_fit_data,
    objective_and_gradient,
    objective_gradient,
    objective_value,
    regularization_gradient,
    regularization_penalty,
    temporal_weights,
    weighted_log_likelihood,
)


def central_difference(fun, b, step=1e-6):
    grad = np.zeros_like(b)
    for idx in np.ndindex(b.shape):
        up, down = b.copy(), b.copy()
        up[idx] += step
        down[idx] -= step
        grad[idx] = (fun(up) - fun(down)) / (2 * step)
    return grad


def brute_force_loglik(xs, ts, w, basis, b, r):
    """Direct per-observation evaluation, independent of the grouped code path."""
    u = build_ilr_basis(basis.m).u
    total = 0.0
    for x, t, wi in zip(xs, ts, w):
        a = t ** np.arange(r + 1)
        z = u @ (b @ a)
        gamma = np.exp(z - z.max())
        gamma /= gamma.sum()
        phi = stats.norm.pdf(x, basis.centers, basis.bandwidth)
        total += wi * np.log(phi @ gamma)
    return total


class TestHyperparams:
    def test_round_trip(self):
        hp = Hyperparams(m=10, h=0.5, r=3, lam=2.0, kappa=0.1)
        assert Hyperparams.from_dict(hp.to_dict()) == hp
        assert hp.to_dict()["lambda"] == 2.0

    @pytest.mark.parametrize("kwargs", [
        {"m": 1, "h": 1.0}, {"m": 4, "h": 0.0}, {"m": 4, "h": 1.0, "r": -1},
        {"m": 4, "h": 1.0, "lam": -0.1}, {"m": 4, "h": 1.0, "kappa": 0.0},
        {"m": 4.5, "h": 1.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            Hyperparams(**kwargs)


class TestTemporalWeights:
    def test_newest_weight_one(self):
        w = temporal_weights([0.1, 0.5, 0.5], 0.2)
        np.testing.assert_array_equal(w[1:], 1.0)

    def test_half_weight_at_kappa(self):
        assert temporal_weights([0.3, 0.5], 0.2)[0] == pytest.approx(0.5, rel=1e-14)

    def test_quarter_weight_at_twice_kappa(self):
        assert temporal_weights([0.1, 0.5], 0.2)[0] == pytest.approx(0.25, rel=1e-14)

    def test_empty(self):
        with pytest.raises(ValidationError):
            temporal_weights([], 1.0)

    def test_weights_in_unit_interval(self, rng):
        w = temporal_weights(rng.random(100), 0.05)
        assert np.all((w > 0) & (w <= 1))


class TestPenalty:
    def test_zero(self):
        assert regularization_penalty(np.zeros((3, 3)), 4.0) == 0.0

    def test_offset_excluded(self):
        b = np.zeros((3, 3))
        b[:, 0] = 5.0
        assert regularization_penalty(b, 2.0) == 0.0

    def test_single_entry(self):
        b = np.zeros((3, 3))
        b[1, 2] = 3.0
        assert regularization_penalty(b, 2.0) == pytest.approx(18.0)

    def test_gradient_matches_finite_difference(self, rng):
        b = rng.normal(size=(4, 3))
        fd = central_difference(lambda v: regularization_penalty(v, 1.7), b)
        np.testing.assert_allclose(regularization_gradient(b, 1.7), fd, rtol=1e-7, atol=1e-8)

    def test_negative_lambda(self):
        with pytest.raises(ValidationError):
            regularization_penalty(np.zeros((2, 2)), -1.0)


class TestMakeFitData:
    def test_sorted_by_time(self, rng):
        ts = rng.permutation(np.repeat([0.0, 0.2, 0.4], 5))
        xs = rng.normal(size=ts.size)
        data = make_fit_data(xs, ts, build_basis(3, -1, 1, 1), 1)
        assert np.all(np.diff(data.ts) >= 0)
        np.testing.assert_array_equal(data.times, [0.0, 0.2, 0.4])
        np.testing.assert_array_equal(np.sort(data.xs), np.sort(xs))

    def test_default_kappa_is_half_span(self):
        data = make_fit_data([0, 1, 2], [0.5, 0.6, 0.8], build_basis(3, 0, 2, 1), 1)
        assert data.kappa == pytest.approx(0.15)

    @pytest.mark.parametrize("xs,ts", [([], []), ([1.0, 2.0], [0.0]), ([np.nan], [0.0])])
    def test_invalid_samples(self, xs, ts):
        with pytest.raises(ValidationError):
            make_fit_data(xs, ts, build_basis(3, 0, 2, 1), 1)

    def test_invalid_weights(self):
        with pytest.raises(ValidationError):
            make_fit_data([0.0, 1.0], [0.0, 0.0], build_basis(3, 0, 2, 1), 0, weights=[1.0, 0.0])


class TestLogLikelihood:
    def test_single_sample_uniform(self):
        data = make_fit_data([0.0], [0.0], BasisSet([0.0, 1.0], 1.0), 0, weights=[1.0])
        value = weighted_log_likelihood(data, np.zeros((1, 1)))
        expected = np.log(0.5 * (stats.norm.pdf(0.0) + stats.norm.pdf(1.0)))
        assert value == pytest.approx(expected, rel=1e-14)
        assert value == pytest.approx(-1.13801, abs=1e-5)

    def test_zero_coefficients_closed_form(self, rng):
        basis = build_basis(6, 0, 5, 0.7)
        xs, ts = rng.uniform(-1, 6, 80), rng.uniform(0, 1, 80)
        w = rng.uniform(0.1, 1, 80)
        data = make_fit_data(xs, ts, basis, 2, weights=w)
        mean_pdf = stats.norm.pdf(xs[:, None], basis.centers, 0.7).mean(axis=1)
        assert weighted_log_likelihood(data, np.zeros((5, 3))) == pytest.approx(
            np.sum(w * np.log(mean_pdf)), rel=1e-12
        )

    def test_duplicate_equals_double_weight(self, rng):
        basis = build_basis(4, 0, 3, 0.5)
        b = rng.normal(size=(3, 2))
        single = make_fit_data([1.2, 2.0], [0.1, 0.3], basis, 1, weights=[2.0, 0.5])
        dup = make_fit_data([1.2, 1.2, 2.0], [0.1, 0.1, 0.3], basis, 1, weights=[1.0, 1.0, 0.5])
        assert weighted_log_likelihood(single, b) == pytest.approx(
            weighted_log_likelihood(dup, b), rel=1e-13
        )

    def test_matches_brute_force(self, small_data, rng):
        b = rng.normal(size=(7, 3))
        ref = brute_force_loglik(small_data.xs, small_data.ts, small_data.w, small_data.basis, b, 2)
        assert weighted_log_likelihood(small_data, b) == pytest.approx(ref, rel=1e-11)

    def test_coefficient_shape_checked(self, small_data):
        with pytest.raises(ValidationError):
            weighted_log_likelihood(small_data, np.zeros((7, 2)))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_overflow_reports_sample(self, small_data):
        b = np.zeros((7, 3))
        b[0, 0] = np.inf
        with pytest.raises(NumericalOverflowError) as info:
            weighted_log_likelihood(small_data, b)
        assert info.value.index is not None


class TestGradient:
    def test_finite_difference(self, small_data, hp8, rng):
        b = rng.normal(0, 1, size=(7, 3))
        fd = central_difference(lambda v: objective_value(small_data, v, hp8), b)
        grad = objective_gradient(small_data, b, hp8)
        assert np.max(np.abs(grad - fd)) / np.max(np.abs(fd)) < 1e-5

    def test_value_consistent(self, small_data, hp8, rng):
        b = rng.normal(size=(7, 3))
        value, _ = objective_and_gradient(small_data, b, hp8)
        assert value == objective_value(small_data, b, hp8)

    def test_penalty_gradient_vanishes_at_zero(self, small_data):
        g0 = objective_gradient(small_data, np.zeros((7, 3)), Hyperparams(m=8, h=0.8, lam=0.0))
        g5 = objective_gradient(small_data, np.zeros((7, 3)), Hyperparams(m=8, h=0.8, lam=5.0))
        np.testing.assert_array_equal(g0, g5)

    def test_symmetric_data_zero_gradient(self):
        # Data symmetric about the midpoint of two centres at a single time.
        xs = np.array([-1.0, -0.2, 0.3, 0.5, 0.7, 1.2, 2.0])
        data = make_fit_data(xs, np.zeros(xs.size), BasisSet([0.0, 1.0], 0.8), 0,
                             weights=np.ones(xs.size))
        grad = objective_gradient(data, np.zeros((1, 1)), Hyperparams(m=2, h=0.8, r=0, lam=0.0))
        assert abs(grad[0, 0]) < 1e-14


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    m=st.sampled_from([2, 5, 10]),
    r=st.integers(0, 3),
    lam=st.sampled_from([0.0, 1.0, 5.0]),
)
def test_gradient_property(seed, m, r, lam):
    rng = np.random.default_rng(seed)
    ts = np.round(rng.uniform(0, 1, 60), 2)
    xs = rng.normal(5, 2, 60)
    data = make_fit_data(xs, ts, build_basis(m, 0, 10, 1.0), r)
    hp = Hyperparams(m=m, h=1.0, r=r, lam=lam)
    b = rng.normal(0, 1, size=(m - 1, r + 1))
    fd = central_difference(lambda v: objective_value(data, v, hp), b)
    grad = objective_gradient(data, b, hp)
    assert np.max(np.abs(grad - fd)) <= 1e-5 * max(np.max(np.abs(fd)), 1.0)
