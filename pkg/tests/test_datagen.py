import json

import numpy as np
import pytest
from scipy import integrate, stats

from tdx.basis import build_basis
from tdx.datagen import (
    SCENARIO_NAMES,
    Component,
    DriftScenario,
    SkewNormalParams,
    Stream,
    default_scenario,
    generate_stream,
    load_scenario,
    read_stream_csv,
    sample_from_model,
    sample_skew_normal,
    scenario_from_dict,
    scenario_to_dict,
    skew_normal_pdf,
    write_stream_csv,
)
from tdx.errors import ScenarioError, ValidationError
from tdx.model import TdxModel, weight_trajectory


def component(xi, omega, alpha, w0, w1=None):
    p = SkewNormalParams(xi, omega, alpha)
    return Component(p, p, w0, w0 if w1 is None else w1)


class TestSkewNormal:
    def test_zero_shape_is_normal(self, rng):
        draws = sample_skew_normal(SkewNormalParams(2.0, 1.5, 0.0), rng, size=1_000_000)
        assert abs(draws.mean() - 2.0) < 4 * 1.5 / 1000

    @pytest.mark.parametrize("alpha", [-4.0, -1.0, 2.0, 6.0])
    def test_moments(self, rng, alpha):
        p = SkewNormalParams(1.0, 2.0, alpha)
        draws = sample_skew_normal(p, rng, size=1_000_000)
        mean, var = stats.skewnorm.stats(alpha, loc=1.0, scale=2.0, moments="mv")
        se = np.sqrt(var / draws.size)
        assert abs(draws.mean() - mean) < 5 * se
        assert draws.var() == pytest.approx(float(var), rel=0.01)
        delta = alpha / np.sqrt(1 + alpha**2)
        assert p.mean() == pytest.approx(1.0 + 2.0 * delta * np.sqrt(2 / np.pi), rel=1e-14)
        assert p.var() == pytest.approx(4.0 * (1 - 2 * delta**2 / np.pi), rel=1e-14)

    def test_distribution_matches_scipy(self, rng):
        p = SkewNormalParams(-1.0, 0.7, 3.0)
        draws = sample_skew_normal(p, rng, size=20000)
        result = stats.kstest(draws, stats.skewnorm(3.0, loc=-1.0, scale=0.7).cdf)
        assert result.pvalue > 1e-3

    def test_scalar_draw(self, rng):
        assert isinstance(sample_skew_normal(SkewNormalParams(0, 1, 1), rng), float)

    def test_pdf_matches_closed_form(self):
        p = SkewNormalParams(0.5, 1.2, -2.0)
        x = np.linspace(-4, 4, 9)
        z = (x - 0.5) / 1.2
        ref = 2 / 1.2 * stats.norm.pdf(z) * stats.norm.cdf(-2.0 * z)
        np.testing.assert_allclose(skew_normal_pdf(x, p), ref, rtol=1e-12)

    def test_nonpositive_scale(self):
        with pytest.raises(ScenarioError):
            SkewNormalParams(0.0, 0.0, 1.0)


class TestScenario:
    def test_weights_interpolate_linearly(self):
        scen = DriftScenario("s", (component(0, 1, 0, 0.2, 0.6), component(3, 1, 0, 0.8, 0.4)))
        np.testing.assert_allclose(scen.weights(0.5), [0.4, 0.6])

    def test_parameters_interpolate_linearly(self):
        c = Component(SkewNormalParams(0, 1, -2), SkewNormalParams(4, 3, 2), 1.0, 1.0)
        mid = c.at(0.25)
        assert (mid.location, mid.scale, mid.shape) == (1.0, 1.5, -1.0)

    @pytest.mark.parametrize("ws", [[(0.5, 0.5), (0.6, 0.5)], [(1.2, 0.5), (-0.2, 0.5)]])
    def test_invalid_weights(self, ws):
        comps = tuple(component(0, 1, 0, w0, w1) for w0, w1 in ws)
        with pytest.raises(ScenarioError):
            DriftScenario("bad", comps)

    def test_zero_instances(self):
        with pytest.raises(ScenarioError):
            default_scenario("meandrift", n_instances=0)

    @pytest.mark.parametrize("name", SCENARIO_NAMES)
    def test_bundled_scenarios_normalised(self, name):
        scen = default_scenario(name)
        for t in (0.0, 0.37, 1.0):
            mass, _ = integrate.quad(lambda x: scen.true_density(x, t), -np.inf, np.inf, limit=200)
            assert mass == pytest.approx(1.0, abs=1e-8)
            assert scen.weights(t).sum() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("name", SCENARIO_NAMES)
    def test_bundled_scenarios_mostly_in_range(self, name):
        scen = default_scenario(name)
        for t in (0.0, 1.0):
            mass, _ = integrate.quad(lambda x: scen.true_density(x, t), *scen.x_range, limit=200)
            assert mass > 0.98

    def test_static_scenario_has_no_drift(self):
        scen = default_scenario("staticskewnormals")
        x = np.linspace(-2, 14, 300)
        np.testing.assert_array_equal(scen.true_density(x, 0.0), scen.true_density(x, 1.0))

    def test_weightdrift_only_weights_move(self):
        scen = default_scenario("weightdrift")
        for c in scen.components:
            assert c.start == c.end
        assert any(c.w0 != c.w1 for c in scen.components)

    def test_dict_round_trip(self):
        scen = default_scenario("meandrift")
        again = scenario_from_dict(json.loads(json.dumps(scenario_to_dict(scen))))
        assert again == scen

    def test_unknown_field_reported(self):
        doc = scenario_to_dict(default_scenario("meandrift"))
        doc["components"][1]["skew"] = 1
        with pytest.raises(ScenarioError, match=r"components\[1\]"):
            scenario_from_dict(doc)

    def test_missing_field_reported(self):
        doc = scenario_to_dict(default_scenario("meandrift"))
        del doc["components"]
        with pytest.raises(ScenarioError, match="components"):
            scenario_from_dict(doc)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(scenario_to_dict(default_scenario("sigmachange"))))
        assert load_scenario(path) == default_scenario("sigmachange")

    def test_invalid_json_line_reported(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text('{\n  "name": "x",\n  oops\n}')
        with pytest.raises(ScenarioError, match="line 3"):
            load_scenario(path)

    def test_unknown_bundled_name(self):
        with pytest.raises(ScenarioError):
            default_scenario("nosuch")


class TestGenerateStream:
    def test_default_size(self):
        stream = generate_stream(default_scenario("meandrift"), seed=0)
        assert len(stream) == 25000
        assert stream.times.size == 120
        assert stream.times[0] == 0.0 and stream.times[-1] == 1.0

    def test_even_split(self):
        stream = generate_stream(default_scenario("weightdrift", n_instances=1000), seed=0)
        _, counts = np.unique(stream.t, return_counts=True)
        assert counts.max() - counts.min() <= 1
        assert counts.sum() == 1000

    def test_deterministic(self):
        scen = default_scenario("sigmachange", n_instances=2000)
        a, b = generate_stream(scen, 7), generate_stream(scen, 7)
        np.testing.assert_array_equal(a.x, b.x)
        assert not np.array_equal(a.x, generate_stream(scen, 8).x)

    def test_sample_matches_truth(self):
        scen = default_scenario("weightdrift", n_instances=60000, n_time_points=2)
        stream = generate_stream(scen, seed=1)
        for t in (0.0, 1.0):
            xs, _ = stream.window(t, t, closed=True)
            cdf = lambda v: np.array([integrate.quad(lambda x: scen.true_density(x, t), -30, vi)[0]
                                      for vi in np.atleast_1d(v)])
            grid = np.quantile(xs, np.linspace(0.05, 0.95, 19))
            np.testing.assert_allclose(cdf(grid), np.linspace(0.05, 0.95, 19), atol=0.01)

    def test_truth_attached(self):
        scen = default_scenario("meandrift", n_instances=500)
        stream = generate_stream(scen)
        np.testing.assert_array_equal(stream.truth([1.0, 5.0], 0.3), scen.true_density([1.0, 5.0], 0.3))


class TestStream:
    def test_window_half_open_and_closed(self):
        s = Stream([0.0, 0.5, 0.5, 1.0], [1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(s.window(0.0, 0.5)[0], [1.0])
        np.testing.assert_array_equal(s.window(0.0, 0.5, closed=True)[0], [1.0, 2.0, 3.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            Stream([0.0, 1.0], [1.0])

    def test_csv_round_trip(self, tmp_path):
        stream = generate_stream(default_scenario("meandrift", n_instances=600), seed=3)
        path = tmp_path / "s.csv"
        write_stream_csv(stream, path)
        back = read_stream_csv(path)
        np.testing.assert_array_equal(back.t, stream.t)
        np.testing.assert_array_equal(back.x, stream.x)

    def test_normalize_time(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("t,x\n2000,1.0\n2005,2.0\n2010,3.0\n")
        with pytest.raises(ValidationError, match="normalize"):
            read_stream_csv(path)
        s = read_stream_csv(path, normalize_time=True)
        np.testing.assert_array_equal(s.t, [0.0, 0.5, 1.0])

    @pytest.mark.parametrize("text,match", [
        ("time,x\n0,1\n", "header"),
        ("t,x\n0,1,2\n", ":2:"),
        ("t,x\n0,abc\n", ":2:"),
        ("t,x\n", "empty"),
        ("t,x\n0,nan\n", "non-finite"),
    ])
    def test_malformed_csv(self, tmp_path, text, match):
        path = tmp_path / "bad.csv"
        path.write_text(text)
        with pytest.raises(ValidationError, match=match):
            read_stream_csv(path)


class TestSampleFromModel:
    def test_component_frequencies(self):
        gen = TdxModel(build_basis(3, 0, 20, 0.5), [[0.3, 1.0], [-0.4, 0.5]], 1)
        ts = np.full(30000, 0.6)
        xs = sample_from_model(gen, ts, seed=2)
        labels = np.rint(xs / 10).astype(int)
        freq = np.bincount(labels, minlength=3) / xs.size
        np.testing.assert_allclose(freq, weight_trajectory(gen, 0.6), atol=0.01)

    def test_deterministic(self):
        gen = TdxModel(build_basis(3, 0, 2, 0.5), np.zeros((2, 1)), 0)
        np.testing.assert_array_equal(sample_from_model(gen, np.zeros(50), 4),
                                      sample_from_model(gen, np.zeros(50), 4))
