import numpy as np
import pytest

from tdx import Hyperparams, SolverConfig, build_basis, make_fit_data

# Acceptance outcomes, filled by tests/test_acceptance.py and printed at the end.
ACCEPTANCE = {}


def record_acceptance(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data(rng):
    """A drifting two-bump sample on ten time points."""
    ts = np.repeat(np.linspace(0.0, 0.3, 10), 40)
    shift = 2.0 * ts
    xs = np.where(rng.random(ts.size) < 0.5, 2.0 + shift, 6.0 - shift)
    xs = xs + 0.7 * rng.standard_normal(ts.size)
    basis = build_basis(8, float(xs.min()), float(xs.max()), 0.8)
    return make_fit_data(xs, ts, basis, 2, kappa=0.15)


@pytest.fixture
def fast_solver():
    return SolverConfig(n_starts=2, seed=3)


@pytest.fixture
def hp8():
    return Hyperparams(m=8, h=0.8, r=2, lam=1.0)


def _selected_experiment(name, n_instances, seed=0):
    from tdx import default_scenario, generate_stream, run_experiment, select_hyperparams

    stream = generate_stream(default_scenario(name, n_instances=n_instances), seed=seed)
    selection = select_hyperparams(stream)
    report = run_experiment(stream, hyperparams=selection.hyperparams)
    return {"stream": stream, "selection": selection, "report": report}


@pytest.fixture(scope="session")
def weightdrift_run():
    """Model selection plus the windowed experiment on 5000 weightdrift instances."""
    return _selected_experiment("weightdrift", 5000)


@pytest.fixture(scope="session")
def static_run():
    """Model selection plus the windowed experiment on the stationary scenario."""
    return _selected_experiment("staticskewnormals", 25000)
