"""Synthetic drifting streams from time-varying skew-normal mixtures.

Each scenario lists mixture components with parameters at ``t = 0`` and
``t = 1``; in between, every parameter and every mixture weight moves
linearly. Observations are spread evenly over equally spaced time points in
``[0, 1]``.
"""

import csv
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import stats

from .errors import ScenarioError, ValidationError

__all__ = [
    "SkewNormalParams",
    "Component",
    "DriftScenario",
    "Stream",
    "sample_skew_normal",
    "skew_normal_pdf",
    "generate_stream",
    "sample_from_model",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "default_scenario",
    "SCENARIO_NAMES",
    "write_stream_csv",
    "read_stream_csv",
]

SCENARIO_NAMES = ("meandrift", "weightdrift", "sigmachange", "staticskewnormals")


@dataclass(frozen=True)
class SkewNormalParams:
    location: float
    scale: float
    shape: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ScenarioError(f"skew-normal scale must be positive, got {self.scale!r}")

    @property
    def delta(self):
        return self.shape / np.sqrt(1.0 + self.shape**2)

    def mean(self):
        return self.location + self.scale * self.delta * np.sqrt(2.0 / np.pi)

    def var(self):
        return self.scale**2 * (1.0 - 2.0 * self.delta**2 / np.pi)


def _skew_normal_draws(loc, scale, alpha, rng, size):
    delta = alpha / np.sqrt(1.0 + alpha**2)
    u0 = rng.standard_normal(size)
    u1 = rng.standard_normal(size)
    return loc + scale * (delta * np.abs(u0) + np.sqrt(1.0 - delta**2) * u1)


def sample_skew_normal(p, rng, size=None):
    """Draw skew-normal variates from two independent standard normals.

    With ``delta = alpha / sqrt(1 + alpha**2)``, the variate
    ``delta * |u0| + sqrt(1 - delta**2) * u1`` is standard skew-normal.
    """
    out = _skew_normal_draws(p.location, p.scale, p.shape, rng, size)
    return float(out) if size is None else out


def skew_normal_pdf(x, p):
    return stats.skewnorm.pdf(x, p.shape, loc=p.location, scale=p.scale)


@dataclass(frozen=True)
class Component:
    start: SkewNormalParams
    end: SkewNormalParams
    w0: float
    w1: float

    def at(self, t):
        a, b = self.start, self.end
        return SkewNormalParams(
            location=a.location + t * (b.location - a.location),
            scale=a.scale + t * (b.scale - a.scale),
            shape=a.shape + t * (b.shape - a.shape),
        )

    def weight(self, t):
        return self.w0 + t * (self.w1 - self.w0)


@dataclass(frozen=True)
class DriftScenario:
    name: str
    components: tuple
    n_instances: int = 25000
    n_time_points: int = 120
    x_range: tuple = (0.0, 12.0)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.components:
            raise ScenarioError("scenario needs at least one component")
        if int(self.n_instances) != self.n_instances or self.n_instances < 1:
            raise ScenarioError(f"n_instances must be a positive integer, got {self.n_instances!r}")
        if int(self.n_time_points) != self.n_time_points or self.n_time_points < 1:
            raise ScenarioError("n_time_points must be a positive integer")
        for label, ws in (("t=0", [c.w0 for c in self.components]),
                          ("t=1", [c.w1 for c in self.components])):
            ws = np.asarray(ws, dtype=float)
            if np.any(ws < 0) or np.any(ws > 1):
                raise ScenarioError(f"mixture weights at {label} must lie in [0, 1]")
            if abs(ws.sum() - 1.0) > 1e-9:
                raise ScenarioError(f"mixture weights at {label} sum to {ws.sum()}, not 1")
        if self.n_time_points > self.n_instances:
            raise ScenarioError("more time points than instances")

    def weights(self, t):
        w = np.array([c.weight(t) for c in self.components])
        return w / w.sum()

    def true_density(self, x, t):
        """Exact mixture density ``f*(x | t)``."""
        x = np.asarray(x, dtype=float)
        w = self.weights(t)
        return sum(wk * skew_normal_pdf(x, c.at(t)) for wk, c in zip(w, self.components))

    def time_points(self):
        return _round_times(np.linspace(0.0, 1.0, self.n_time_points))


def _round_times(ts):
    # Twelve significant digits survive a CSV round trip unchanged.
    return np.array([float(f"{t:.12g}") for t in ts])


@dataclass(frozen=True, eq=False)
class Stream:
    """A univariate stream: times ``t`` in ``[0, 1]`` and values ``x``.

    ``truth`` is an optional exact density ``truth(x, t)``.
    """

    t: np.ndarray
    x: np.ndarray
    truth: object = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if t.ndim != 1 or t.shape != x.shape:
            raise ValidationError("stream t and x must be 1-D arrays of equal length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    def __len__(self):
        return self.t.size

    @property
    def times(self):
        """Sorted distinct time values."""
        return np.unique(self.t)

    def window(self, lo, hi, closed=False):
        """Observations with ``lo <= t < hi`` (``<= hi`` when ``closed``)."""
        upper = self.t <= hi if closed else self.t < hi
        mask = (self.t >= lo) & upper
        return self.x[mask], self.t[mask]

    def subsample(self, every):
        return Stream(self.t[::every], self.x[::every], self.truth)


def generate_stream(scenario, seed=0):
    """Draw a stream from a scenario.

    Instances are split as evenly as possible over the time points (counts
    differ by at most one). Each time point gets its own child seed, so the
    output does not depend on generation order.
    """
    times = scenario.time_points()
    k = times.size
    counts = np.full(k, scenario.n_instances // k)
    counts[: scenario.n_instances % k] += 1
    children = np.random.SeedSequence(seed).spawn(k)
    ts, xs = [], []
    for t, n, child in zip(times, counts, children):
        rng = np.random.default_rng(child)
        params = [c.at(t) for c in scenario.components]
        comp = rng.choice(len(params), size=n, p=scenario.weights(t))
        loc, scale, alpha = np.array(
            [(q.location, q.scale, q.shape) for q in params]
        )[comp].T
        xs.append(_skew_normal_draws(loc, scale, alpha, rng, n))
        ts.append(np.full(n, t))
    return Stream(np.concatenate(ts), np.concatenate(xs), truth=scenario.true_density)


def sample_from_model(model, ts, seed=0):
    """Draw one observation from ``f(. | t)`` of a fitted model for each time."""
    from .model import weight_trajectory

    ts = np.asarray(ts, dtype=float)
    rng = np.random.default_rng(seed)
    gammas = np.atleast_2d(weight_trajectory(model, ts))
    u = rng.random(ts.size)
    comp = (gammas.cumsum(axis=1) < u[:, None]).sum(axis=1)
    comp = np.minimum(comp, model.m - 1)
    return model.basis.centers[comp] + model.h * rng.standard_normal(ts.size)


# --- scenario files --------------------------------------------------------

_SCENARIO_KEYS = {"name", "n_instances", "n_time_points", "x_range", "components", "metadata"}
_COMPONENT_KEYS = {"xi0", "omega0", "alpha0", "xi1", "omega1", "alpha1", "w0", "w1"}


def scenario_from_dict(doc, source="scenario"):
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: expected a JSON object")
    unknown = doc.keys() - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"{source}: unknown field(s) {sorted(unknown)}")
    for key in ("name", "components"):
        if key not in doc:
            raise ScenarioError(f"{source}: missing field '{key}'")
    comps = []
    for i, c in enumerate(doc["components"]):
        where = f"{source}: components[{i}]"
        if not isinstance(c, dict):
            raise ScenarioError(f"{where}: expected an object")
        missing, extra = _COMPONENT_KEYS - c.keys(), c.keys() - _COMPONENT_KEYS
        if missing or extra:
            raise ScenarioError(
                f"{where}: missing {sorted(missing)}, unknown {sorted(extra)}"
            )
        try:
            comps.append(Component(
                start=SkewNormalParams(float(c["xi0"]), float(c["omega0"]), float(c["alpha0"])),
                end=SkewNormalParams(float(c["xi1"]), float(c["omega1"]), float(c["alpha1"])),
                w0=float(c["w0"]),
                w1=float(c["w1"]),
            ))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
    x_range = tuple(float(v) for v in doc.get("x_range", (0.0, 12.0)))
    return DriftScenario(
        name=str(doc["name"]),
        components=tuple(comps),
        n_instances=doc.get("n_instances", 25000),
        n_time_points=doc.get("n_time_points", 120),
        x_range=x_range,
        metadata=dict(doc.get("metadata", {})),
    )


def scenario_to_dict(scenario):
    return {
        "name": scenario.name,
        "n_instances": int(scenario.n_instances),
        "n_time_points": int(scenario.n_time_points),
        "x_range": list(scenario.x_range),
        "components": [
            {
                "xi0": c.start.location, "omega0": c.start.scale, "alpha0": c.start.shape,
                "xi1": c.end.location, "omega1": c.end.scale, "alpha1": c.end.shape,
                "w0": c.w0, "w1": c.w1,
            }
            for c in scenario.components
        ],
        "metadata": dict(scenario.metadata),
    }


def load_scenario(path_or_name):
    """Load a scenario from a JSON file, or one of the bundled defaults by name."""
    name = str(path_or_name)
    if name in SCENARIO_NAMES:
        return default_scenario(name)
    try:
        with open(name, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{name}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return scenario_from_dict(doc, source=name)


def default_scenario(name, **overrides):
    """One of the bundled scenarios, optionally with fields replaced."""
    if name not in SCENARIO_NAMES:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")
    text = resources.files("tdx.scenarios").joinpath(f"{name}.json").read_text("utf-8")
    doc = json.loads(text)
    doc.update(overrides)
    return scenario_from_dict(doc, source=f"{name}.json")


# --- stream CSV ------------------------------------------------------------


def write_stream_csv(stream, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("t,x\n")
        for t, x in zip(stream.t, stream.x):
            fh.write(f"{float(t):.12g},{float(x)!r}\n")


def read_stream_csv(path, normalize_time=False):
    """Read a ``t,x`` stream file.

    With ``normalize_time`` the time column is mapped linearly so that its
    minimum becomes 0 and its maximum 1.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "x"]:
            raise ValidationError(f"{path}: expected header 't,x', got {header}")
        ts, xs = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                ts.append(float(row[0]))
                xs.append(float(row[1]))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    t = np.array(ts, dtype=float)
    x = np.array(xs, dtype=float)
    if t.size == 0:
        raise ValidationError(f"{path}: stream is empty")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
        raise ValidationError(f"{path}: stream contains non-finite values")
    if normalize_time:
        span = t.max() - t.min()
        if span <= 0:
            raise ValidationError(f"{path}: cannot normalise a single time value")
        t = _round_times((t - t.min()) / span)
    elif t.min() < 0 or t.max() > 1:
        raise ValidationError(
            f"{path}: times must lie in [0, 1]; pass normalize_time to rescale"
        )
    return Stream(t, x)
