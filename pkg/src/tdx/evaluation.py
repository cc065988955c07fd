"""Forecast scoring and the windowed extrapolation experiment.

The experiment trains each method on several windows that end at the same
time, forecasts the density at every distinct stream time in the test
window, and scores each forecast by its mean absolute error against the
exact density (synthetic streams) or the smoothed-histogram baseline (real
streams).
"""

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .baseline import windowed_baseline
from .curve import DensityCurve
from .errors import ValidationError
from .model import density_curve, forecast_grid
from .objective import Hyperparams
from .optimizer import SolverConfig, fit_window

__all__ = [
    "mae",
    "WilcoxonResult",
    "wilcoxon_signed_rank",
    "signed_rank_null_counts",
    "ExperimentPlan",
    "LatencyCurve",
    "ExperimentReport",
    "evaluation_grid",
    "truth_curve",
    "run_experiment",
    "EXACT_MAX_N",
]

log = logging.getLogger(__name__)

EXACT_MAX_N = 25
MIN_SIGNED_RANK_N = 5


def mae(a, b):
    """Mean absolute error between two density curves on the same grid."""
    if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise ValidationError("MAE requires curves evaluated on identical grids")
    return float(np.mean(np.abs(a.values - b.values)))


# --- Wilcoxon signed-rank test ---------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    significant: bool
    w_plus: float
    w_minus: float
    n: int
    method: str

    def __iter__(self):
        # Unpacks as (p_value, significant).
        return iter((self.p_value, self.significant))


def signed_rank_null_counts(doubled_ranks):
    """Number of sign assignments giving each doubled positive-rank sum.

    ``doubled_ranks`` are twice the (possibly tied, half-integer) ranks, so
    the recursion runs over integers and the counts are exact.
    """
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts


def wilcoxon_signed_rank(d, alpha=0.01, method="auto"):
    """Two-sided Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped and tied magnitudes receive average ranks.
    Up to 25 nonzero differences the p-value comes from the exact null
    distribution (conditional on the tie pattern); beyond that a normal
    approximation with tie-corrected variance and continuity correction is
    used. Fewer than 5 nonzero differences give ``p = 1``.

    Parameters
    ----------
    d : array_like
        Paired differences.
    alpha : float
        Significance level.
    method : {"auto", "exact", "normal"}
        Force one branch regardless of the sample size.

    Returns
    -------
    WilcoxonResult
        Unpacks as ``(p_value, significant)``.
    """
    d = np.asarray(d, dtype=float).ravel()
    if not np.all(np.isfinite(d)):
        raise ValidationError("differences must be finite")
    if method not in ("auto", "exact", "normal"):
        raise ValidationError(f"unknown method {method!r}; expected 'auto', 'exact' or 'normal'")
    d = d[d != 0]
    n = d.size
    if n < MIN_SIGNED_RANK_N:
        return WilcoxonResult(1.0, False, np.nan, np.nan, n, "degenerate")
    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    if method == "exact" or (method == "auto" and n <= EXACT_MAX_N):
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = signed_rank_null_counts(doubled)
        k = int(round(2 * w_plus))
        total = float(counts.sum())
        lower = counts[: k + 1].sum() / total
        upper = counts[k:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
        method = "exact"
    else:
        mean = n * (n + 1) / 4.0
        _, ties = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(ties**3 - ties) / 48.0
        z = max(abs(w_plus - mean) - 0.5, 0.0) / np.sqrt(var)
        p = min(1.0, 2.0 * stats.norm.sf(z))
        method = "normal"
    return WilcoxonResult(float(p), bool(p < alpha), w_plus, w_minus, n, method)


# --- experiment ------------------------------------------------------------


def _check_window(w, name):
    lo, hi = (float(v) for v in w)
    if not (0.0 <= lo < hi <= 1.0):
        raise ValidationError(f"{name} {w} must satisfy 0 <= lo < hi <= 1")
    return lo, hi


@dataclass(frozen=True)
class ExperimentPlan:
    """Time segmentation of a stream.

    Model selection trains on ``ms_train`` and validates on ``ms_val``; the
    final models train on each of ``train_windows`` and forecast every
    distinct time in the closed ``test_window``. Training windows are
    half-open ``[lo, hi)``.
    """

    ms_train: tuple = (0.0, 0.45)
    ms_val: tuple = (0.45, 0.5)
    train_windows: tuple = ((0.5, 0.8), (0.6, 0.8), (0.7, 0.8))
    test_window: tuple = (0.8, 1.0)
    grid_points: int = 200
    grid_quantiles: tuple = (0.005, 0.995)

    def __post_init__(self):
        object.__setattr__(self, "ms_train", _check_window(self.ms_train, "ms_train"))
        object.__setattr__(self, "ms_val", _check_window(self.ms_val, "ms_val"))
        test = _check_window(self.test_window, "test_window")
        object.__setattr__(self, "test_window", test)
        windows = tuple(_check_window(w, "train window") for w in self.train_windows)
        if not windows:
            raise ValidationError("at least one training window is required")
        for w in windows:
            if w[1] > test[0]:
                raise ValidationError(f"training window {w} overlaps the test window {test}")
        object.__setattr__(self, "train_windows", windows)
        if int(self.grid_points) != self.grid_points or self.grid_points < 2:
            raise ValidationError("grid_points must be an integer >= 2")
        q_lo, q_hi = self.grid_quantiles
        if not 0.0 <= q_lo < q_hi <= 1.0:
            raise ValidationError("grid_quantiles must satisfy 0 <= lo < hi <= 1")

    def to_dict(self):
        return {
            "ms_train": list(self.ms_train),
            "ms_val": list(self.ms_val),
            "train_windows": [list(w) for w in self.train_windows],
            "test_window": list(self.test_window),
            "grid_points": int(self.grid_points),
            "grid_quantiles": list(self.grid_quantiles),
        }

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        if "train_windows" in doc:
            doc["train_windows"] = tuple(tuple(w) for w in doc["train_windows"])
        for key in ("ms_train", "ms_val", "test_window", "grid_quantiles"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)


@dataclass(frozen=True)
class LatencyCurve:
    latencies: np.ndarray
    maes: np.ndarray

    def __post_init__(self):
        lat = np.asarray(self.latencies, dtype=float)
        err = np.asarray(self.maes, dtype=float)
        if lat.shape != err.shape:
            raise ValidationError("latencies and maes must have equal length")
        if np.any(lat < -1e-12) or np.any(np.diff(lat) <= 0):
            raise ValidationError("latencies must be nonnegative and increasing")
        object.__setattr__(self, "latencies", lat)
        object.__setattr__(self, "maes", err)

    @property
    def summed(self):
        return float(self.maes.sum())


def evaluation_grid(stream, plan):
    """Forecast grid spanning the configured quantiles of all stream values."""
    lo, hi = np.quantile(stream.x, plan.grid_quantiles)
    return forecast_grid(float(lo), float(hi), plan.grid_points)


def truth_curve(stream, t, grid, source="exact"):
    """Reference density at time ``t``: exact (needs ``stream.truth``) or baseline."""
    if source == "exact":
        if stream.truth is None:
            raise ValidationError("exact truth requested but the stream has no true density")
        return DensityCurve(grid, stream.truth(grid, t))
    if source == "baseline":
        times = stream.times
        index = int(np.searchsorted(times, t))
        if index >= times.size or times[index] != t:
            raise ValidationError(f"time {t} is not a stream time point")
        return windowed_baseline(stream, index, grid)
    raise ValidationError(f"unknown truth source {source!r}; expected 'exact' or 'baseline'")


@dataclass
class MethodRun:
    method: str
    window: tuple
    n_train: int
    curve: LatencyCurve
    forecasts: list = field(repr=False)
    fit: object = field(repr=False)


@dataclass
class ExperimentReport:
    truth: str
    plan: ExperimentPlan
    grid: np.ndarray
    test_times: np.ndarray
    hyperparams: dict
    solver: SolverConfig
    runs: list
    best_window: dict
    wilcoxon: list
    alpha: float

    def run(self, method, window):
        for r in self.runs:
            if r.method == method and r.window == tuple(window):
                return r
        raise KeyError((method, window))

    def best(self, method):
        return self.run(method, self.best_window[method])

    def fraction_significant(self):
        if not self.wilcoxon:
            return 0.0
        return sum(w["significant"] for w in self.wilcoxon) / len(self.wilcoxon)

    def fraction_tdx_better(self):
        if not self.wilcoxon:
            return 0.0
        return sum(w["tdx_mae"] < w["static_mae"] for w in self.wilcoxon) / len(self.wilcoxon)

    def timings(self):
        return [
            {
                "method": r.method,
                "window": list(r.window),
                "n_train": r.n_train,
                "fit_seconds": r.fit.fit_seconds,
                "seconds_per_observation": r.fit.seconds_per_observation,
            }
            for r in self.runs
        ]

    def to_dict(self, timing=True):
        runs = []
        for r in self.runs:
            entry = {
                "method": r.method,
                "window": list(r.window),
                "window_length": round(r.window[1] - r.window[0], 12),
                "n_train": r.n_train,
                "latency": [float(v) for v in r.curve.latencies],
                "mae": [float(v) for v in r.curve.maes],
                "summed_mae": r.curve.summed,
                "fit": r.fit.to_dict(timing=timing),
            }
            if timing:
                entry["fit_seconds"] = r.fit.fit_seconds
            runs.append(entry)
        return {
            "truth": self.truth,
            "plan": self.plan.to_dict(),
            "grid": {"lo": float(self.grid[0]), "hi": float(self.grid[-1]), "n": int(self.grid.size)},
            "test_times": [float(t) for t in self.test_times],
            "hyperparams": {k: v.to_dict() for k, v in self.hyperparams.items()},
            "solver": self.solver.to_dict(),
            "runs": runs,
            "best_window": {k: list(v) for k, v in self.best_window.items()},
            "alpha": self.alpha,
            "wilcoxon": self.wilcoxon,
            "fraction_significant": self.fraction_significant(),
        }

    def latency_csv(self):
        """Rows ``latency,mae,method,window`` with window given by its length."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["latency", "mae", "method", "window"])
        for r in self.runs:
            length = f"{r.window[1] - r.window[0]:.12g}"
            for lat, err in zip(r.curve.latencies, r.curve.maes):
                writer.writerow([f"{lat:.12g}", repr(float(err)), r.method, length])
        return buf.getvalue()


def run_experiment(stream, plan=None, hyperparams=None, cfg=None, truth="exact",
                   methods=("tdx", "static"), alpha=0.01):
    """Train on every window, forecast the test window, and score.

    Parameters
    ----------
    stream : Stream
    plan : ExperimentPlan, optional
    hyperparams : Hyperparams or dict
        One set for all methods, or a mapping from method name to its set.
        The static method only uses ``m`` and ``h``.
    cfg : SolverConfig, optional
    truth : {'exact', 'baseline'}
    methods : sequence of {'tdx', 'static'}
    alpha : float
        Significance level of the per-time-point Wilcoxon tests.

    Returns
    -------
    ExperimentReport
    """
    plan = plan or ExperimentPlan()
    cfg = cfg or SolverConfig()
    if hyperparams is None:
        raise ValidationError("hyperparameters are required")
    if isinstance(hyperparams, Hyperparams):
        hyperparams = {m: hyperparams for m in methods}
    grid = evaluation_grid(stream, plan)
    times = stream.times
    lo, hi = plan.test_window
    test_times = times[(times >= lo) & (times <= hi)]
    if test_times.size == 0:
        raise ValidationError(f"no stream time points inside the test window {plan.test_window}")
    truths = [truth_curve(stream, t, grid, truth) for t in test_times]

    runs = []
    for method in methods:
        hp = hyperparams[method]
        for window in plan.train_windows:
            xs, ts = stream.window(*window)
            if xs.size == 0:
                raise ValidationError(f"training window {window} contains no observations")
            model, report = fit_window(xs, ts, hp, cfg, method=method, time_range=window)
            forecasts = [density_curve(model, t, grid) for t in test_times]
            errors = [mae(f, g) for f, g in zip(forecasts, truths)]
            curve = LatencyCurve(test_times - window[1], errors)
            log.info("%s %s: summed MAE %.5f", method, window, curve.summed)
            runs.append(MethodRun(method, window, int(xs.size), curve, forecasts, report))

    best_window = {}
    for method in methods:
        candidates = [r for r in runs if r.method == method]
        best_window[method] = min(candidates, key=lambda r: r.curve.summed).window

    tests = []
    if "tdx" in methods and "static" in methods:
        tdx = next(r for r in runs if r.method == "tdx" and r.window == best_window["tdx"])
        static = next(r for r in runs if r.method == "static" and r.window == best_window["static"])
        for k, t in enumerate(test_times):
            ref = truths[k].values
            d = np.abs(tdx.forecasts[k].values - ref) - np.abs(static.forecasts[k].values - ref)
            res = wilcoxon_signed_rank(d, alpha)
            tests.append({
                "t": float(t),
                "p_value": res.p_value,
                "significant": res.significant,
                "tdx_mae": tdx.curve.maes[k].item(),
                "static_mae": static.curve.maes[k].item(),
            })

    return ExperimentReport(
        truth=truth, plan=plan, grid=grid, test_times=test_times,
        hyperparams=dict(hyperparams), solver=cfg, runs=runs,
        best_window=best_window, wilcoxon=tests, alpha=alpha,
    )
