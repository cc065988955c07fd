"""Hyperparameter search and sensitivity sweeps.

Selection runs in two phases on the model-selection windows of an
:class:`~tdx.evaluation.ExperimentPlan`. Phase 1 searches the number of
basis functions and the bandwidth with ``R = 2`` and ``lambda = 1`` fixed;
the bandwidth range depends on ``M`` and on the spread of the training data.
Phase 2 keeps the winning ``(M, h)`` and searches ``R`` and ``lambda``. Every
cell is scored by the summed MAE over the validation time points.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, SelectionError, ValidationError
from .evaluation import ExperimentPlan, evaluation_grid, mae, truth_curve
from .model import density_curve
from .objective import Hyperparams
from .optimizer import SolverConfig, fit_window

__all__ = [
    "SearchSpace",
    "SelectionResult",
    "h_bounds",
    "score_cell",
    "select_hyperparams",
    "sensitivity_sweep",
    "SWEEPS",
]

log = logging.getLogger(__name__)

H_MIN_FACTOR = 0.5
H_MAX_FACTOR = 1.2
SWEEPS = ("m_h_surface", "r_lambda_heatmap", "sample_count")


@dataclass(frozen=True)
class SearchSpace:
    m_values: tuple = (10, 12, 14)
    h_grid_size: int = 20
    r_values: tuple = (1, 2, 3)
    lambda_values: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    phase1_r: int = 2
    phase1_lambda: float = 1.0

    def __post_init__(self):
        for name in ("m_values", "r_values", "lambda_values"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValidationError(f"{name} must not be empty")
            object.__setattr__(self, name, values)
        if int(self.h_grid_size) != self.h_grid_size or self.h_grid_size < 1:
            raise ValidationError("h_grid_size must be a positive integer")

    def to_dict(self):
        return {
            "m_values": list(self.m_values),
            "h_grid_size": int(self.h_grid_size),
            "r_values": list(self.r_values),
            "lambda_values": list(self.lambda_values),
            "phase1_r": self.phase1_r,
            "phase1_lambda": self.phase1_lambda,
        }


def h_bounds(xs, m):
    """Bandwidth search interval for ``m`` basis functions.

    Both bounds scale the 1%-99% percentile range of ``xs`` divided by ``m``,
    by 0.5 and 1.2 respectively.

    >>> h_bounds(np.linspace(0, 100, 10001), 10)
    (4.9, 11.76)
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValidationError("cannot compute bandwidth bounds of an empty sample")
    p01, p99 = np.percentile(xs, [1.0, 99.0])
    spread = p99 - p01
    if not spread > 0:
        raise ValidationError("sample is degenerate: 1st and 99th percentiles coincide")
    return float(spread / m * H_MIN_FACTOR), float(spread / m * H_MAX_FACTOR)


def _distinct_times(stream, window, closed=False):
    times = stream.times
    lo, hi = window
    upper = times <= hi if closed else times < hi
    return times[(times >= lo) & upper]


def score_cell(stream, hp, train_window, eval_times, grid, cfg, truth="exact",
               truth_cache=None, closed=False, xs=None, ts=None):
    """Fit TDX on a window and return its summed MAE over ``eval_times``."""
    if xs is None:
        xs, ts = stream.window(*train_window, closed=closed)
    model, _ = fit_window(xs, ts, hp, cfg, method="tdx", time_range=train_window)
    total = 0.0
    for t in eval_times:
        ref = truth_cache.get(t) if truth_cache is not None else None
        if ref is None:
            ref = truth_curve(stream, t, grid, truth)
            if truth_cache is not None:
                truth_cache[t] = ref
        total += mae(density_curve(model, t, grid), ref)
    return total


def _try_score(*args, **kwargs):
    try:
        return score_cell(*args, **kwargs)
    except (NumericalError, ValidationError) as exc:
        log.warning("grid cell failed: %s", exc)
        return None


@dataclass
class SelectionResult:
    hyperparams: Hyperparams
    phase1: list = field(default_factory=list)
    phase2: list = field(default_factory=list)

    def to_dict(self):
        return {
            "hyperparams": self.hyperparams.to_dict(),
            "phase1": self.phase1,
            "phase2": self.phase2,
        }


def _winner(cells, key):
    valid = [c for c in cells if c["summed_mae"] is not None]
    if not valid:
        raise SelectionError("every grid cell failed to fit")
    return min(valid, key=key)


def select_hyperparams(stream, plan=None, space=None, cfg=None, truth="exact", kappa=None):
    """Two-phase grid search; returns a :class:`SelectionResult`.

    Ties are broken toward smaller ``M``, then smaller ``h``, then smaller
    ``R``, then larger ``lambda``.
    """
    plan = plan or ExperimentPlan()
    space = space or SearchSpace()
    cfg = cfg or SolverConfig()
    grid = evaluation_grid(stream, plan)
    xs, ts = stream.window(*plan.ms_train)
    if xs.size == 0:
        raise ValidationError(f"model-selection training window {plan.ms_train} is empty")
    val_times = _distinct_times(stream, plan.ms_val)
    if val_times.size == 0:
        raise ValidationError(f"model-selection validation window {plan.ms_val} is empty")
    cache = {}

    phase1 = []
    for m in space.m_values:
        h_lo, h_hi = h_bounds(xs, m)
        for h in np.linspace(h_lo, h_hi, space.h_grid_size):
            hp = Hyperparams(m=m, h=float(h), r=space.phase1_r, lam=space.phase1_lambda, kappa=kappa)
            score = _try_score(stream, hp, plan.ms_train, val_times, grid, cfg, truth, cache,
                               xs=xs, ts=ts)
            phase1.append({"m": int(m), "h": float(h), "summed_mae": score})
    best1 = _winner(phase1, key=lambda c: (c["summed_mae"], c["m"], c["h"]))

    phase2 = []
    for r in space.r_values:
        for lam in space.lambda_values:
            hp = Hyperparams(m=best1["m"], h=best1["h"], r=r, lam=lam, kappa=kappa)
            score = _try_score(stream, hp, plan.ms_train, val_times, grid, cfg, truth, cache,
                               xs=xs, ts=ts)
            phase2.append({"r": int(r), "lambda": float(lam), "summed_mae": score})
    best2 = _winner(phase2, key=lambda c: (c["summed_mae"], c["r"], -c["lambda"]))

    chosen = Hyperparams(m=best1["m"], h=best1["h"], r=best2["r"], lam=best2["lambda"], kappa=kappa)
    return SelectionResult(chosen, phase1, phase2)


def _latency_time(stream, window, latency):
    """Distinct stream time closest to ``window end + latency``."""
    times = stream.times
    target = window[1] + latency
    return float(times[np.argmin(np.abs(times - target))])


def sensitivity_sweep(stream, sweep, window=(0.3, 0.45), hyperparams=None, cfg=None,
                      truth="exact", m_values=tuple(range(4, 13)), h_values=None,
                      r_values=tuple(range(0, 7)), lambda_values=(0.0, 1.0, 2.0, 3.0, 4.0, 5.0),
                      every=(124, 62, 31, 16, 8, 4, 2, 1), latency=0.05, plan=None):
    """Score TDX over a one- or two-parameter grid on a closed window.

    Parameters
    ----------
    sweep : {'m_h_surface', 'r_lambda_heatmap', 'sample_count'}
        ``m_h_surface`` varies ``M`` and ``h`` with ``R = 2``, ``lambda = 1``;
        ``r_lambda_heatmap`` varies ``R`` and ``lambda`` at the given ``M`` and
        ``h``; ``sample_count`` keeps every n-th training observation.
    hyperparams : Hyperparams, optional
        Fixed values for the parameters a sweep does not vary. Required for
        the last two sweeps.
    h_values : sequence of float, optional
        Defaults to 30 values evenly spaced on ``[0.25, 3.0]``.
    latency : float
        Forecasts are scored at the stream time closest to ``window end +
        latency``.

    Returns
    -------
    list of dict
        One row per grid cell (parameter columns plus ``mae``), in grid order.
        Failed cells have ``mae = None``.
    """
    if sweep not in SWEEPS:
        raise ValidationError(f"unknown sweep {sweep!r}; expected one of {SWEEPS}")
    cfg = cfg or SolverConfig()
    plan = plan or ExperimentPlan()
    window = tuple(float(v) for v in window)
    grid = evaluation_grid(stream, plan)
    t_eval = _latency_time(stream, window, latency)
    cache = {}
    xs, ts = stream.window(*window, closed=True)
    if xs.size == 0:
        raise ValidationError(f"sweep window {window} is empty")

    def score(hp, sub_xs=xs, sub_ts=ts):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return _try_score(stream, hp, window, [t_eval], grid, cfg, truth, cache,
                              xs=sub_xs, ts=sub_ts)

    rows = []
    if sweep == "m_h_surface":
        if h_values is None:
            h_values = np.linspace(0.25, 3.0, 30)
        for m in m_values:
            for h in h_values:
                hp = Hyperparams(m=m, h=float(h), r=2, lam=1.0)
                rows.append({"m": int(m), "h": float(h), "mae": score(hp)})
        return rows
    if hyperparams is None:
        raise ValidationError(f"sweep {sweep!r} needs fixed hyperparameters")
    if sweep == "r_lambda_heatmap":
        for r in r_values:
            for lam in lambda_values:
                hp = Hyperparams(m=hyperparams.m, h=hyperparams.h, r=r, lam=lam,
                                 kappa=hyperparams.kappa)
                rows.append({"r": int(r), "lambda": float(lam), "mae": score(hp)})
        return rows
    order = np.argsort(ts, kind="stable")
    for n in every:
        keep = order[:: int(n)]
        rows.append({
            "every": int(n),
            "n_train": int(keep.size),
            "mae": score(hyperparams, xs[keep], ts[keep]),
        })
    return rows
