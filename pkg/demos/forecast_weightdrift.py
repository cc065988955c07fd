"""Fit one model on a drifting stream and forecast past the training window.

Generates the weightdrift scenario, fits the time-dependent model and the
static reference on the window [0.5, 0.8), then compares both forecasts
with the true density at a few later time points.

Run with ``python3 demos/forecast_weightdrift.py``.
"""

import numpy as np

from tdx import (
    Hyperparams,
    default_scenario,
    density_curve,
    fit_window,
    generate_stream,
    mae,
)
from tdx.evaluation import truth_curve
from tdx.model import forecast_grid, weight_trajectory

stream = generate_stream(default_scenario("weightdrift", n_instances=5000), seed=0)
xs, ts = stream.window(0.5, 0.8)
hp = Hyperparams(m=12, h=0.7, r=2, lam=1.0)

tdx_model, tdx_report = fit_window(xs, ts, hp, time_range=(0.5, 0.8))
static_model, _ = fit_window(xs, ts, hp, method="static", time_range=(0.5, 0.8))
print(f"trained on {xs.size} observations, best start {tdx_report.best_start}, "
      f"objective {tdx_report.best_objective:.2f}")

grid = forecast_grid(*np.quantile(stream.x, [0.005, 0.995]))
print(f"{'t':>6} {'tdx MAE':>9} {'static MAE':>11}")
for t in (0.8, 0.9, 1.0):
    truth = truth_curve(stream, t, grid)
    errs = [mae(density_curve(m, t, grid), truth) for m in (tdx_model, static_model)]
    print(f"{t:6.2f} {errs[0]:9.4f} {errs[1]:11.4f}")

# Basis weights at the window end and at the far forecast.
for t in (0.8, 1.0):
    print(f"weights at t={t}: {np.round(weight_trajectory(tdx_model, t), 3)}")
