"""Hyperparameter search followed by the windowed latency experiment.

Selects the basis size, bandwidth, polynomial order and penalty on the early
part of a meandrift stream, then trains on three windows ending at t = 0.8
and reports MAE against latency for both methods. A reduced search space
keeps the run under a minute; pass ``--full`` for the default grid.
"""

import argparse

import numpy as np

from tdx import SearchSpace, default_scenario, generate_stream, run_experiment, select_hyperparams

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--scenario", default="meandrift")
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--full", action="store_true", help="search the default grid")
args = parser.parse_args()

stream = generate_stream(default_scenario(args.scenario), seed=args.seed)
space = SearchSpace() if args.full else SearchSpace(m_values=(10, 12), h_grid_size=4,
                                                     r_values=(1, 2), lambda_values=(1.0, 5.0))
selection = select_hyperparams(stream, space=space)
print("selected:", selection.hyperparams.to_dict())

report = run_experiment(stream, hyperparams=selection.hyperparams)
for method in ("tdx", "static"):
    run = report.best(method)
    print(f"{method:>6}: best window {run.window}, summed MAE {run.curve.summed:.4f}")

tdx, static = report.best("tdx").curve, report.best("static").curve
print(f"{'latency':>8} {'tdx':>8} {'static':>8}")
for i in np.linspace(0, tdx.latencies.size - 1, 6).astype(int):
    print(f"{tdx.latencies[i]:8.3f} {tdx.maes[i]:8.4f} {static.maes[i]:8.4f}")
print(f"tdx better at {report.fraction_tdx_better():.0%} of test times, "
      f"significant at {report.fraction_significant():.0%}")
