"""Command-line interface.

Every command resolves its settings from built-in defaults, an optional
``--config`` JSON file and explicit flags, in that order of precedence, and
writes its outputs into the run directory given by ``--out``. The resolved
settings are echoed to ``config.json`` so a run can be repeated with
``--config <run>/config.json``. Wall-clock measurements go to a separate
``timings.json``; every other output is byte-identical across re-runs with
the same settings.

Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.
"""

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .baseline import windowed_baseline
from .curve import write_curve_csv
from .datagen import (
    Stream,
    generate_stream,
    load_scenario,
    read_stream_csv,
    scenario_from_dict,
    scenario_to_dict,
    write_stream_csv,
)
from .errors import NumericalError, ValidationError
from .evaluation import ExperimentPlan, run_experiment
from .model import density_curve, forecast_grid, load_model, save_model
from .modelselect import SWEEPS, SearchSpace, h_bounds, select_hyperparams, sensitivity_sweep
from .objective import Hyperparams
from .optimizer import SolverConfig, fit_window

__all__ = ["main", "build_parser", "resolve_config", "COMMANDS"]

log = logging.getLogger("tdx")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

SOLVER_DEFAULTS = {
    "optimality_tolerance": 1e-4,
    "max_iterations": 500,
    "n_starts": 4,
    "artificial_bound": 2.0,
    "seed": 0,
}
HP_DEFAULTS = {"m": 12, "h": None, "r": 2, "lambda": 1.0, "kappa": None}
SOURCE_DEFAULTS = {"stream": None, "scenario": None, "n_instances": None, "normalize_time": False}
_plan = ExperimentPlan().to_dict()
PLAN_DEFAULTS = {k: _plan[k] for k in ("ms_train", "ms_val", "train_windows", "test_window",
                                       "grid_points", "grid_quantiles")}
_space = SearchSpace().to_dict()

COMMANDS = {
    "generate": {"scenario": "meandrift", "seed": 0, "n_instances": None, "n_time_points": None},
    "fit": {
        "stream": None, "normalize_time": False, "window": [0.5, 0.8], "method": "tdx",
        **HP_DEFAULTS, **SOLVER_DEFAULTS,
    },
    "forecast": {"model": None, "t": None, "grid_lo": None, "grid_hi": None, "grid_points": 200},
    "baseline": {
        "stream": None, "normalize_time": False, "time_index": None, "half_width": 4,
        "grid_lo": None, "grid_hi": None, "grid_points": 200,
    },
    "evaluate": {
        **SOURCE_DEFAULTS, "truth": "auto", "hyperparams": None, **HP_DEFAULTS,
        "alpha": 0.01, **PLAN_DEFAULTS, **SOLVER_DEFAULTS,
    },
    "select": {
        **SOURCE_DEFAULTS, "truth": "auto", "kappa": None, **PLAN_DEFAULTS,
        "m_values": _space["m_values"], "h_grid_size": _space["h_grid_size"],
        "r_values": _space["r_values"], "lambda_values": _space["lambda_values"],
        **SOLVER_DEFAULTS,
    },
    "sweep": {
        **SOURCE_DEFAULTS, "truth": "auto", "sweep": None, "window": [0.3, 0.45],
        "latency": 0.05, "hyperparams": None, **HP_DEFAULTS,
        "m_values": list(range(4, 13)), "h_values": None, "r_values": list(range(0, 7)),
        "lambda_values": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        "every": [124, 62, 31, 16, 8, 4, 2, 1],
        "grid_points": 200, "grid_quantiles": PLAN_DEFAULTS["grid_quantiles"],
        **SOLVER_DEFAULTS,
    },
}

REQUIRED = {
    "fit": ("stream",),
    "forecast": ("model", "t"),
    "baseline": ("stream", "time_index"),
    "sweep": ("sweep",),
}

HELP = {
    "generate": "draw a synthetic stream from a drift scenario",
    "fit": "fit a TDX or static model on a time window of a stream",
    "forecast": "evaluate a fitted model's density at a time point",
    "baseline": "smoothed-histogram reference density at a stream time index",
    "evaluate": "run the windowed extrapolation experiment",
    "select": "two-phase hyperparameter grid search",
    "sweep": "sensitivity sweep over hyperparameters or training-set size",
}


# --- flag parsing -----------------------------------------------------------


def _window(text):
    try:
        lo, hi = text.split(":")
        return [float(lo), float(hi)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def _bool(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


# key -> (argparse kwargs, help)
FLAGS = {
    "scenario": ({"type": str}, "bundled scenario name or path to a scenario JSON"),
    "stream": ({"type": str}, "stream CSV with header t,x"),
    "model": ({"type": str}, "model JSON written by 'fit'"),
    "hyperparams": ({"type": str}, "JSON with m, h, r, lambda, kappa (or a 'select' report)"),
    "seed": ({"type": int}, "seed for data generation and random starts"),
    "n_instances": ({"type": int}, "override the scenario's instance count"),
    "n_time_points": ({"type": int}, "override the scenario's number of time points"),
    "normalize_time": ({"type": _bool}, "map the time column's min to 0 and max to 1"),
    "window": ({"type": _window}, "time window LO:HI"),
    "method": ({"choices": ("tdx", "static")}, "model variant"),
    "m": ({"type": int}, "number of basis functions"),
    "h": ({"type": float}, "basis bandwidth"),
    "r": ({"type": int}, "polynomial order of the weight trajectory"),
    "lambda": ({"type": float, "dest": "lambda"}, "regularisation strength"),
    "kappa": ({"type": float}, "half-weight age of the temporal instance weights"),
    "optimality_tolerance": ({"type": float}, "gradient infinity-norm stopping tolerance"),
    "max_iterations": ({"type": int}, "BFGS iteration limit per start"),
    "n_starts": ({"type": int}, "number of optimizer starts"),
    "artificial_bound": ({"type": float}, "random starts are uniform on [-bound, bound]"),
    "t": ({"type": float}, "forecast time (may lie past the training window)"),
    "grid_lo": ({"type": float}, "first grid point"),
    "grid_hi": ({"type": float}, "last grid point"),
    "grid_points": ({"type": int}, "number of grid points"),
    "grid_quantiles": ({"type": float, "nargs": 2}, "stream quantiles bounding the grid"),
    "time_index": ({"type": int}, "index into the sorted distinct stream times"),
    "half_width": ({"type": int}, "time indices pooled on each side"),
    "truth": ({"choices": ("auto", "exact", "baseline")}, "reference density source"),
    "alpha": ({"type": float}, "Wilcoxon significance level"),
    "ms_train": ({"type": _window}, "model-selection training window"),
    "ms_val": ({"type": _window}, "model-selection validation window"),
    "train_windows": ({"type": _window, "nargs": "+"}, "training windows"),
    "test_window": ({"type": _window}, "test window (closed)"),
    "m_values": ({"type": int, "nargs": "+"}, "basis sizes to search"),
    "h_grid_size": ({"type": int}, "bandwidths per basis size"),
    "h_values": ({"type": float, "nargs": "+"}, "bandwidths to sweep"),
    "r_values": ({"type": int, "nargs": "+"}, "polynomial orders to search"),
    "lambda_values": ({"type": float, "nargs": "+"}, "regularisation strengths to search"),
    "sweep": ({"choices": SWEEPS}, "which sweep to run"),
    "latency": ({"type": float}, "forecast offset after the sweep window"),
    "every": ({"type": int, "nargs": "+"}, "subsampling steps for the sample_count sweep"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="tdx", description="Temporal density extrapolation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", help="JSON file of settings (flags take precedence)")
        p.add_argument("--out", required=True, help="run directory for all outputs")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        for key in defaults:
            kwargs, text = FLAGS[key]
            kwargs = {"dest": key, **kwargs}
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, default=argparse.SUPPRESS, help=text, **kwargs)
    return parser


def resolve_config(command, file_doc=None, flags=None):
    """Merge defaults, a config document and explicit flags; reject unknown keys."""
    defaults = COMMANDS[command]
    config = json.loads(json.dumps(defaults))
    for source, doc in (("config file", file_doc), ("flags", flags)):
        if not doc:
            continue
        if not isinstance(doc, dict):
            raise ValidationError(f"{source}: expected a JSON object")
        unknown = sorted(doc.keys() - defaults.keys())
        if unknown:
            raise ValidationError(
                f"{source}: unknown key(s) {unknown} for command '{command}'"
            )
        config.update(doc)
    missing = [k for k in REQUIRED.get(command, ()) if config.get(k) is None]
    if missing:
        raise ValidationError(f"missing required setting(s) {missing} for '{command}'")
    return config


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {what} {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{what} {path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(rows[0].keys()))
        for row in rows:
            writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v
                             for v in row.values()])


# --- config to domain objects ---------------------------------------------


def _solver(cfg):
    return SolverConfig(**{k: cfg[k] for k in SOLVER_DEFAULTS})


def _plan_from(cfg):
    return ExperimentPlan.from_dict({k: cfg[k] for k in PLAN_DEFAULTS})


def _load_stream(cfg):
    """Stream plus a flag telling whether it carries an exact density."""
    scenario = None
    if cfg.get("scenario") is not None:
        overrides = {}
        if cfg.get("n_instances") is not None:
            overrides["n_instances"] = cfg["n_instances"]
        scenario = _scenario(cfg["scenario"], overrides)
    if cfg.get("stream") is not None:
        stream = _read_stream(cfg["stream"], cfg.get("normalize_time", False))
        if scenario is not None:
            stream = Stream(stream.t, stream.x, truth=scenario.true_density)
        return stream
    if scenario is None:
        raise ValidationError("either 'stream' or 'scenario' must be given")
    return generate_stream(scenario, cfg["seed"])


def _read_stream(path, normalize):
    try:
        return read_stream_csv(path, normalize_time=normalize)
    except OSError as exc:
        raise ValidationError(f"cannot read stream {path}: {exc.strerror}") from exc


def _scenario(name, overrides):
    try:
        scenario = load_scenario(name)
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {name}: {exc.strerror}") from exc
    if overrides:
        doc = scenario_to_dict(scenario)
        doc.update(overrides)
        scenario = scenario_from_dict(doc, source=str(name))
    return scenario


def _truth(cfg, stream):
    if cfg["truth"] == "auto":
        return "exact" if stream.truth is not None else "baseline"
    return cfg["truth"]


def _hyperparams(cfg, explicit, xs):
    """Hyperparams from flags/config, a hyperparameter file, and derived defaults.

    Keys set explicitly (config file or flag) win over the hyperparameter
    file. A missing bandwidth defaults to the midpoint of the selection
    range for the training sample. The resolved values are written back
    into ``cfg``.
    """
    if cfg.get("hyperparams"):
        doc = _read_json(cfg["hyperparams"], "hyperparameter file")
        if isinstance(doc, dict) and "hyperparams" in doc:
            doc = doc["hyperparams"]
        if not isinstance(doc, dict):
            raise ValidationError("hyperparameter file must hold a JSON object")
        unknown = sorted(doc.keys() - HP_DEFAULTS.keys())
        if unknown:
            raise ValidationError(f"hyperparameter file: unknown key(s) {unknown}")
        for key, value in doc.items():
            if key not in explicit:
                cfg[key] = value
    if cfg["h"] is None:
        lo, hi = h_bounds(xs, cfg["m"])
        cfg["h"] = 0.5 * (lo + hi)
    return Hyperparams(m=cfg["m"], h=cfg["h"], r=cfg["r"], lam=cfg["lambda"], kappa=cfg["kappa"])


# --- commands ----------------------------------------------------------------


def cmd_generate(cfg, out, explicit):
    overrides = {k: cfg[k] for k in ("n_instances", "n_time_points") if cfg[k] is not None}
    scenario = _scenario(cfg["scenario"], overrides)
    stream = generate_stream(scenario, cfg["seed"])
    write_stream_csv(stream, out / "stream.csv")
    _write_json(out / "scenario.json", scenario_to_dict(scenario))
    log.info("wrote %d observations at %d time points", len(stream), stream.times.size)
    return {}


def _fit_window_bounds(window):
    lo, hi = (float(v) for v in window)
    if not lo < hi:
        raise ValidationError(f"window {window} must satisfy lo < hi")
    return lo, hi


def cmd_fit(cfg, out, explicit):
    stream = _read_stream(cfg["stream"], cfg["normalize_time"])
    lo, hi = _fit_window_bounds(cfg["window"])
    # Windows are half-open except when they reach the end of the stream.
    closed = hi >= stream.t.max()
    xs, ts = stream.window(lo, hi, closed=closed)
    if xs.size == 0:
        raise ValidationError(f"window [{lo}, {hi}) contains no observations")
    hp = _hyperparams(cfg, explicit, xs)
    model, report = fit_window(xs, ts, hp, _solver(cfg), method=cfg["method"], time_range=(lo, hi))
    save_model(model, out / "model.json")
    _write_json(out / "fit_report.json", report.to_dict(timing=False))
    return {
        "fit_seconds": report.fit_seconds,
        "seconds_per_observation": report.seconds_per_observation,
        "n_observations": report.n_observations,
    }


def cmd_forecast(cfg, out, explicit):
    model = load_model(cfg["model"])
    centers, h = model.basis.centers, model.h
    lo = cfg["grid_lo"] if cfg["grid_lo"] is not None else float(centers[0] - 10 * h)
    hi = cfg["grid_hi"] if cfg["grid_hi"] is not None else float(centers[-1] + 10 * h)
    grid = forecast_grid(lo, hi, cfg["grid_points"])
    write_curve_csv(density_curve(model, cfg["t"], grid), out / "forecast.csv")
    return {}


def cmd_baseline(cfg, out, explicit):
    stream = _read_stream(cfg["stream"], cfg["normalize_time"])
    if len(stream) == 0:
        raise ValidationError("stream is empty")
    if cfg["grid_lo"] is not None and cfg["grid_hi"] is not None:
        grid = forecast_grid(cfg["grid_lo"], cfg["grid_hi"], cfg["grid_points"])
    else:
        q_lo, q_hi = np.quantile(stream.x, PLAN_DEFAULTS["grid_quantiles"])
        lo = cfg["grid_lo"] if cfg["grid_lo"] is not None else float(q_lo)
        hi = cfg["grid_hi"] if cfg["grid_hi"] is not None else float(q_hi)
        grid = forecast_grid(lo, hi, cfg["grid_points"])
    curve = windowed_baseline(stream, cfg["time_index"], grid, half_width=cfg["half_width"])
    write_curve_csv(curve, out / "baseline.csv")
    return {}


def cmd_evaluate(cfg, out, explicit):
    stream = _load_stream(cfg)
    plan = _plan_from(cfg)
    xs, _ = stream.window(*plan.ms_train)
    if xs.size == 0:
        xs = stream.x
    hp = _hyperparams(cfg, explicit, xs)
    truth = _truth(cfg, stream)
    report = run_experiment(stream, plan, hp, _solver(cfg), truth=truth, alpha=cfg["alpha"])
    _write_json(out / "report.json", report.to_dict(timing=False))
    (out / "latency.csv").write_text(report.latency_csv(), encoding="utf-8")
    return {"runs": report.timings()}


def cmd_select(cfg, out, explicit):
    stream = _load_stream(cfg)
    space = SearchSpace(
        m_values=tuple(cfg["m_values"]), h_grid_size=cfg["h_grid_size"],
        r_values=tuple(cfg["r_values"]), lambda_values=tuple(float(v) for v in cfg["lambda_values"]),
    )
    started = time.perf_counter()
    result = select_hyperparams(stream, _plan_from(cfg), space, _solver(cfg),
                                truth=_truth(cfg, stream), kappa=cfg["kappa"])
    doc = result.to_dict()
    doc["space"] = space.to_dict()
    _write_json(out / "selection.json", doc)
    return {"selection_seconds": time.perf_counter() - started}


def cmd_sweep(cfg, out, explicit):
    stream = _load_stream(cfg)
    plan = ExperimentPlan(grid_points=cfg["grid_points"],
                          grid_quantiles=tuple(cfg["grid_quantiles"]))
    hp = None
    if cfg["sweep"] != "m_h_surface":
        xs, _ = stream.window(*cfg["window"], closed=True)
        if xs.size == 0:
            raise ValidationError(f"sweep window {cfg['window']} is empty")
        hp = _hyperparams(cfg, explicit, xs)
    kwargs = {k: tuple(cfg[k]) for k in ("m_values", "r_values", "lambda_values", "every")}
    if cfg["h_values"] is not None:
        kwargs["h_values"] = tuple(cfg["h_values"])
    started = time.perf_counter()
    rows = sensitivity_sweep(stream, cfg["sweep"], window=tuple(cfg["window"]), hyperparams=hp,
                             cfg=_solver(cfg), truth=_truth(cfg, stream), latency=cfg["latency"],
                             plan=plan, **kwargs)
    _write_rows(out / "sweep.csv", rows)
    _write_json(out / "sweep.json", {"sweep": cfg["sweep"], "rows": rows})
    return {"sweep_seconds": time.perf_counter() - started}


HANDLERS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "select": cmd_select,
    "sweep": cmd_sweep,
}


def run(command, config, out, explicit=frozenset()):
    """Execute a command with a resolved config; returns the timing record."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    timings = HANDLERS[command](config, out, explicit)
    _write_json(out / "config.json", {"command": command, **config})
    if timings:
        _write_json(out / "timings.json", timings)
    return timings


def main(argv=None):
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    out = args.pop("out")
    config_path = args.pop("config")
    verbose = args.pop("verbose")
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_doc = None
        if config_path:
            file_doc = _read_json(config_path, "config file")
            if isinstance(file_doc, dict) and file_doc.get("command", command) != command:
                raise ValidationError(
                    f"config file is for command '{file_doc['command']}', not '{command}'"
                )
            if isinstance(file_doc, dict):
                file_doc = {k: v for k, v in file_doc.items() if k != "command"}
        config = resolve_config(command, file_doc, args)
        explicit = set(args) | set(file_doc or ())
        run(command, config, out, explicit)
    except ValidationError as exc:
        print(f"tdx {command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"tdx {command}: numerical failure: {exc}", file=sys.stderr)
        diagnostics = getattr(exc, "diagnostics", None)
        for line in diagnostics or ():
            print(f"  {line}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
