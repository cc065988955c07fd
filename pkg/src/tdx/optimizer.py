"""BFGS minimisation with a strong-Wolfe line search, and multistart fitting.

The line search follows the bracketing/zoom scheme of Nocedal & Wright
(Numerical Optimization, algorithms 3.5 and 3.6) with cubic interpolation
and safeguarded bisection. Steps that produce non-finite objective values
are halved until a finite value is found.
"""

import logging
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .basis import build_basis
from .errors import FitError, LineSearchError, NumericalError, ValidationError
from .model import TdxModel
from .objective import Hyperparams, make_fit_data, objective_and_gradient

__all__ = [
    "SolverConfig",
    "StartResult",
    "FitReport",
    "minimize_quasi_newton",
    "multistart_fit",
    "fit_static",
    "fit_window",
]

log = logging.getLogger(__name__)

C1 = 1e-4
C2 = 0.9


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`minimize_quasi_newton` and :func:`multistart_fit`."""

    optimality_tolerance: float = 1e-4
    max_iterations: int = 500
    n_starts: int = 4
    artificial_bound: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not self.optimality_tolerance > 0:
            raise ValidationError("optimality_tolerance must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValidationError("max_iterations must be a positive integer")
        if int(self.n_starts) != self.n_starts or self.n_starts < 1:
            raise ValidationError("n_starts must be a positive integer")
        if not self.artificial_bound > 0:
            raise ValidationError("artificial_bound must be positive")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an integer in [0, 2**64)")

    def to_dict(self):
        return {
            "optimality_tolerance": self.optimality_tolerance,
            "max_iterations": self.max_iterations,
            "n_starts": self.n_starts,
            "artificial_bound": self.artificial_bound,
            "seed": self.seed,
        }


@dataclass
class StartResult:
    objective: float
    iterations: int
    converged: bool
    message: str
    n_evaluations: int = 0


@dataclass
class FitReport:
    """Outcome of a multistart fit.

    ``best_objective`` and ``per_start_objectives`` hold the *maximised*
    objective (log-likelihood minus penalty); failed starts are ``nan``.
    """

    best_objective: float
    best_start: int
    per_start_objectives: list
    iterations: list
    converged: list
    messages: list
    fit_seconds: float
    n_observations: int

    @property
    def seconds_per_observation(self):
        return self.fit_seconds / self.n_observations

    def to_dict(self, timing=True):
        doc = {
            "best_objective": self.best_objective,
            "best_start": self.best_start,
            "per_start_objectives": list(self.per_start_objectives),
            "iterations": list(self.iterations),
            "converged": list(self.converged),
            "messages": list(self.messages),
            "n_observations": self.n_observations,
        }
        if timing:
            doc["fit_seconds"] = self.fit_seconds
            doc["seconds_per_observation"] = self.seconds_per_observation
        return doc


# --- line search -----------------------------------------------------------


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimiser of the cubic interpolating two points and slopes, or None."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    x = b - (b - a) * (gb + d2 - d1) / denom
    return x if np.isfinite(x) else None


class _Phi:
    """The objective restricted to a ray, with evaluation counting."""

    def __init__(self, fun, x, p):
        self.fun, self.x, self.p = fun, x, p
        self.calls = 0
        self.last = None

    def __call__(self, alpha):
        self.calls += 1
        f, g = self.fun(self.x + alpha * self.p)
        f = float(f)
        g = np.asarray(g, dtype=float)
        ok = np.isfinite(f) and np.all(np.isfinite(g))
        slope = float(g @ self.p) if ok else np.nan
        self.last = (alpha, f, g, slope, ok)
        return self.last


def _zoom(phi, lo, hi, f0, d0, max_calls):
    """Shrink a bracket ``[lo, hi]`` until a strong-Wolfe point is found."""
    for _ in range(max_calls):
        a_lo, f_lo, g_lo, s_lo = lo
        a_hi, f_hi, _, s_hi = hi
        width = abs(a_hi - a_lo)
        trial = _cubic_min(a_lo, f_lo, s_lo, a_hi, f_hi, s_hi) if np.isfinite(s_hi) else None
        left, right = min(a_lo, a_hi), max(a_lo, a_hi)
        if trial is None or not (left + 0.1 * width <= trial <= right - 0.1 * width):
            trial = 0.5 * (a_lo + a_hi)
        alpha, f, g, slope, ok = phi(trial)
        if not ok or f > f0 + C1 * alpha * d0 or f >= f_lo:
            hi = (alpha, f if ok else np.inf, g, slope)
        else:
            if abs(slope) <= -C2 * d0:
                return alpha, f, g
            if slope * (a_hi - a_lo) >= 0:
                hi = lo
            lo = (alpha, f, g, slope)
        if abs(hi[0] - lo[0]) <= 1e-12 * max(1.0, abs(lo[0])):
            break
    # Bracket exhausted; accept the best sufficient-decrease point if any.
    a_lo, f_lo, g_lo, _ = lo
    if a_lo > 0:
        return a_lo, f_lo, g_lo
    return None


def _strong_wolfe(fun, x, f0, g0, p, alpha0, max_calls=40):
    """Step length satisfying the strong Wolfe conditions along ``p``.

    Returns ``(alpha, f, g, n_calls)`` or ``(None, ...)`` when no acceptable
    step was found. Raises :class:`LineSearchError` when every trial step
    produced non-finite values.
    """
    phi = _Phi(fun, x, p)
    d0 = float(g0 @ p)
    prev = (0.0, f0, g0, d0)
    alpha = alpha0
    alpha_max = np.inf
    found_finite = False
    for i in range(max_calls):
        a, f, g, slope, ok = phi(alpha)
        if not ok:
            alpha_max = alpha
            alpha = 0.5 * (prev[0] + alpha) if prev[0] > 0 else 0.5 * alpha
            if alpha <= 1e-20:
                break
            continue
        found_finite = True
        if f > f0 + C1 * a * d0 or (i > 0 and f >= prev[1] and prev[0] > 0):
            res = _zoom(phi, prev, (a, f, g, slope), f0, d0, max_calls - phi.calls)
            return (*res, phi.calls) if res else (None, None, None, phi.calls)
        if abs(slope) <= -C2 * d0:
            return a, f, g, phi.calls
        if slope >= 0:
            res = _zoom(phi, (a, f, g, slope), prev, f0, d0, max_calls - phi.calls)
            return (*res, phi.calls) if res else (None, None, None, phi.calls)
        prev = (a, f, g, slope)
        grown = 2.0 * a
        alpha = grown if grown < alpha_max else 0.5 * (a + alpha_max)
    if not found_finite:
        raise LineSearchError("no finite objective value along the search direction")
    if prev[0] > 0:
        return prev[0], prev[1], prev[2], phi.calls
    return None, None, None, phi.calls


# --- BFGS ------------------------------------------------------------------


def minimize_quasi_newton(fun, x0, cfg=None):
    """Minimise ``fun`` with BFGS.

    Parameters
    ----------
    fun : callable
        ``fun(x) -> (value, gradient)`` with ``x`` and gradient shaped like
        ``x0``.
    x0 : array_like
        Starting point (any shape; optimised as a flat vector).
    cfg : SolverConfig, optional

    Returns
    -------
    x : ndarray
        Final point, shaped like ``x0``. Its objective never exceeds the
        objective at ``x0``.
    result : StartResult
        ``objective`` is the minimised value.
    """
    cfg = cfg or SolverConfig()
    x0 = np.array(x0, dtype=float)
    shape = x0.shape

    def flat(v):
        f, g = fun(v.reshape(shape))
        return f, np.asarray(g, dtype=float).ravel()

    x = x0.ravel().copy()
    f, g = flat(x)
    n_eval = 1
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalError("objective or gradient is not finite at the starting point")
    n = x.size
    eye = np.eye(n)
    hinv = eye.copy()
    scaled = False
    message = "maximum iterations reached"
    converged = False
    it = 0
    for it in range(cfg.max_iterations + 1):
        if np.max(np.abs(g), initial=0.0) < cfg.optimality_tolerance:
            converged = True
            message = "gradient below tolerance"
            break
        if it == cfg.max_iterations:
            break
        p = -hinv @ g
        if not g @ p < 0:
            hinv = eye.copy()
            p = -g
        alpha0 = 1.0 if scaled else min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))
        alpha, f_new, g_new, calls = _strong_wolfe(flat, x, f, g, p, alpha0)
        n_eval += calls
        if alpha is None and not np.array_equal(p, -g):
            # Retry along steepest descent with a fresh curvature estimate.
            hinv = eye.copy()
            scaled = False
            p = -g
            alpha0 = min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))
            alpha, f_new, g_new, calls = _strong_wolfe(flat, x, f, g, p, alpha0)
            n_eval += calls
        if alpha is None:
            message = "line search stalled"
            break
        s = alpha * p
        y = g_new - g
        x = x + s
        f_prev, f, g = f, f_new, g_new
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                hinv = (sy / float(y @ y)) * eye
                scaled = True
            rho = 1.0 / sy
            hy = hinv @ y
            hinv = (
                hinv
                - rho * (np.outer(s, hy) + np.outer(hy, s))
                + (rho * rho * float(y @ hy) + rho) * np.outer(s, s)
            )
        if f_prev - f <= 1e-15 * max(1.0, abs(f)) and np.max(np.abs(s)) <= 1e-15 * max(
            1.0, np.max(np.abs(x))
        ):
            message = "no further progress"
            break
    return x.reshape(shape), StartResult(
        objective=float(f),
        iterations=it,
        converged=converged,
        message=message,
        n_evaluations=n_eval,
    )


# --- model fitting ---------------------------------------------------------


def _start_points(shape, cfg):
    rng = np.random.default_rng(cfg.seed)
    starts = [np.zeros(shape)]
    for _ in range(cfg.n_starts - 1):
        starts.append(rng.uniform(-cfg.artificial_bound, cfg.artificial_bound, size=shape))
    return starts


def multistart_fit(data, hp, cfg=None, time_range=None):
    """Fit the coefficient matrix by multistart BFGS.

    Start 0 is always ``B = 0`` (uniform, time-constant weights); the other
    starts draw every entry uniformly from ``[-bound, bound]`` using
    ``cfg.seed``. The start with the largest maximised objective wins, ties
    going to the lower start index.

    Parameters
    ----------
    data : FitData
        Prepared sample; its basis and polynomial order define the model.
    hp : Hyperparams
        Supplies the regularisation strength.
    cfg : SolverConfig, optional
    time_range : tuple, optional
        Training window recorded in the model; defaults to the sample's
        time span.

    Returns
    -------
    model : TdxModel
    report : FitReport
    """
    cfg = cfg or SolverConfig()
    if data.n < data.basis.m:
        warnings.warn(
            f"training sample has {data.n} observations for {data.basis.m} basis "
            "functions", RuntimeWarning, stacklevel=2,
        )
    shape = (data.basis.m - 1, data.r + 1)

    def neg(b):
        value, grad = objective_and_gradient(data, b, hp)
        return -value, -grad

    results = []
    t_start = time.perf_counter()
    for k, b0 in enumerate(_start_points(shape, cfg)):
        try:
            b, res = minimize_quasi_newton(neg, b0, cfg)
            results.append((b, res))
        except NumericalError as exc:
            log.warning("start %d failed: %s", k, exc)
            results.append((None, StartResult(np.nan, 0, False, f"failed: {exc}")))
    fit_seconds = time.perf_counter() - t_start

    objectives = [-r.objective if b is not None else np.nan for b, r in results]
    valid = [k for k, v in enumerate(objectives) if np.isfinite(v)]
    if not valid:
        raise FitError(
            "all starts failed", diagnostics=[r.message for _, r in results]
        )
    best = max(valid, key=lambda k: (objectives[k], -k))
    if time_range is None:
        time_range = (float(data.ts.min()), float(data.ts.max()))
    model = TdxModel(
        basis=data.basis,
        coeffs=results[best][0],
        r=data.r,
        train_time_range=tuple(time_range),
        kappa=data.kappa,
        lam=hp.lam,
    )
    report = FitReport(
        best_objective=objectives[best],
        best_start=best,
        per_start_objectives=objectives,
        iterations=[r.iterations for _, r in results],
        converged=[r.converged for _, r in results],
        messages=[r.message for _, r in results],
        fit_seconds=fit_seconds,
        n_observations=data.n,
    )
    return model, report


def fit_static(data, hp, cfg=None, time_range=None):
    """Fit time-constant weights: order 0, no penalty, unit instance weights."""
    static = data
    if data.r != 0 or np.any(data.w != 1.0):
        static = make_fit_data(
            data.xs, data.ts, data.basis, 0, kappa=data.kappa, weights=np.ones(data.n)
        )
    hp0 = Hyperparams(m=hp.m, h=hp.h, r=0, lam=0.0, kappa=hp.kappa)
    return multistart_fit(static, hp0, cfg, time_range=time_range)


def fit_window(xs, ts, hp, cfg=None, method="tdx", time_range=None, basis_range=None):
    """Build the basis from the sample and fit either the TDX or static model.

    The basis spans ``basis_range`` or, by default, ``[min(xs), max(xs)]``.
    ``hp.kappa=None`` resolves to half the length of ``time_range`` (or of the
    sample's time span).
    """
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if xs.size == 0:
        raise ValidationError("training window contains no observations")
    lo, hi = basis_range if basis_range is not None else (float(xs.min()), float(xs.max()))
    basis = build_basis(hp.m, lo, hi, hp.h)
    kappa = hp.kappa
    if kappa is None and time_range is not None and time_range[1] > time_range[0]:
        kappa = (time_range[1] - time_range[0]) / 2.0
    if method == "tdx":
        data = make_fit_data(xs, ts, basis, hp.r, kappa=kappa)
        return multistart_fit(data, hp, cfg, time_range=time_range)
    if method == "static":
        data = make_fit_data(xs, ts, basis, 0, kappa=kappa, weights=np.ones(xs.size))
        return fit_static(data, hp, cfg, time_range=time_range)
    raise ValidationError(f"unknown method {method!r}; expected 'tdx' or 'static'")
