"""Fitting objective: weighted log-likelihood minus a ridge penalty.

For coefficients ``B`` the maximised quantity is::

    sum_i w_i * [log(phi(x_i) @ e_i) - log(1 @ e_i)]  -  lam * ||B[:, 1:]||_F^2

with ``e_i = exp(U @ B @ a(tau_i))``. The gradient with respect to ``B`` is::

    sum_i w_i * U.T @ (phi_i * e_i / beta_phi_i - e_i / beta_1_i) outer a(tau_i)
        - 2 * lam * B @ C @ C.T

where ``C`` selects the non-offset columns. Observations sharing a time value
share ``e_i``, so the exponentials are computed once per distinct time.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import eval_basis_matrix
from .compositional import build_ilr_basis
from .errors import NumericalOverflowError, ValidationError
from .model import time_features

__all__ = [
    "Hyperparams",
    "FitData",
    "make_fit_data",
    "temporal_weights",
    "regularization_penalty",
    "regularization_gradient",
    "weighted_log_likelihood",
    "objective_value",
    "objective_gradient",
    "objective_and_gradient",
]

_LOG_HALF = np.log(0.5)


@dataclass(frozen=True)
class Hyperparams:
    """Model hyperparameters.

    ``kappa=None`` means half the time span of the training data.
    """

    m: int
    h: float
    r: int = 2
    lam: float = 1.0
    kappa: float | None = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValidationError(f"m must be an integer >= 2, got {self.m!r}")
        if not self.h > 0:
            raise ValidationError(f"h must be positive, got {self.h!r}")
        if int(self.r) != self.r or self.r < 0:
            raise ValidationError(f"r must be an integer >= 0, got {self.r!r}")
        if not self.lam >= 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam!r}")
        if self.kappa is not None and not self.kappa > 0:
            raise ValidationError(f"kappa must be positive, got {self.kappa!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "lam", float(self.lam))

    def to_dict(self):
        return {"m": self.m, "h": self.h, "r": self.r, "lambda": self.lam, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        return cls(**doc)


def temporal_weights(ts, kappa):
    """Exponential age weights; an observation aged ``kappa`` gets weight 0.5.

    Age is measured from the most recent time in ``ts``.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.size == 0:
        raise ValidationError("cannot weight an empty sample")
    if not kappa > 0:
        raise ValidationError(f"kappa must be positive, got {kappa!r}")
    return np.exp((_LOG_HALF / kappa) * (ts.max() - ts))


@dataclass(frozen=True, eq=False)
class FitData:
    """Training sample with cached basis and time-feature evaluations.

    Observations are stored sorted by time; ``groups`` holds the start offset
    of each run of equal times, ``feats`` the time features of each distinct
    time, and ``group_weight`` the summed instance weights per distinct time.
    """

    xs: np.ndarray
    ts: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    r: int
    basis: object
    kappa: float
    times: np.ndarray = field(repr=False)
    groups: np.ndarray = field(repr=False)
    group_index: np.ndarray = field(repr=False)
    feats: np.ndarray = field(repr=False)
    group_weight: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.xs.size

    @property
    def u(self):
        return build_ilr_basis(self.basis.m).u

    def sample_features(self):
        """Time-feature matrix with one row per observation."""
        return self.feats[self.group_index]


def make_fit_data(xs, ts, basis, r, kappa=None, weights=None):
    """Prepare a training sample for repeated objective evaluation.

    Parameters
    ----------
    xs, ts : array_like
        Feature values and their times.
    basis : BasisSet
    r : int
        Polynomial order of the weight trajectory.
    kappa : float, optional
        Half-weight age. Defaults to half the time span of ``ts`` (or 1 when
        all times coincide, where the value has no effect).
    weights : array_like, optional
        Explicit instance weights, overriding the temporal weighting.
    """
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if xs.ndim != 1 or xs.shape != ts.shape:
        raise ValidationError("xs and ts must be 1-D arrays of equal length")
    if xs.size == 0:
        raise ValidationError("training sample is empty")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ts))):
        raise ValidationError("training sample contains non-finite values")
    order = np.argsort(ts, kind="stable")
    xs, ts = xs[order], ts[order]
    if kappa is None:
        span = ts[-1] - ts[0]
        kappa = span / 2.0 if span > 0 else 1.0
    if weights is None:
        w = temporal_weights(ts, kappa)
    else:
        w = np.asarray(weights, dtype=float)[order]
        if w.shape != xs.shape or np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValidationError("instance weights must be positive and match xs")
    times, groups, group_index = np.unique(ts, return_index=True, return_inverse=True)
    feats = time_features(r, times)
    group_weight = np.add.reduceat(w, groups)
    arrays = [xs, ts, w, feats, group_weight, times]
    for a in arrays:
        a.setflags(write=False)
    phi = eval_basis_matrix(basis, xs)
    phi.setflags(write=False)
    return FitData(
        xs=xs, ts=ts, w=w, phi=phi, r=int(r), basis=basis, kappa=float(kappa),
        times=times, groups=groups, group_index=group_index, feats=feats,
        group_weight=group_weight,
    )


def _check_coeffs(data, b):
    b = np.asarray(b, dtype=float)
    expected = (data.basis.m - 1, data.r + 1)
    if b.shape != expected:
        raise ValidationError(f"coefficient matrix has shape {b.shape}, expected {expected}")
    return b


def regularization_penalty(b, lam):
    """Ridge penalty on every coefficient except the offset column."""
    if not lam >= 0:
        raise ValidationError(f"lambda must be >= 0, got {lam!r}")
    b = np.asarray(b, dtype=float)
    return float(lam * np.sum(b[:, 1:] ** 2))


def regularization_gradient(b, lam):
    g = 2.0 * lam * np.asarray(b, dtype=float)
    g[:, 0] = 0.0
    return g


def _forward(data, b):
    """Per-time exponentials and per-sample mixture sums, max-shifted."""
    z = data.feats @ b.T @ data.u.T          # (k, m)
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    beta_one = e.sum(axis=1)                 # (k,)
    e_obs = e[data.group_index]              # (n, m)
    beta_phi = np.einsum("ij,ij->i", data.phi, e_obs)
    return e, beta_one, e_obs, beta_phi


def _loglik(data, beta_one, beta_phi):
    terms = np.log(beta_phi) - np.log(beta_one)[data.group_index]
    if not np.all(np.isfinite(terms)):
        bad = int(np.flatnonzero(~np.isfinite(terms))[0])
        raise NumericalOverflowError(
            f"non-finite log-likelihood term at sample {bad} "
            f"(x={data.xs[bad]!r}, t={data.ts[bad]!r})",
            index=bad,
        )
    return float(data.w @ terms)


def weighted_log_likelihood(data, b, hp=None):
    """Temporally weighted log-likelihood of coefficients ``b``."""
    b = _check_coeffs(data, b)
    _, beta_one, _, beta_phi = _forward(data, b)
    return _loglik(data, beta_one, beta_phi)


def objective_value(data, b, hp):
    """Weighted log-likelihood minus the penalty (to be maximised)."""
    b = _check_coeffs(data, b)
    return weighted_log_likelihood(data, b) - regularization_penalty(b, hp.lam)


def objective_and_gradient(data, b, hp):
    """Objective value and its gradient with respect to ``b``, computed together."""
    b = _check_coeffs(data, b)
    e, beta_one, e_obs, beta_phi = _forward(data, b)
    value = _loglik(data, beta_one, beta_phi) - regularization_penalty(b, hp.lam)
    resp = data.phi * e_obs * (data.w / beta_phi)[:, None]
    per_time = np.add.reduceat(resp, data.groups, axis=0)
    per_time -= e * (data.group_weight / beta_one)[:, None]
    grad = data.u.T @ per_time.T @ data.feats - regularization_gradient(b, hp.lam)
    return value, grad


def objective_gradient(data, b, hp):
    return objective_and_gradient(data, b, hp)[1]
