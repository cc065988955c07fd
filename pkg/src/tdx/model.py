"""The temporal density extrapolation model.

The density at time ``t`` is a Gaussian basis expansion whose weights follow
a trajectory on the simplex::

    f(x | t) = phi(x) @ gamma(t)
    gamma(t) = ilr_inverse(B @ a(t)),   a(t) = (1, t, ..., t**R)

``B`` has one row per ilr coordinate and one column per polynomial order.
A model with ``R = 0`` has time-constant weights (the static variant).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet, eval_basis_matrix
from .compositional import build_ilr_basis, ilr_inverse
from .curve import DensityCurve
from .errors import ValidationError

__all__ = [
    "TdxModel",
    "time_features",
    "weight_trajectory",
    "density_at",
    "density_curve",
    "forecast_grid",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "MODEL_FORMAT_VERSION",
]

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class TdxModel:
    """A fitted model; everything needed to evaluate ``f(x | t)``.

    Attributes
    ----------
    basis : BasisSet
    coeffs : ndarray, shape (m - 1, r + 1)
        Polynomial coefficients of the ilr coordinates; column 0 is the offset.
    r : int
        Polynomial order.
    train_time_range : tuple of float
        ``(t_lo, t_hi)`` covered by the training data.
    kappa, lam : float
        Half-weight age and regularisation strength used at fit time.
    """

    basis: BasisSet
    coeffs: np.ndarray
    r: int
    train_time_range: tuple = (0.0, 1.0)
    kappa: float = float("nan")
    lam: float = 0.0
    ilr: object = field(init=False, repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        r = int(self.r)
        if r < 0:
            raise ValidationError(f"polynomial order must be >= 0, got {self.r}")
        if coeffs.shape != (self.basis.m - 1, r + 1):
            raise ValidationError(
                f"coefficient matrix has shape {coeffs.shape}, "
                f"expected {(self.basis.m - 1, r + 1)}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("coefficients must be finite")
        t_lo, t_hi = (float(v) for v in self.train_time_range)
        if not t_lo <= t_hi:
            raise ValidationError(f"invalid training time range ({t_lo}, {t_hi})")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "train_time_range", (t_lo, t_hi))
        object.__setattr__(self, "ilr", build_ilr_basis(self.basis.m))

    @property
    def m(self):
        return self.basis.m

    @property
    def h(self):
        return self.basis.bandwidth


def time_features(r, t):
    """Polynomial time features ``(t**0, ..., t**r)``.

    Accepts a scalar (returns shape ``(r + 1,)``) or an array of times
    (returns shape ``(n, r + 1)``).
    """
    if int(r) != r or r < 0:
        raise ValidationError(f"polynomial order must be an integer >= 0, got {r!r}")
    t = np.asarray(t, dtype=float)
    return t[..., None] ** np.arange(int(r) + 1)


def weight_trajectory(model, t):
    """Basis weights ``gamma(t)``; ``t`` may be a scalar or an array."""
    v = time_features(model.r, t) @ model.coeffs.T
    return ilr_inverse(model.ilr, v)


def density_at(model, x, t):
    """Model density ``f(x | t)`` at a single point."""
    return float(density_curve(model, t, np.array([x], dtype=float)).values[0])


def density_curve(model, t, grid):
    """Evaluate ``f(. | t)`` on a grid."""
    grid = np.asarray(grid, dtype=float)
    values = eval_basis_matrix(model.basis, grid) @ weight_trajectory(model, float(t))
    return DensityCurve(grid, values)


def forecast_grid(lo, hi, n=200):
    """``n`` equally spaced evaluation points on ``[lo, hi]``."""
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValidationError(f"grid bounds must satisfy lo < hi, got [{lo}, {hi}]")
    if int(n) != n or n < 2:
        raise ValidationError(f"grid needs at least 2 points, got {n!r}")
    return np.linspace(lo, hi, int(n))


# --- persistence ----------------------------------------------------------


def model_to_dict(model):
    return {
        "version": MODEL_FORMAT_VERSION,
        "m": model.m,
        "h": model.h,
        "centers": [float(c) for c in model.basis.centers],
        "r": model.r,
        "b": [float(v) for v in model.coeffs.ravel()],
        "t_lo": model.train_time_range[0],
        "t_hi": model.train_time_range[1],
        "kappa": None if np.isnan(model.kappa) else float(model.kappa),
        "lambda": float(model.lam),
    }


_MODEL_KEYS = {"version", "m", "h", "centers", "r", "b", "t_lo", "t_hi", "kappa", "lambda"}


def model_from_dict(doc):
    if not isinstance(doc, dict):
        raise ValidationError("model document must be a JSON object")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValidationError(
            f"unsupported model format version {doc.get('version')!r} "
            f"(this build reads version {MODEL_FORMAT_VERSION})"
        )
    missing = _MODEL_KEYS - doc.keys()
    unknown = doc.keys() - _MODEL_KEYS
    if missing or unknown:
        raise ValidationError(
            f"model document fields mismatch: missing {sorted(missing)}, "
            f"unknown {sorted(unknown)}"
        )
    try:
        m, r = int(doc["m"]), int(doc["r"])
        centers = np.asarray(doc["centers"], dtype=float)
        b = np.asarray(doc["b"], dtype=float)
        if centers.shape != (m,) or b.size != (m - 1) * (r + 1):
            raise ValidationError("model document arrays inconsistent with m and r")
        basis = BasisSet(centers, float(doc["h"]))
        kappa = float("nan") if doc["kappa"] is None else float(doc["kappa"])
        return TdxModel(
            basis=basis,
            coeffs=b.reshape(m - 1, r + 1),
            r=r,
            train_time_range=(float(doc["t_lo"]), float(doc["t_hi"])),
            kappa=kappa,
            lam=float(doc["lambda"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model document: {exc}") from exc


def save_model(model, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a valid model file ({exc})") from exc
    return model_from_dict(doc)
