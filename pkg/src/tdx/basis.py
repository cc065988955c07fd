"""Fixed Gaussian basis functions placed on an equidistant grid."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

__all__ = ["BasisSet", "build_basis", "eval_basis", "eval_basis_matrix", "PDF_FLOOR"]

# Keeps log(phi @ gamma) finite for observations far outside the basis range.
PDF_FLOOR = 1e-300

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Gaussian densities with equidistant means and a common bandwidth.

    Attributes
    ----------
    centers : ndarray, shape (m,)
        Means of the basis densities, strictly increasing.
    bandwidth : float
        Common standard deviation ``h``.
    """

    centers: np.ndarray
    bandwidth: float

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float)
        if centers.ndim != 1 or centers.size < 2:
            raise ValidationError("a basis needs at least two centers")
        if not np.all(np.isfinite(centers)):
            raise ValidationError("basis centers must be finite")
        gaps = np.diff(centers)
        if np.any(gaps <= 0):
            raise ValidationError("basis centers must be strictly increasing")
        if np.ptp(gaps) > 1e-9 * gaps.mean():
            raise ValidationError("basis centers must be equidistant")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValidationError(f"bandwidth must be positive, got {self.bandwidth!r}")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def m(self):
        return self.centers.size


def build_basis(m, lo, hi, h):
    """Place ``m`` basis densities evenly on ``[lo, hi]``, endpoints included.

    >>> build_basis(3, 0.0, 12.0, 1.0).centers
    array([ 0.,  6., 12.])
    """
    if int(m) != m or m < 2:
        raise ValidationError(f"m must be an integer >= 2, got {m!r}")
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValidationError(f"basis range must satisfy lo < hi, got [{lo}, {hi}]")
    if not (np.isfinite(h) and h > 0):
        raise ValidationError(f"bandwidth must be positive, got {h!r}")
    return BasisSet(np.linspace(lo, hi, int(m)), h)


def eval_basis_matrix(basis, xs):
    """Evaluate every basis density at every point; returns an ``(n, m)`` array."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1:
        raise ValidationError("xs must be one-dimensional")
    if not np.all(np.isfinite(xs)):
        raise DomainError("basis evaluation requires finite inputs")
    z = (xs[:, None] - basis.centers[None, :]) / basis.bandwidth
    out = np.exp(-0.5 * z * z) * (_INV_SQRT_2PI / basis.bandwidth)
    return np.maximum(out, PDF_FLOOR, out=out)


def eval_basis(basis, x):
    """Basis vector ``phi(x)`` at a single point."""
    return eval_basis_matrix(basis, np.array([x], dtype=float))[0]
