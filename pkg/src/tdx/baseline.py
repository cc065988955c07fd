"""Reference density from pooled observations: an ensemble of smoothed histograms.

For a pooled sample of size ``S`` the Sturges bin count ``b_s`` is computed
and nine equal-width histograms with ``b_s - 4 ... b_s + 4`` bins (at least
two) are built over the sample range. Each histogram's density-scaled
relative frequencies are interpolated at the bin centres by a natural cubic
spline; negative spline values count as zero. The reference density is the
pointwise mean of the nine curves.
"""

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .curve import DensityCurve
from .errors import InsufficientDataError, ValidationError

__all__ = [
    "sturges_bins",
    "NaturalCubicSpline",
    "fit_natural_cubic_spline",
    "eval_spline",
    "baseline_members",
    "baseline_density",
    "windowed_baseline",
    "ENSEMBLE_OFFSETS",
]

ENSEMBLE_OFFSETS = tuple(range(-4, 5))
MIN_BINS = 2


def sturges_bins(s):
    """Sturges' bin count ``ceil(log2(s)) + 1``.

    >>> [sturges_bins(s) for s in (1, 64, 100)]
    [1, 7, 8]
    """
    if int(s) != s or s < 1:
        raise ValidationError(f"sample size must be a positive integer, got {s!r}")
    s = int(s)
    # Exact integer ceil(log2(s)) avoids float rounding at powers of two.
    return (s - 1).bit_length() + 1


class NaturalCubicSpline:
    """Interpolating cubic spline with zero second derivative at both ends.

    Evaluates to 0 outside ``[knots[0], knots[-1]]``.

    Attributes
    ----------
    knots : ndarray
    coeffs : ndarray, shape (4, len(knots) - 1)
        Per-interval polynomial coefficients in descending powers of
        ``x - knots[i]``.
    """

    def __init__(self, knots, values):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape:
            raise ValidationError("knots and values must be 1-D arrays of equal length")
        if knots.size < 2:
            raise ValidationError("a spline needs at least two knots")
        if np.any(np.diff(knots) <= 0):
            raise ValidationError("spline knots must be strictly increasing (no duplicates)")
        self._pp = CubicSpline(knots, values, bc_type="natural", extrapolate=False)
        self.knots = knots
        self.coeffs = self._pp.c

    def __call__(self, x, nu=0):
        out = np.asarray(self._pp(np.asarray(x, dtype=float), nu))
        return np.nan_to_num(out, nan=0.0)


def fit_natural_cubic_spline(xs, ys):
    return NaturalCubicSpline(xs, ys)


def eval_spline(spline, x):
    out = spline(x)
    return float(out) if np.ndim(out) == 0 else out


def baseline_members(samples, grid):
    """The nine clamped spline curves of the ensemble, shape ``(9, len(grid))``."""
    samples = np.asarray(samples, dtype=float)
    grid = np.asarray(grid, dtype=float)
    s = samples.size
    if s < len(ENSEMBLE_OFFSETS):
        raise InsufficientDataError(
            f"baseline needs at least {len(ENSEMBLE_OFFSETS)} observations, got {s}"
        )
    lo, hi = samples.min(), samples.max()
    if not hi > lo:
        raise InsufficientDataError("baseline sample has zero range")
    b_s = sturges_bins(s)
    curves = np.empty((len(ENSEMBLE_OFFSETS), grid.size))
    for row, offset in enumerate(ENSEMBLE_OFFSETS):
        n_bins = max(b_s + offset, MIN_BINS)
        counts, edges = np.histogram(samples, bins=n_bins, range=(lo, hi))
        width = edges[1] - edges[0]
        centres = 0.5 * (edges[:-1] + edges[1:])
        spline = NaturalCubicSpline(centres, counts / s / width)
        curves[row] = np.maximum(spline(grid), 0.0)
    return curves


def baseline_density(samples, grid):
    """Mean of the nine smoothed-histogram curves evaluated on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    return DensityCurve(grid, baseline_members(samples, grid).mean(axis=0))


def windowed_baseline(stream, time_index, grid, half_width=4):
    """Reference density at the ``time_index``-th distinct time of a stream.

    Pools all observations whose time index lies within ``half_width`` of
    ``time_index``, truncated at the ends of the stream.
    """
    times = stream.times
    if not 0 <= time_index < times.size:
        raise ValidationError(f"time index {time_index} outside 0..{times.size - 1}")
    first = max(0, time_index - half_width)
    last = min(times.size - 1, time_index + half_width)
    mask = (stream.t >= times[first]) & (stream.t <= times[last])
    pooled = stream.x[mask]
    if pooled.size == 0:
        raise InsufficientDataError(f"no observations in window {first}..{last}")
    try:
        return baseline_density(pooled, grid)
    except InsufficientDataError as exc:
        raise InsufficientDataError(
            f"time window {first}..{last} (t={times[first]:.6g}..{times[last]:.6g}): {exc}"
        ) from exc
