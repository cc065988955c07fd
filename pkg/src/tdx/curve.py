"""Density values on an evaluation grid, and their CSV form."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["DensityCurve", "write_curve_csv", "read_curve_csv"]


@dataclass(frozen=True, eq=False)
class DensityCurve:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValidationError("grid and values must be 1-D arrays of equal length")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise ValidationError("curve grid must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValidationError("density values must be finite and nonnegative")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.grid.size


def write_curve_csv(curve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("x,density\n")
        for x, y in zip(curve.grid, curve.values):
            fh.write(f"{float(x)!r},{float(y)!r}\n")


def read_curve_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x", "density"]:
            raise ValidationError(f"{path}: expected header 'x,density', got {header}")
        rows = [(float(a), float(b)) for a, b in reader]
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return DensityCurve(arr[:, 0], arr[:, 1])
