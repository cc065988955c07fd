"""Isometric log-ratio (ilr) coordinates for compositions.

A composition is a vector of ``M`` strictly positive parts summing to one.
The ilr transform maps it isometrically to ``R^(M-1)`` using an orthonormal
Helmert-type contrast matrix ``U`` (shape ``M x (M-1)``)::

    v = U.T @ log(gamma)
    gamma = exp(U @ v) / sum(exp(U @ v))

Both transforms operate along the last axis, so stacks of compositions can
be transformed in one call.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, ValidationError

__all__ = ["IlrBasis", "build_ilr_basis", "ilr_forward", "ilr_inverse"]


@dataclass(frozen=True, eq=False)
class IlrBasis:
    """Contrast matrix of the ilr transform for ``m``-part compositions.

    Attributes
    ----------
    m : int
        Number of parts.
    u : ndarray, shape (m, m - 1)
        Orthonormal columns, each summing to zero. Read-only.
    """

    m: int
    u: np.ndarray

    @property
    def dim(self):
        return self.m - 1


@lru_cache(maxsize=128)
def build_ilr_basis(m):
    """Build the ilr contrast matrix for ``m`` parts.

    Column ``j`` (1-based) of the unnormalised matrix holds ``-1`` in rows
    ``1..j``, the value ``j`` in row ``j + 1`` and zeros below; each column is
    then scaled to unit Euclidean norm.

    The result is cached per ``m`` and its matrix is read-only.

    Examples
    --------
    >>> build_ilr_basis(2).u.ravel()
    array([-0.70710678,  0.70710678])
    """
    if isinstance(m, (bool, np.bool_)) or int(m) != m or m < 2:
        raise ValidationError(f"composition size must be an integer >= 2, got {m!r}")
    m = int(m)
    u = np.zeros((m, m - 1))
    for j in range(1, m):
        u[:j, j - 1] = -1.0
        u[j, j - 1] = float(j)
    u /= np.linalg.norm(u, axis=0)
    u.setflags(write=False)
    return IlrBasis(m=m, u=u)


def _check_basis(basis, n_last, expected):
    if n_last != expected:
        raise ValidationError(
            f"last axis has length {n_last}, expected {expected} for m={basis.m}"
        )


def ilr_forward(basis, gamma):
    """Map composition(s) to ilr coordinates, ``U.T @ log(gamma)``."""
    gamma = np.asarray(gamma, dtype=float)
    _check_basis(basis, gamma.shape[-1], basis.m)
    if not np.all(gamma > 0) or not np.all(np.isfinite(gamma)):
        raise DomainError("ilr requires strictly positive, finite composition parts")
    return np.log(gamma) @ basis.u


def ilr_inverse(basis, v):
    """Map ilr coordinates back to the simplex.

    The exponent is shifted by its maximum before exponentiation; the shift
    cancels in the ratio so the result is exact, and no overflow can occur.
    """
    v = np.asarray(v, dtype=float)
    _check_basis(basis, v.shape[-1], basis.dim)
    if not np.all(np.isfinite(v)):
        raise DomainError("ilr coordinates must be finite")
    z = v @ basis.u.T
    z -= z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
