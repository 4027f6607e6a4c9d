"""Dense symmetric positive-definite linear algebra shared by all modules.

All matrices are plain ``float64`` numpy arrays assumed symmetric; functions
only ever read the lower triangle where the backend allows it.  Everything
works in log space (``logdet``, never ``det``) because rate ratios overflow
in linear space even at moderate dimension.

Positive definiteness has a single definition across the codebase: the
Cholesky factorization succeeds and every pivot exceeds
``PIVOT_RTOL * max(diagonal)``.  There is no eigenvalue fallback.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve

PIVOT_RTOL = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix required to be positive definite is not."""


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == m.

    Raises NotPositiveDefiniteError if m is not positive definite under the
    pivot rule above.
    """
    m = np.asarray(m, dtype=float)
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefiniteError(str(err)) from err
    pivots = np.diag(lower) ** 2
    if pivots.min() <= PIVOT_RTOL * max(np.diag(m).max(), 0.0):
        raise NotPositiveDefiniteError("pivot below threshold")
    return lower


def inverse_pd(m: np.ndarray) -> np.ndarray:
    """Inverse of a positive definite matrix, symmetrized."""
    lower = cholesky(m)
    inv = cho_solve((lower, True), np.eye(m.shape[0]))
    return (inv + inv.T) / 2.0


def logdet(m: np.ndarray) -> float:
    """log det of a positive definite matrix via its Cholesky pivots."""
    lower = cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def schur_update(m: np.ndarray, target, given) -> np.ndarray:
    """M[t,g] @ inv(M[g,g]) @ M[g,t] for disjoint index sets t, g.

    With an empty ``given`` set the result is the zero matrix (conditioning
    on nothing explains nothing).  Requires the ``given`` block to be
    positive definite.
    """
    target = np.asarray(target, dtype=int)
    given = np.asarray(given, dtype=int)
    m = np.asarray(m, dtype=float)
    if given.size == 0:
        return np.zeros((target.size, target.size))
    cross = m[np.ix_(given, target)]
    lower = cholesky(m[np.ix_(given, given)])
    solved = cho_solve((lower, True), cross)
    out = cross.T @ solved
    return (out + out.T) / 2.0
