"""The G-Wishart law W_G(b, D) on precision matrices with a graph zero pattern.

Density convention (unnormalized): |K|^((b-2)/2) * exp(-tr(D K) / 2) on the
cone of positive definite matrices whose off-diagonal entries vanish on the
non-edges of G.  With the complete graph this is the Wishart; the mapping to
the textbook Wishart(nu, Psi) parametrization is nu = b + p - 1, Psi = D^-1,
so e.g. the mean of a full-graph draw is (b + p - 1) * D^-1.

Sampling from a general graph goes through an exact two-stage construction:
draw a full Wishart, invert it, then complete the covariance so that the
final precision matrix lands in the constrained cone (the iterative
regression sweep below).  Degrees of freedom are real-valued; the Bartlett
construction uses gamma variates, not integer chi-square sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .graphs import Graph
from .linalg import NotPositiveDefiniteError, cholesky, inverse_pd, logdet

try:
    from numba import njit

    HAVE_NUMBA = True
except ModuleNotFoundError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        return deco


DIRECT_SAMPLER_TOL = 1e-8
DIRECT_SAMPLER_MAX_ITER = 1000


class NoConvergenceError(RuntimeError):
    """Completion sweep failed to converge; tol too tight or degenerate scale."""


@dataclass(frozen=True, eq=False)
class GWishartParams:
    """Degrees of freedom b > 2 and a positive definite p x p scale D."""

    b: float
    d: np.ndarray

    def __post_init__(self):
        if not self.b > 2:
            raise ValueError("degrees of freedom must exceed 2")
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float))
        cholesky(self.d)

    @property
    def p(self) -> int:
        return self.d.shape[0]


@dataclass(eq=False)
class PrecisionMatrix:
    """A PD matrix together with the graph whose non-edges it vanishes on."""

    matrix: np.ndarray
    graph: Graph

    def validate(self) -> None:
        cholesky(self.matrix)
        if np.any(self.matrix[~self.graph.pattern_mask] != 0.0):
            raise ValueError("nonzero entry outside the graph pattern")


def sample_wishart(params: GWishartParams, rng: np.random.Generator) -> np.ndarray:
    """One draw from the full-graph law via the Bartlett decomposition.

    Builds K = (M A)(M A)' with M M' = D^-1 and A lower triangular with
    sqrt(gamma) diagonal and standard normal subdiagonal, filled in a fixed
    order so identical seeds give bit-identical draws.
    """
    p = params.p
    nu = params.b + p - 1
    lower_d = cholesky(params.d)
    # M = inv(L_D)', upper triangular with M M' = D^-1
    m = np.linalg.inv(lower_d).T
    a = np.zeros((p, p))
    np.fill_diagonal(a, np.sqrt(rng.chisquare(nu - np.arange(p))))
    if p > 1:
        rows, cols = np.tril_indices(p, k=-1)
        a[rows, cols] = rng.standard_normal(rows.size)
    root = m @ a
    k = root @ root.T
    return (k + k.T) / 2.0


@njit(cache=True)
def _complete_sweeps(adj: np.ndarray, sigma: np.ndarray, tol: float, max_iter: int) -> tuple:
    """Gauss-Seidel covariance completion loop (compiled when numba is around).

    Each node visit regresses node i on its neighbors and overwrites
    row/column i of the working matrix with the fitted values; stops when a
    full sweep moves no entry by more than tol.
    """
    p = sigma.shape[0]
    omega = sigma.copy()
    new_row = np.empty(p)
    for sweep in range(max_iter):
        delta = 0.0
        for i in range(p):
            deg = 0
            for k in range(p):
                if adj[i, k]:
                    deg += 1
            if deg:
                nb = np.empty(deg, dtype=np.int64)
                pos = 0
                for k in range(p):
                    if adj[i, k]:
                        nb[pos] = k
                        pos += 1
                sub = np.empty((deg, deg))
                rhs = np.empty(deg)
                for a in range(deg):
                    rhs[a] = sigma[nb[a], i]
                    for b in range(deg):
                        sub[a, b] = omega[nb[a], nb[b]]
                beta_star = np.linalg.solve(sub, rhs)
                for k in range(p):
                    if k == i:
                        continue
                    acc = 0.0
                    for a in range(deg):
                        acc += omega[k, nb[a]] * beta_star[a]
                    new_row[k] = acc
            else:
                for k in range(p):
                    new_row[k] = 0.0
            for k in range(p):
                if k == i:
                    continue
                diff = omega[k, i] - new_row[k]
                if diff < 0.0:
                    diff = -diff
                if diff > delta:
                    delta = diff
                omega[k, i] = new_row[k]
                omega[i, k] = new_row[k]
        if delta < tol:
            return omega, sweep + 1
    return omega, -1


def _complete_covariance(graph: Graph, sigma: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Match sigma on edges and the diagonal while forcing the inverse to
    vanish on non-edges; see the sweep kernel above."""
    omega, sweeps = _complete_sweeps(graph.adjacency(), sigma, tol, max_iter)
    if sweeps < 0:
        raise NoConvergenceError(f"no convergence after {max_iter} sweeps (tol={tol})")
    return omega


def sample_gwishart_direct(
    graph: Graph,
    params: GWishartParams,
    rng: np.random.Generator,
    tol: float = DIRECT_SAMPLER_TOL,
    max_iter: int = DIRECT_SAMPLER_MAX_ITER,
) -> PrecisionMatrix:
    """Exact draw from W_G(b, D) for an arbitrary graph.

    Draws a full Wishart, inverts it, completes the covariance against the
    graph, and inverts back.  Exact zeros are stamped onto the non-edge
    entries at the end so the returned matrix satisfies the pattern
    invariant bit-exactly.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = sample_wishart(params, rng)
    sigma = inverse_pd(w)
    omega = _complete_covariance(graph, sigma, tol, max_iter)
    k = inverse_pd(omega)
    off_pattern = ~graph.pattern_mask
    k[off_pattern] = 0.0
    k = (k + k.T) / 2.0
    k[off_pattern] = 0.0
    return PrecisionMatrix(k, graph)


def log_gwishart_unnorm(k: PrecisionMatrix, params: GWishartParams) -> float:
    """((b-2)/2) logdet K - tr(D K)/2."""
    kb = k.matrix
    return (params.b - 2.0) / 2.0 * logdet(kb) - 0.5 * float(np.einsum("ij,ji->", params.d, kb))


def log_norm_const_p1(b: float, d: float) -> float:
    """Normalizing constant of the one-dimensional law: log Gamma(b/2) + (b/2) log(2/d)."""
    if not b > 2:
        raise ValueError("b must exceed 2")
    if not d > 0:
        raise ValueError("d must be positive")
    return float(gammaln(b / 2.0)) + (b / 2.0) * math.log(2.0 / d)


def log_J(b: float, d_block: np.ndarray, a11: float) -> float:
    """Log normalizing constant of (a12, a22) | a11 for a 2x2 Wishart block.

    Closed form: sqrt(2 pi / d22) * I(b, d22) * a11^((b-1)/2)
    * exp(-(d11 - d12^2/d22) a11 / 2), taken in logs.
    """
    d_block = np.asarray(d_block, dtype=float)
    if d_block.shape != (2, 2):
        raise ValueError("d_block must be 2x2")
    cholesky(d_block)
    if not a11 > 0:
        raise ValueError("a11 must be positive")
    d11, d12, d22 = d_block[0, 0], d_block[0, 1], d_block[1, 1]
    d11_2 = d11 - d12 * d12 / d22
    return (
        0.5 * math.log(2.0 * math.pi / d22)
        + log_norm_const_p1(b, d22)
        + (b - 1.0) / 2.0 * math.log(a11)
        - 0.5 * d11_2 * a11
    )
