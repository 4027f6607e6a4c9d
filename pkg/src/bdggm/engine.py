"""Continuous-time birth-death chain over (graph, precision matrix) states.

Every candidate edge carries a log birth rate (if absent) or log death rate
(if present).  A death rate is the ratio of conditional posterior densities
of the smaller and larger model evaluated at the shared entries of K; after
simplification it reduces to a prior ratio, a ratio of graph normalizing
constants, and the computable factor H(K, scale, e).  The intractable
normalizing-constant ratio is replaced by evaluating the same H factor at a
fresh prior draw K~, so a rate costs two H evaluations:

    log delta_e = log prior ratio + log H(K, D + S, e) - log H(K~, D, e)
    log beta_e  = log prior ratio + log H(K~, D, e) - log H(K, D + S, e)

The chain holds each state for the deterministic mean waiting time
1 / (total rate), which doubles as the Rao-Blackwell weight of the state,
then jumps to the edge drawn categorically by rate.

Completions: H involves two partial completions of K.  K1 replaces the 2x2
block at the edge by the value explained by all other nodes; K0 zeroes the
edge entry and replaces the (j, j) diagonal by the value explained by the
remaining nodes *after* the edge entry is zeroed (the dying edge is absent
in the smaller model, so its row enters the conditioning with a zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .graphs import Graph, GraphPrior, all_candidate_edges, log_prior_ratio, toggle_edge
from .gwishart import GWishartParams, PrecisionMatrix, sample_gwishart_direct
from .linalg import inverse_pd, schur_update

DEGENERATE_TOL = 1e-12
LOG_RATE_CLAMP = 700.0


class DegenerateEdgeError(ArithmeticError):
    """Conditioning at an edge produced a numerically singular variance."""


class DimensionTooSmallError(ValueError):
    """Operation requires at least three nodes."""


class ChainStepError(RuntimeError):
    """A chain step failed; message carries the step index."""


# ---------------------------------------------------------------------------
# Configuration and trace containers
# ---------------------------------------------------------------------------


@dataclass
class ChainConfig:
    iterations: int
    burn_in: int
    prior: GraphPrior
    gw_prior: GWishartParams
    scatter: np.ndarray  # S = x' x
    n: int  # sample size behind the scatter
    seed: int
    initial_graph: Graph | None = None
    snapshot_stride: int = 10
    exchange_mode: str = "shared"  # or "per_edge"

    def __post_init__(self):
        self.scatter = np.asarray(self.scatter, dtype=float)
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if self.scatter.shape != self.gw_prior.d.shape:
            raise ValueError("scatter and prior scale dimensions differ")
        if self.p < 2:
            raise ValueError("need at least two nodes for candidate edges")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be at least 1")
        if self.exchange_mode not in ("shared", "per_edge"):
            raise ValueError(f"unknown exchange_mode {self.exchange_mode!r}")
        if self.initial_graph is not None and self.initial_graph.p != self.p:
            raise ValueError("initial graph dimension mismatch")
        # cached once; configs are not meant to be mutated after construction
        self._posterior = GWishartParams(self.b_star, self.gw_prior.d + self.scatter)

    @property
    def p(self) -> int:
        return self.gw_prior.p

    @property
    def b_star(self) -> float:
        return self.gw_prior.b + self.n

    @property
    def d_star(self) -> np.ndarray:
        return self._posterior.d

    def posterior_params(self) -> GWishartParams:
        return self._posterior


@dataclass
class RateTable:
    """Per-edge log rates over every candidate pair, in canonical order."""

    edges: list[tuple[int, int]]
    is_death: np.ndarray  # bool per pair
    log_rates: np.ndarray
    log_total: float = field(init=False)
    clamped: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.log_rates)):
            raise ValueError("non-finite log rate")
        self.log_total = float(logsumexp(self.log_rates))


@dataclass
class ChainTrace:
    """Visited states with waiting-time weights; raw material of estimators.

    weights and membership cover every step; K snapshots are thinned.
    """

    p: int
    burn_in: int
    edges: list[tuple[int, int]]
    weights: np.ndarray  # (iterations,)
    membership: np.ndarray  # (iterations, n_pairs) bool
    graph_ids: list[str]
    snapshots: list[tuple[int, np.ndarray]]
    clamp_events: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.weights)

    def validate(self) -> None:
        if np.any(self.weights <= 0):
            raise ValueError("nonpositive waiting weight")
        if float(self.weights[self.burn_in :].sum()) <= 0:
            raise ValueError("no weight after burn-in")


# ---------------------------------------------------------------------------
# Completions and the H factor
# ---------------------------------------------------------------------------


def _rest_indices(p: int, drop: tuple[int, ...]) -> np.ndarray:
    return np.array([k for k in range(p) if k not in drop], dtype=int)


def k0_completion(k: PrecisionMatrix, e: tuple[int, int]) -> np.ndarray:
    """Copy of K with the edge entry zeroed and (j, j) set to its explained
    value given everything else, computed on the zeroed matrix."""
    i, j = e
    out = np.array(k.matrix, dtype=float, copy=True)
    out[i, j] = out[j, i] = 0.0
    rest = _rest_indices(out.shape[0], (j,))
    c = schur_update(out, np.array([j]), rest)[0, 0]
    out[j, j] = c
    return out


def k1_completion(k: PrecisionMatrix, e: tuple[int, int]) -> np.ndarray:
    """Copy of K with the 2x2 block at e replaced by its explained value
    given the remaining nodes."""
    i, j = e
    p = k.matrix.shape[0]
    if p < 3:
        raise DimensionTooSmallError("k1 completion needs p >= 3")
    out = np.array(k.matrix, dtype=float, copy=True)
    rest = _rest_indices(p, (i, j))
    block = schur_update(out, np.array([i, j]), rest)
    out[i, i] = block[0, 0]
    out[i, j] = out[j, i] = block[0, 1]
    out[j, j] = block[1, 1]
    return out


def log_H(k: PrecisionMatrix, scale: np.ndarray, e: tuple[int, int]) -> float:
    """The computable factor of a death rate, in logs.

    H = sqrt(scale_jj / (2 pi a)) * exp(-[tr(scale (K0 - K1))
        - (scale_ii - scale_ij^2 / scale_jj) a] / 2)  with a = k_ii - k1_ii.
    Only the four entries where K0 and K1 differ enter the trace.
    """
    i, j = e
    km = k.matrix
    p = km.shape[0]
    rest = _rest_indices(p, (i, j))
    block = schur_update(km, np.array([i, j]), rest)  # zero when p == 2
    a11 = km[i, i] - block[0, 0]
    if not a11 > DEGENERATE_TOL:
        raise DegenerateEdgeError(f"degenerate conditioning at edge {e}")
    notj = _rest_indices(p, (j,))
    z = km[notj, j].copy()
    z[notj == i] = 0.0
    c = float(z @ np.linalg.solve(km[np.ix_(notj, notj)], z))
    tr_term = (
        scale[i, i] * a11
        + 2.0 * scale[i, j] * (0.0 - block[0, 1])
        + scale[j, j] * (c - block[1, 1])
    )
    cond = scale[i, i] - scale[i, j] ** 2 / scale[j, j]
    return 0.5 * math.log(scale[j, j] / (2.0 * math.pi * a11)) - 0.5 * (tr_term - cond * a11)


def _log_h_all(
    kmat: np.ndarray,
    sigma: np.ndarray,
    scale: np.ndarray,
    ii: np.ndarray,
    jj: np.ndarray,
) -> np.ndarray:
    """Vectorized log H over many edges, given sigma = inv(K).

    Uses the block-inverse identities: the explained 2x2 block at (i, j) is
    K_ee - inv(sigma_ee), and the explained (j, j) value after zeroing the
    edge entry u = k_ij expands to
    k_jj - 1/s_jj + 2 u s_ij / s_jj + u^2 (s_ii - s_ij^2 / s_jj).
    """
    sii = sigma[ii, ii]
    sjj = sigma[jj, jj]
    sij = sigma[ii, jj]
    det2 = sii * sjj - sij * sij
    a11 = sjj / det2
    if np.any(a11 <= DEGENERATE_TOL):
        bad = int(np.argmax(a11 <= DEGENERATE_TOL))
        raise DegenerateEdgeError(f"degenerate conditioning at edge ({ii[bad]}, {jj[bad]})")
    u = kmat[ii, jj]
    k1ij = u + sij / det2
    k1jj = kmat[jj, jj] - sii / det2
    c = kmat[jj, jj] - 1.0 / sjj + 2.0 * u * sij / sjj + u * u * (sii - sij * sij / sjj)
    scii = scale[ii, ii]
    scjj = scale[jj, jj]
    scij = scale[ii, jj]
    tr_term = scii * a11 + 2.0 * scij * (0.0 - k1ij) + scjj * (c - k1jj)
    cond = scii - scij * scij / scjj
    return 0.5 * np.log(scjj / (2.0 * math.pi * a11)) - 0.5 * (tr_term - cond * a11)


# ---------------------------------------------------------------------------
# Rates, waiting times, jumps
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _pair_arrays(p: int) -> tuple[list[tuple[int, int]], np.ndarray, np.ndarray, dict]:
    pairs = all_candidate_edges(p)
    ii = np.fromiter((i for i, _ in pairs), dtype=int, count=len(pairs))
    jj = np.fromiter((j for _, j in pairs), dtype=int, count=len(pairs))
    index = {e: idx for idx, e in enumerate(pairs)}
    return pairs, ii, jj, index


def _rates(
    g: Graph,
    k: PrecisionMatrix,
    k_tilde: PrecisionMatrix | None,
    *,
    prior: GraphPrior,
    gw_prior: GWishartParams,
    d_star: np.ndarray,
    exchange_mode: str,
    rng: np.random.Generator | None,
) -> RateTable:
    pairs, ii, jj, index = _pair_arrays(g.p)
    is_death = np.zeros(len(pairs), dtype=bool)
    for e in g.edges:
        is_death[index[e]] = True
    d = gw_prior.d

    log_h_post = _log_h_all(k.matrix, inverse_pd(k.matrix), d_star, ii, jj)
    if exchange_mode == "shared":
        if k_tilde is None:
            raise ValueError("shared exchange mode needs a k_tilde draw")
        log_h_prior = _log_h_all(
            k_tilde.matrix, inverse_pd(k_tilde.matrix), d, ii, jj
        )
    else:
        if rng is None:
            raise ValueError("per_edge exchange mode needs an rng")
        log_h_prior = np.empty(len(pairs))
        for idx, e in enumerate(pairs):
            target = g if is_death[idx] else toggle_edge(g, e)
            draw = sample_gwishart_direct(target, gw_prior, rng)
            log_h_prior[idx] = log_H(draw, d, e)

    if prior.kind == "uniform":
        log_prior = np.zeros(len(pairs))
    else:
        n_edges = len(g.edges)
        log_gamma = math.log(prior.gamma)
        death_val = math.log(n_edges) - log_gamma if n_edges else 0.0
        birth_val = log_gamma - math.log(n_edges + 1)
        log_prior = np.where(is_death, death_val, birth_val)
    log_rates = np.where(
        is_death,
        log_prior + log_h_post - log_h_prior,
        log_prior + log_h_prior - log_h_post,
    )
    clipped = np.clip(log_rates, -LOG_RATE_CLAMP, LOG_RATE_CLAMP)
    clamped = int(np.sum(clipped != log_rates))
    return RateTable(pairs, is_death, clipped, clamped=clamped)


def compute_rates(
    g: Graph,
    k: PrecisionMatrix,
    k_tilde: PrecisionMatrix | None,
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
) -> RateTable:
    """Log birth/death rates for every candidate edge of the current state.

    Shared mode evaluates the prior-side H at the single draw ``k_tilde``;
    per-edge mode ignores it and draws a fresh prior matrix per edge (under
    the proposed graph for births), which needs ``rng``.
    """
    return _rates(
        g,
        k,
        k_tilde,
        prior=cfg.prior,
        gw_prior=cfg.gw_prior,
        d_star=cfg.d_star,
        exchange_mode=cfg.exchange_mode,
        rng=rng,
    )


def waiting_time(rt: RateTable) -> float:
    """Mean holding time 1 / (total birth + death rate)."""
    return math.exp(-rt.log_total)


def select_jump(rt: RateTable, rng: np.random.Generator) -> tuple[tuple[int, int], str]:
    """Categorical draw proportional to the rates, via Gumbel-max on logs."""
    gumbel = rng.gumbel(size=rt.log_rates.size)
    idx = int(np.argmax(rt.log_rates + gumbel))
    return rt.edges[idx], "death" if rt.is_death[idx] else "birth"


def bdmcmc_step(
    state: tuple[Graph, PrecisionMatrix],
    cfg: ChainConfig,
    rng: np.random.Generator,
) -> tuple[Graph, PrecisionMatrix, float]:
    """One jump of the chain; the returned weight belongs to the pre-jump state."""
    g, k = state
    _, _, w, g_new, k_new = _step(
        g,
        k,
        rng,
        prior=cfg.prior,
        gw_prior=cfg.gw_prior,
        posterior=cfg.posterior_params(),
        exchange_mode=cfg.exchange_mode,
    )
    return g_new, k_new, w


def _step(g, k, rng, *, prior, gw_prior, posterior, exchange_mode):
    if exchange_mode == "shared":
        k_tilde = sample_gwishart_direct(g, gw_prior, rng)
    else:
        k_tilde = None
    rt = _rates(
        g,
        k,
        k_tilde,
        prior=prior,
        gw_prior=gw_prior,
        d_star=posterior.d,
        exchange_mode=exchange_mode,
        rng=rng,
    )
    w = waiting_time(rt)
    edge, move = select_jump(rt, rng)
    g_new = toggle_edge(g, edge)
    k_new = sample_gwishart_direct(g_new, posterior, rng)
    return edge, rt, w, g_new, k_new


def run_chain(cfg: ChainConfig) -> ChainTrace:
    """Drive the chain for cfg.iterations steps from the configured start.

    Records the canonical graph string and waiting weight at every step and
    a K snapshot every ``snapshot_stride`` steps.  Burn-in steps stay in the
    trace (diagnostics want them); estimators drop them via ``burn_in``.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    p = cfg.p
    posterior = cfg.posterior_params()
    g = cfg.initial_graph if cfg.initial_graph is not None else Graph.empty(p)
    k = sample_gwishart_direct(g, posterior, rng)

    pairs, _, _, pair_index = _pair_arrays(p)
    row = np.zeros(len(pairs), dtype=bool)
    for e in g.edges:
        row[pair_index[e]] = True

    weights = np.empty(cfg.iterations)
    membership = np.empty((cfg.iterations, len(pairs)), dtype=bool)
    graph_ids: list[str] = []
    snapshots: list[tuple[int, np.ndarray]] = []
    clamp_events = 0

    for t in range(cfg.iterations):
        graph_ids.append(g.text)
        membership[t] = row
        if t % cfg.snapshot_stride == 0:
            snapshots.append((t, k.matrix.copy()))
        try:
            edge, rt, w, g, k = _step(
                g,
                k,
                rng,
                prior=cfg.prior,
                gw_prior=cfg.gw_prior,
                posterior=posterior,
                exchange_mode=cfg.exchange_mode,
            )
        except Exception as err:
            raise ChainStepError(f"step {t}: {err}") from err
        weights[t] = w
        clamp_events += rt.clamped
        row[pair_index[edge]] = ~row[pair_index[edge]]

    trace = ChainTrace(
        p=p,
        burn_in=cfg.burn_in,
        edges=pairs,
        weights=weights,
        membership=membership,
        graph_ids=graph_ids,
        snapshots=snapshots,
        clamp_events=clamp_events,
    )
    trace.validate()
    return trace
