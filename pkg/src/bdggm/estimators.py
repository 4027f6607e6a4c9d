"""Rao-Blackwellized posterior summaries from a chain trace.

Every estimator weighs a visited state by its waiting time: the edge
inclusion probability of e is the weighted fraction of post-burn-in states
containing e, a graph's posterior probability is its share of total weight,
and the posterior mean precision matrix averages the thinned K snapshots
with their step weights (thinning is weight-independent, so this stays
unbiased, just with a little extra Monte Carlo error).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import ChainTrace
from .graphs import Graph


class EmptyTraceError(ValueError):
    """No usable steps after burn-in."""


class NoSnapshotsError(ValueError):
    """Trace carries no precision-matrix snapshots after burn-in."""


@dataclass
class PosteriorSummary:
    phat: np.ndarray
    khat: np.ndarray
    graph_probs: dict[str, float]
    map_graph: Graph


def _post_burn(trace: ChainTrace) -> tuple[np.ndarray, np.ndarray]:
    w = trace.weights[trace.burn_in :]
    m = trace.membership[trace.burn_in :]
    if w.size == 0 or float(w.sum()) <= 0:
        raise EmptyTraceError("no weight after burn-in")
    return w, m

def edge_inclusion_probs(trace: ChainTrace) -> np.ndarray:
    """Symmetric p x p matrix of weighted edge occupancy, zero diagonal."""
    w, m = _post_burn(trace)
    probs = (w @ m) / w.sum()
    out = np.zeros((trace.p, trace.p))
    for (i, j), val in zip(trace.edges, probs):
        out[i, j] = out[j, i] = val
    return out


def graph_posterior(trace: ChainTrace) -> dict[str, float]:
    """Visited graphs mapped to their share of total waiting time."""
    w, _ = _post_burn(trace)
    totals: dict[str, float] = {}
    for gid, weight in zip(trace.graph_ids[trace.burn_in :], w):
        totals[gid] = totals.get(gid, 0.0) + float(weight)
    total = sum(totals.values())
    return {gid: t / total for gid, t in totals.items()}


def map_graph(trace: ChainTrace) -> Graph:
    """Highest-probability visited graph; ties break to the lexicographically
    smallest canonical string so outputs are deterministic."""
    probs = graph_posterior(trace)
    best = min(probs, key=lambda gid: (-probs[gid], gid))
    return Graph.from_text(best)


def posterior_mean_precision(trace: ChainTrace) -> np.ndarray:
    """Weight-averaged precision matrix over post-burn-in snapshots."""
    pairs = [(step, k) for step, k in trace.snapshots if step >= trace.burn_in]
    if not pairs:
        raise NoSnapshotsError("no snapshots after burn-in")
    acc = np.zeros((trace.p, trace.p))
    total = 0.0
    for step, k in pairs:
        w = float(trace.weights[step])
        acc += w * k
        total += w
    return acc / total


def cumulative_occupancy(
    trace: ChainTrace, e: tuple[int, int], skip_burn_in: bool = False
) -> np.ndarray:
    """Running weighted occupancy of edge e after each step.

    By default the sequence starts at step 0 and therefore includes burn-in
    (callers plotting convergence flag the boundary at ``trace.burn_in``);
    with ``skip_burn_in`` the final element equals the edge's inclusion
    probability.
    """
    start = trace.burn_in if skip_burn_in else 0
    w = trace.weights[start:]
    if w.size == 0:
        raise EmptyTraceError("empty trace")
    idx = trace.edges.index(e)
    ind = trace.membership[start:, idx].astype(float)
    return np.cumsum(w * ind) / np.cumsum(w)


def summarize(trace: ChainTrace) -> PosteriorSummary:
    return PosteriorSummary(
        phat=edge_inclusion_probs(trace),
        khat=posterior_mean_precision(trace),
        graph_probs=graph_posterior(trace),
        map_graph=map_graph(trace),
    )
