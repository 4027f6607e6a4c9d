"""Undirected graphs on labeled nodes and priors over the graph space.

Edges are canonically ordered pairs ``(i, j)`` with ``i < j``; passing a
reversed pair anywhere is an error rather than being silently normalized,
because birth/death bookkeeping assigns asymmetric roles to the two
endpoints.  Graphs are immutable values: edge moves return new graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class InvalidMoveError(ValueError):
    """Raised when a birth targets an existing edge or a death a missing one."""


def _check_edge(e: tuple[int, int], p: int) -> None:
    i, j = e
    if not (0 <= i < j < p):
        raise ValueError(f"edge {e!r} is not canonically ordered within 0..{p - 1}")


@dataclass(frozen=True)
class Graph:
    """Undirected graph: node count and a sorted tuple of (i, j) edges, i < j."""

    p: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("need at least one node")
        edges = tuple(sorted(set(self.edges)))
        for e in edges:
            _check_edge(e, self.p)
        object.__setattr__(self, "edges", edges)

    @staticmethod
    def empty(p: int) -> "Graph":
        return Graph(p)

    @staticmethod
    def complete(p: int) -> "Graph":
        return Graph(p, tuple((i, j) for i in range(p) for j in range(i + 1, p)))

    @cached_property
    def _adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.p)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(a)) for a in nbrs)

    def neighbors(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.p:
            raise ValueError(f"node {i} out of range")
        return self._adjacency[i]

    @cached_property
    def _adj_matrix(self) -> np.ndarray:
        adj = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        adj.setflags(write=False)
        return adj

    def adjacency(self) -> np.ndarray:
        """Read-only boolean adjacency matrix, no self loops."""
        return self._adj_matrix

    @cached_property
    def pattern_mask(self) -> np.ndarray:
        """Read-only bool mask of entries allowed to be nonzero (edges + diagonal)."""
        mask = self._adj_matrix | np.eye(self.p, dtype=bool)
        mask.setflags(write=False)
        return mask

    def has_edge(self, e: tuple[int, int]) -> bool:
        _check_edge(e, self.p)
        return e in self._edge_set

    @cached_property
    def _edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges)

    @cached_property
    def text(self) -> str:
        """Canonical text form ``p;i-j,i-j,...`` used for hashing and files."""
        return f"{self.p};" + ",".join(f"{i}-{j}" for i, j in self.edges)

    @staticmethod
    def from_text(text: str) -> "Graph":
        head, _, body = text.partition(";")
        p = int(head)
        edges = []
        for tok in body.split(","):
            if not tok:
                continue
            i, _, j = tok.partition("-")
            edges.append((int(i), int(j)))
        return Graph(p, tuple(edges))

    def n_candidate_edges(self) -> int:
        return self.p * (self.p - 1) // 2


def all_candidate_edges(p: int) -> list[tuple[int, int]]:
    """Every unordered pair, in canonical lexicographic order."""
    return [(i, j) for i in range(p) for j in range(i + 1, p)]


def toggle_edge(g: Graph, e: tuple[int, int]) -> Graph:
    """Add e if absent, remove it if present; pure, input unchanged."""
    _check_edge(e, g.p)
    if e in g._edge_set:
        return Graph(g.p, tuple(x for x in g.edges if x != e))
    return Graph(g.p, g.edges + (e,))


@dataclass(frozen=True)
class GraphPrior:
    """Prior over graphs: uniform, or truncated Poisson on the edge count.

    The Poisson variant has p(G) proportional to gamma^|E| / |E|!; its
    truncation constant cancels in every ratio the sampler evaluates.
    """

    kind: str = "uniform"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "poisson"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "poisson":
            if self.gamma is None or not (self.gamma > 0) or self.gamma != self.gamma:
                raise ValueError("poisson prior needs finite gamma > 0")


def log_prior_ratio(prior: GraphPrior, g: Graph, e: tuple[int, int], move: str) -> float:
    """log P(G') - log P(G) for the single-edge move ``move`` on ``e``.

    move is "birth" (e must be absent) or "death" (e must be present).
    Implemented as a difference of logs so that a birth and the matching
    death cancel exactly in floating point.
    """
    _check_edge(e, g.p)
    present = g.has_edge(e)
    if move == "death":
        if not present:
            raise InvalidMoveError(f"death of absent edge {e}")
    elif move == "birth":
        if present:
            raise InvalidMoveError(f"birth of existing edge {e}")
    else:
        raise ValueError(f"unknown move {move!r}")
    if prior.kind == "uniform":
        return 0.0
    n_edges = len(g.edges)
    if move == "death":
        return math.log(n_edges) - math.log(prior.gamma)
    return math.log(prior.gamma) - math.log(n_edges + 1)
