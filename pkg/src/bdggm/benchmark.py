"""Synthetic models, data generation, and the structure-recovery metric suite.

Seven generator families with distinct sparsity patterns: circle, star,
AR(1), AR(2), random, cluster, and scale-free.  The first four have fixed
matrices; the last three draw a random graph and then a precision matrix
from the graph-constrained prior with 3 degrees of freedom and identity
scale.  Metrics: calibration error (L1 distance between the inclusion
probability matrix and the true adjacency), F1 of a thresholded graph
estimate, and the Gaussian Kullback-Leibler divergence between precision
matrices.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import ChainConfig, run_chain
from .estimators import edge_inclusion_probs, posterior_mean_precision
from .graphs import Graph, GraphPrior, all_candidate_edges
from .gwishart import GWishartParams, sample_gwishart_direct
from .linalg import cholesky, inverse_pd, logdet

MODEL_KINDS = ("circle", "star", "ar1", "ar2", "random", "cluster", "scale-free")

AR1_RHO = 0.7
STRUCTURAL_ZERO_TOL = 1e-8


class InvalidDimensionError(ValueError):
    """Model kind cannot be realized at the requested dimension."""


@dataclass(frozen=True)
class SyntheticModel:
    kind: str
    p: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidDimensionError(
                f"unknown model {self.kind!r}; valid kinds: {', '.join(MODEL_KINDS)}"
            )
        if self.p < 2:
            raise InvalidDimensionError("need at least two nodes")
        if self.kind in ("circle", "ar2") and self.p < 3:
            raise InvalidDimensionError(f"{self.kind} needs p >= 3")
        if self.kind == "cluster" and self.p < 4:
            raise InvalidDimensionError("cluster needs p >= 4")


def _graph_from_matrix(k: np.ndarray, tol: float = 0.0) -> Graph:
    p = k.shape[0]
    edges = tuple(
        (i, j) for i in range(p) for j in range(i + 1, p) if abs(k[i, j]) > tol
    )
    return Graph(p, edges)


def _circle(p: int) -> tuple[Graph, np.ndarray]:
    k = np.eye(p)
    for i in range(1, p):
        k[i, i - 1] = k[i - 1, i] = 0.5
    k[0, p - 1] = k[p - 1, 0] = 0.4
    return _graph_from_matrix(k), k


def _star(p: int) -> tuple[Graph, np.ndarray]:
    k = np.eye(p)
    k[0, 1:] = k[1:, 0] = 0.1
    return _graph_from_matrix(k), k


def _ar1(p: int) -> tuple[Graph, np.ndarray]:
    # covariance 0.7^|i-j| has an exactly tridiagonal inverse; entries below
    # the structural-zero tolerance are stamped to zero after inversion
    sigma = AR1_RHO ** np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    k = inverse_pd(sigma)
    k[np.abs(k) < STRUCTURAL_ZERO_TOL] = 0.0
    return _graph_from_matrix(k), k


def _ar2(p: int) -> tuple[Graph, np.ndarray]:
    k = np.eye(p)
    for i in range(1, p):
        k[i, i - 1] = k[i - 1, i] = 0.5
    for i in range(2, p):
        k[i, i - 2] = k[i - 2, i] = 0.25
    return _graph_from_matrix(k), k


def _random_graph(p: int, rng: np.random.Generator) -> Graph:
    prob = 2.0 / (p - 1)
    edges = tuple(e for e in all_candidate_edges(p) if rng.random() < prob)
    return Graph(p, edges)


def _cluster_graph(p: int, rng: np.random.Generator) -> Graph:
    n_blocks = max(2, p // 20)
    sizes = [p // n_blocks + (1 if r < p % n_blocks else 0) for r in range(n_blocks)]
    edges: list[tuple[int, int]] = []
    start = 0
    for size in sizes:
        if size < 2:
            raise InvalidDimensionError("cluster block too small")
        prob = 2.0 / (size - 1)
        nodes = range(start, start + size)
        for i in nodes:
            for j in range(i + 1, start + size):
                if rng.random() < prob:
                    edges.append((i, j))
        start += size
    return Graph(p, tuple(edges))


def _scale_free_graph(p: int, rng: np.random.Generator) -> Graph:
    # preferential attachment from a connected 2-node seed, one edge per new
    # node, which yields exactly p - 1 edges
    degree = np.zeros(p)
    degree[0] = degree[1] = 1
    edges = [(0, 1)]
    for v in range(2, p):
        probs = degree[:v] / degree[:v].sum()
        w = int(rng.choice(v, p=probs))
        edges.append((min(v, w), max(v, w)))
        degree[v] += 1
        degree[w] += 1
    return Graph(p, tuple(sorted(edges)))


def generate_model(m: SyntheticModel) -> tuple[Graph, np.ndarray]:
    """True graph and true precision matrix for a synthetic model."""
    rng = np.random.default_rng(np.random.SeedSequence(m.seed))
    if m.kind == "circle":
        return _circle(m.p)
    if m.kind == "star":
        return _star(m.p)
    if m.kind == "ar1":
        return _ar1(m.p)
    if m.kind == "ar2":
        return _ar2(m.p)
    if m.kind == "random":
        g = _random_graph(m.p, rng)
    elif m.kind == "cluster":
        g = _cluster_graph(m.p, rng)
    else:
        g = _scale_free_graph(m.p, rng)
    params = GWishartParams(3.0, np.eye(m.p))
    k = sample_gwishart_direct(g, params, rng)
    return g, k.matrix


def sample_mvn(
    mat: np.ndarray, n: int, rng: np.random.Generator, precision: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """n zero-mean Gaussian rows and their scatter S = x' x.

    ``mat`` is the precision matrix by default; pass ``precision=False`` for
    a covariance.
    """
    p = mat.shape[0]
    z = rng.standard_normal((n, p))
    if precision:
        lower = cholesky(mat)
        # rows ~ N(0, K^-1): solve L' x' = z'
        x = np.linalg.solve(lower.T, z.T).T
    else:
        x = z @ cholesky(mat).T
    s = x.T @ x
    return x, (s + s.T) / 2.0


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def calibration_error(phat: np.ndarray, g_true: Graph) -> float:
    """Sum over candidate edges of |phat_e - 1(e in true graph)|."""
    adj = g_true.adjacency()
    total = 0.0
    for i, j in all_candidate_edges(g_true.p):
        total += abs(phat[i, j] - float(adj[i, j]))
    return total


def f1_score(g_est: Graph, g_true: Graph) -> float:
    """2 TP / (2 TP + FP + FN); two empty graphs score 1 by convention."""
    if g_est.p != g_true.p:
        raise ValueError("graphs have different node counts")
    est = set(g_est.edges)
    true = set(g_true.edges)
    tp = len(est & true)
    fp = len(est - true)
    fn = len(true - est)
    if tp == fp == fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def kl_divergence(k_true: np.ndarray, k_hat: np.ndarray) -> float:
    """Gaussian KL between N(0, K_true^-1) and N(0, K_hat^-1)."""
    p = k_true.shape[0]
    trace = float(np.einsum("ij,ji->", inverse_pd(k_true), k_hat))
    return 0.5 * (trace - p - (logdet(k_hat) - logdet(k_true)))


# ---------------------------------------------------------------------------
# Scenario harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    model: str
    p: int
    n: int
    reps: int
    iterations: int = 10_000
    burn_in: int = 5_000
    seed: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")


@dataclass
class RepResult:
    scenario: Scenario
    rep: int
    f1: float = float("nan")
    ce: float = float("nan")
    kl: float = float("nan")
    seconds: float = 0.0
    error: str | None = None


@dataclass
class ScenarioReport:
    scenario: Scenario
    reps: list[RepResult]

    def _ok(self) -> list[RepResult]:
        return [r for r in self.reps if r.error is None]

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.reps if r.error is not None)

    def mean_sd(self, metric: str) -> tuple[float, float]:
        vals = np.array([getattr(r, metric) for r in self._ok()])
        if vals.size == 0:
            return float("nan"), float("nan")
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        return float(vals.mean()), sd


def run_replication(sc: Scenario, rep: int) -> RepResult:
    """One independent draw-data-fit-score cycle, with failures recorded."""
    out = RepResult(sc, rep)
    start = time.perf_counter()
    try:
        seeds = np.random.SeedSequence(sc.seed).spawn(sc.reps)[rep]
        child = seeds.spawn(2)
        model_seed = int(child[0].generate_state(1)[0])
        g_true, k_true = generate_model(SyntheticModel(sc.model, sc.p, seed=model_seed))
        data_rng = np.random.default_rng(child[1])
        _, scatter = sample_mvn(k_true, sc.n, data_rng)
        cfg = ChainConfig(
            iterations=sc.iterations,
            burn_in=sc.burn_in,
            prior=GraphPrior("uniform"),
            gw_prior=GWishartParams(3.0, np.eye(sc.p)),
            scatter=scatter,
            n=sc.n,
            seed=int(child[1].generate_state(2)[1]),
        )
        trace = run_chain(cfg)
        phat = edge_inclusion_probs(trace)
        khat = posterior_mean_precision(trace)
        g_est = Graph(
            sc.p,
            tuple(e for e in all_candidate_edges(sc.p) if phat[e[0], e[1]] > sc.threshold),
        )
        out.f1 = f1_score(g_est, g_true)
        out.ce = calibration_error(phat, g_true)
        out.kl = kl_divergence(k_true, khat)
    except Exception as err:  # per-cell failure: record, keep going
        out.error = f"{type(err).__name__}: {err}"
    out.seconds = time.perf_counter() - start
    return out


def _run_job(args: tuple[Scenario, int]) -> RepResult:
    return run_replication(*args)


def run_benchmark(scenarios: list[Scenario], workers: int = 1) -> list[ScenarioReport]:
    """All replications of all scenarios; results merge deterministically by
    (scenario order, rep index) no matter the worker count."""
    jobs = [(sc, rep) for sc in scenarios for rep in range(sc.reps)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    reports = []
    cursor = 0
    for sc in scenarios:
        reports.append(ScenarioReport(sc, results[cursor : cursor + sc.reps]))
        cursor += sc.reps
    return reports
