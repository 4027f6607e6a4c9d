"""Birth-death MCMC structure learning for Gaussian graphical models."""

from .engine import ChainConfig, ChainTrace, RateTable, bdmcmc_step, run_chain
from .estimators import PosteriorSummary, summarize
from .graphs import Graph, GraphPrior, toggle_edge
from .gwishart import GWishartParams, PrecisionMatrix, sample_gwishart_direct, sample_wishart

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "ChainTrace",
    "RateTable",
    "Graph",
    "GraphPrior",
    "GWishartParams",
    "PrecisionMatrix",
    "PosteriorSummary",
    "bdmcmc_step",
    "run_chain",
    "sample_gwishart_direct",
    "sample_wishart",
    "summarize",
    "toggle_edge",
    "__version__",
]
