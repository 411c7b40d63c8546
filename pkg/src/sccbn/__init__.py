"""Bayesian network structure learning with strongly connected components.

Cycles in a directed graph are collapsed into multivariate Gaussian nodes of
an acyclic condensed graph.  Graphs are scored by closed-form marginal
likelihood plus structure priors and sampled with Metropolis-Hastings.
"""

from .analysis import (
    EdgeProbabilityMatrix,
    auroc,
    best_graph,
    edge_probabilities,
    gelman_rubin,
    scc_detection_rate,
)
from .graph import (
    CondensedGraph,
    DirectedGraph,
    GraphError,
    SccPartition,
    condense,
    count_motifs,
    tarjan_scc,
    toggle_edge,
)
from .priors import FORBIDDEN, INDIFFERENT, REQUIRED, PriorConfig, log_prior_total
from .sampler import AuditError, ChainOutput, SamplerConfig, read_chain, run_chain
from .score import (
    ComponentScore,
    ComponentScorer,
    DataMatrix,
    Hyperparams,
    d_statistic,
    graph_log_score,
    log_marginal_ordinary,
    log_marginal_scc,
)

__version__ = "0.1.0"

__all__ = [
    "AuditError",
    "ChainOutput",
    "ComponentScore",
    "ComponentScorer",
    "CondensedGraph",
    "DataMatrix",
    "DirectedGraph",
    "EdgeProbabilityMatrix",
    "FORBIDDEN",
    "GraphError",
    "Hyperparams",
    "INDIFFERENT",
    "PriorConfig",
    "REQUIRED",
    "SamplerConfig",
    "SccPartition",
    "auroc",
    "best_graph",
    "condense",
    "count_motifs",
    "d_statistic",
    "edge_probabilities",
    "gelman_rubin",
    "graph_log_score",
    "log_marginal_ordinary",
    "log_marginal_scc",
    "log_prior_total",
    "read_chain",
    "run_chain",
    "scc_detection_rate",
    "tarjan_scc",
    "toggle_edge",
]
