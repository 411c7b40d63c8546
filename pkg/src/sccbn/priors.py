"""Structure priors over directed graphs.

Every prior returns an (unnormalised) log term; the total log prior is their
sum.  Hard constraints on strongly connected components are expressed as a
log prior of ``-inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .graph import DEGREE_KINDS, DirectedGraph, SccPartition, count_motifs, degree_vector

REQUIRED = 1
FORBIDDEN = -1
INDIFFERENT = 0


class PriorConfigError(ValueError):
    pass


@dataclass
class PriorConfig:
    """Which structure priors are active, and their parameters.

    ``concordance`` holds ``REQUIRED`` (1), ``FORBIDDEN`` (-1) or
    ``INDIFFERENT`` (0) per ordered pair.  Any field left at ``None`` is
    switched off.
    """

    bernoulli: Optional[np.ndarray] = None
    concordance: Optional[np.ndarray] = None
    concordance_beta: float = 1.0
    degree_gamma: Optional[float] = None
    degree_kind: str = "out"
    edge_count_lambda: Optional[float] = None
    motif_weights: Optional[tuple[float, float]] = None
    scc_count_lambda: Optional[float] = None
    scc_size_gamma: Optional[float] = None
    max_scc_size: Optional[int] = None
    allow_sccs: bool = True

    def __post_init__(self):
        if self.bernoulli is not None:
            e = np.array(self.bernoulli, dtype=float)
            if e.ndim != 2 or e.shape[0] != e.shape[1]:
                raise PriorConfigError("bernoulli prior must be a square matrix")
            off = ~np.eye(e.shape[0], dtype=bool)
            if not np.all((e[off] > 0) & (e[off] < 1)):
                raise PriorConfigError("bernoulli edge probabilities must lie strictly inside (0, 1)")
            self.bernoulli = e
        if self.concordance is not None:
            c = np.array(self.concordance, dtype=np.int8)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise PriorConfigError("concordance matrix must be square")
            if not np.isin(c, (REQUIRED, FORBIDDEN, INDIFFERENT)).all():
                raise PriorConfigError("concordance entries must be 1, -1 or 0")
            if self.concordance_beta < 0:
                raise PriorConfigError("concordance_beta must be >= 0")
            self.concordance = c
        for name in ("degree_gamma", "edge_count_lambda", "scc_count_lambda", "scc_size_gamma"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise PriorConfigError(f"{name} must be strictly positive, got {val}")
        if self.degree_kind not in DEGREE_KINDS:
            raise PriorConfigError(f"degree_kind must be one of {DEGREE_KINDS}")
        if self.max_scc_size is not None and self.max_scc_size < 1:
            raise PriorConfigError("max_scc_size must be a positive integer")
        if self.motif_weights is not None:
            self.motif_weights = (float(self.motif_weights[0]), float(self.motif_weights[1]))

    def check_size(self, n_nodes: int) -> None:
        for name in ("bernoulli", "concordance"):
            mat = getattr(self, name)
            if mat is not None and mat.shape != (n_nodes, n_nodes):
                raise PriorConfigError(f"{name} matrix has shape {mat.shape}, expected ({n_nodes}, {n_nodes})")


def _check_shape(g: DirectedGraph, mat: np.ndarray, what: str) -> None:
    if mat.shape != (g.n_nodes, g.n_nodes):
        raise PriorConfigError(f"{what} matrix has shape {mat.shape}, graph has {g.n_nodes} nodes")


def log_prior_bernoulli(g: DirectedGraph, edge_prob: np.ndarray) -> float:
    edge_prob = np.asarray(edge_prob, dtype=float)
    _check_shape(g, edge_prob, "bernoulli")
    off = ~np.eye(g.n_nodes, dtype=bool)
    a = g.adjacency[off]
    e = edge_prob[off]
    return float(np.sum(np.where(a, np.log(e), np.log1p(-e))))


def log_prior_concordance(g: DirectedGraph, requirement: np.ndarray, beta: float) -> float:
    requirement = np.asarray(requirement)
    _check_shape(g, requirement, "concordance")
    a = g.adjacency
    missing = np.count_nonzero((requirement == REQUIRED) & ~a)
    unwanted = np.count_nonzero((requirement == FORBIDDEN) & a)
    return -beta * float(missing + unwanted)


def log_prior_degree(g: DirectedGraph, gamma: float, kind: str = "out") -> float:
    """Power law on node degree, ``(d + 1) ** -gamma`` per node."""
    d = degree_vector(g, kind)
    return float(-gamma * np.sum(np.log1p(d)))


def log_prior_edge_count(g: DirectedGraph, lam: float) -> float:
    """Poisson log-pmf of the number of edges."""
    k = g.n_edges
    return k * math.log(lam) - lam - float(gammaln(k + 1))


def log_prior_motif(g: DirectedGraph, beta_ff: float, beta_fb: float) -> float:
    n_ff, n_fb = count_motifs(g)
    return beta_ff * n_ff + beta_fb * n_fb


def scc_log_term(
    sizes,
    lam: Optional[float] = None,
    gamma: Optional[float] = None,
    max_size: Optional[int] = None,
    allow_sccs: bool = True,
) -> float:
    """SCC prior from the list of component sizes (ordinary ones included or not)."""
    big = [s for s in sizes if s > 1]
    if big and not allow_sccs:
        return -math.inf
    if max_size is not None and any(s > max_size for s in big):
        return -math.inf
    out = 0.0
    if lam is not None:
        k = len(big)
        out += k * math.log(lam) - lam - math.lgamma(k + 1)
    if gamma is not None:
        out -= gamma * sum(math.log(s) for s in big)
    return out


def log_prior_scc(
    partition: SccPartition,
    lam: Optional[float] = None,
    gamma: Optional[float] = None,
    max_size: Optional[int] = None,
    allow_sccs: bool = True,
) -> float:
    """Poisson prior on the number of non-ordinary components plus a power law on their sizes."""
    return scc_log_term([len(c) for c in partition.components], lam, gamma, max_size, allow_sccs)


def log_prior_total(g: DirectedGraph, partition: SccPartition, cfg: PriorConfig) -> float:
    total = 0.0
    if cfg.bernoulli is not None:
        total += log_prior_bernoulli(g, cfg.bernoulli)
    if cfg.concordance is not None:
        total += log_prior_concordance(g, cfg.concordance, cfg.concordance_beta)
    if cfg.degree_gamma is not None:
        total += log_prior_degree(g, cfg.degree_gamma, cfg.degree_kind)
    if cfg.edge_count_lambda is not None:
        total += log_prior_edge_count(g, cfg.edge_count_lambda)
    if cfg.motif_weights is not None:
        total += log_prior_motif(g, *cfg.motif_weights)
    total += log_prior_scc(partition, cfg.scc_count_lambda, cfg.scc_size_gamma, cfg.max_scc_size, cfg.allow_sccs)
    return total
