"""Seeded generators for benchmark graphs and linear-Gaussian data.

Noise is parameterised by its variance throughout: ``N(0, 5)`` means
variance 5.  Every operation draws from its own stream derived from the
seed, so adding a draw to one generator does not shift another.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .graph import DirectedGraph, SccPartition, condense, tarjan_scc, topological_order
from .score import DataMatrix


class SimulationError(ValueError):
    pass


def stream(seed: int, tag: str) -> np.random.Generator:
    """Independent generator for one named operation."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(tag.encode()),)))


def _check_rho(rho: float, m: int) -> None:
    lower = -1.0 / (m - 1) if m > 1 else -1.0
    if not (lower < rho < 1.0):
        raise SimulationError(f"correlation {rho} gives a singular covariance for a {m}-node block")


def equicorrelation_cov(m: int, sigma2, rho: float) -> np.ndarray:
    _check_rho(rho, m)
    sd = np.sqrt(np.broadcast_to(np.asarray(sigma2, dtype=float), (m,)))
    corr = np.full((m, m), rho)
    np.fill_diagonal(corr, 1.0)
    return corr * np.outer(sd, sd)


def gen_random_dag(n_nodes: int, p_edge: float, seed: int) -> DirectedGraph:
    """Random node order, then each forward pair gets an edge with probability ``p_edge``."""
    if not 0.0 <= p_edge <= 1.0:
        raise SimulationError("p_edge must lie in [0, 1]")
    rng = stream(seed, "random_dag")
    perm = rng.permutation(n_nodes)
    upper = np.triu(rng.random((n_nodes, n_nodes)) < p_edge, k=1)
    adj = np.zeros((n_nodes, n_nodes), dtype=bool)
    adj[np.ix_(perm, perm)] = upper
    return DirectedGraph(adj)


def implant_sccs(g: DirectedGraph, count: int, size: int, seed: int) -> tuple[DirectedGraph, list[tuple[int, ...]]]:
    """Fully connect ``count`` random disjoint groups of ``size`` nodes.

    Returns the new graph and the groups.  A group can end up inside a
    larger component if the original graph has a path leaving and
    re-entering it.
    """
    if count < 0 or size < 1:
        raise SimulationError("count must be >= 0 and size >= 1")
    if count * size > g.n_nodes:
        raise SimulationError(f"cannot place {count} groups of {size} in {g.n_nodes} nodes")
    if count == 0:
        return g, []
    rng = stream(seed, "implant_sccs")
    chosen = rng.choice(g.n_nodes, size=count * size, replace=False)
    groups = [tuple(sorted(int(v) for v in chosen[k * size:(k + 1) * size])) for k in range(count)]
    adj = g.adjacency.copy()
    for grp in groups:
        idx = np.array(grp)
        adj[np.ix_(idx, idx)] = True
    np.fill_diagonal(adj, False)
    return DirectedGraph(adj), groups


@dataclass
class GenerativeSpec:
    """Linear-Gaussian data-generating mechanism over a (possibly cyclic) graph.

    Ordinary nodes are their parents' weighted sum plus noise.  The members
    of each SCC are drawn jointly from a multivariate normal whose means are
    the weighted sums of each member's external parents and whose
    covariance has the node variances on the diagonal and correlation
    ``scc_correlation`` off it.  With ``scc_mean="shared"`` every member
    instead gets the same mean, built from the parents of the whole
    component.
    """

    graph: DirectedGraph
    noise_variance: Union[float, Sequence[float]] = 1.0
    scc_correlation: float = 0.9
    regression_coefficient: float = 1.0
    coefficients: dict = field(default_factory=dict)
    n_samples: int = 100
    names: Optional[list] = None
    scc_mean: str = "member"

    def __post_init__(self):
        n = self.graph.n_nodes
        var = np.broadcast_to(np.asarray(self.noise_variance, dtype=float), (n,))
        if np.any(var <= 0):
            raise SimulationError("noise variances must be positive")
        for comp in tarjan_scc(self.graph).non_ordinary():
            _check_rho(self.scc_correlation, len(comp))
        if self.n_samples < 1:
            raise SimulationError("n_samples must be positive")
        if self.scc_mean not in ("member", "shared"):
            raise SimulationError("scc_mean must be 'member' or 'shared'")

    @property
    def partition(self) -> SccPartition:
        return tarjan_scc(self.graph)

    def coefficient(self, k: int, j: int) -> float:
        return self.coefficients.get((k, j), self.regression_coefficient)


def simulate_linear_gaussian(spec: GenerativeSpec, seed: int) -> DataMatrix:
    g = spec.graph
    n_nodes, n = g.n_nodes, spec.n_samples
    rng = stream(seed, "linear_gaussian")
    var = np.broadcast_to(np.asarray(spec.noise_variance, dtype=float), (n_nodes,))
    cg = condense(g)
    order = topological_order(cg.comp_adjacency)
    adj = g.adjacency
    x = np.zeros((n, n_nodes))
    for c in order:
        members = list(cg.partition.components[c])
        mean = np.zeros((n, len(members)))
        if spec.scc_mean == "shared" and len(members) > 1:
            for k in sorted(cg.comp_parents[c]):
                target = next(v for v in members if adj[k, v])
                mean += (spec.coefficient(k, target) * x[:, k])[:, None]
        else:
            for r, v in enumerate(members):
                for k in np.flatnonzero(adj[:, v]):
                    if k not in members:
                        mean[:, r] += spec.coefficient(int(k), v) * x[:, k]
        if len(members) == 1:
            x[:, members[0]] = mean[:, 0] + rng.normal(0.0, np.sqrt(var[members[0]]), size=n)
        else:
            cov = equicorrelation_cov(len(members), var[members], spec.scc_correlation)
            x[:, members] = mean + rng.multivariate_normal(np.zeros(len(members)), cov, size=n)
    return DataMatrix(x, spec.names)


def gen_mvn_block(n: int, m: int, sigma2: float, rho: float, seed: int) -> DataMatrix:
    """``n`` i.i.d. zero-mean rows with equal variances and equal pairwise correlation."""
    cov = equicorrelation_cov(m, sigma2, rho)
    rng = stream(seed, "mvn_block")
    return DataMatrix(rng.multivariate_normal(np.zeros(m), cov, size=n))


# -- preset mechanisms ------------------------------------------------------

FIG1_NAMES = ["A", "B", "C", "D", "E"]
FIG5_NAMES = ["P", "A", "B", "C", "D", "E", "Q"]
VSTRUCT_NAMES = ["A", "B", "C"]


def fig1_graph() -> DirectedGraph:
    """A->B, B->C, C->D, D->B, D->E: one 3-node cycle between two ordinary nodes."""
    return DirectedGraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 1), (3, 4)])


def fig5_graph() -> DirectedGraph:
    """The five-node cycle graph extended with a root P above A and a leaf Q below E."""
    P, A, B, C, D, E, Q = range(7)
    return DirectedGraph.from_edges(7, [(P, A), (A, B), (B, C), (C, D), (D, B), (D, E), (E, Q)])


def fig5_spec(rho: float = 0.9, n_samples: int = 100, noise_variance: float = 5.0,
              scc_mean: str = "shared") -> GenerativeSpec:
    return GenerativeSpec(fig5_graph(), noise_variance, rho, 1.0, {}, n_samples, list(FIG5_NAMES), scc_mean)


def vstructure_spec(n_samples: int = 100) -> GenerativeSpec:
    """A and B standard normal roots, C = A - 5 B + noise."""
    g = DirectedGraph.from_edges(3, [(0, 2), (1, 2)])
    return GenerativeSpec(g, 1.0, 0.0, 1.0, {(1, 2): -5.0}, n_samples, list(VSTRUCT_NAMES))


def table1_graph(n_nodes: int, n_sccs: int, scc_size: int, p_edge: float, seed: int,
                 exact: bool = True, max_tries: int = 1000) -> tuple[DirectedGraph, list[tuple[int, ...]]]:
    """Random DAG with implanted fully connected groups.

    With ``exact`` the groups are redrawn until each one is a component on
    its own (no outside path re-enters a group).
    """
    dag = gen_random_dag(n_nodes, p_edge, seed)
    for attempt in range(max_tries):
        g, groups = implant_sccs(dag, n_sccs, scc_size, seed + 7919 * attempt)
        if not exact:
            return g, groups
        comps = {frozenset(c) for c in tarjan_scc(g).non_ordinary()}
        if comps == {frozenset(grp) for grp in groups}:
            return g, groups
    raise SimulationError("could not place isolated SCC groups; try another seed")


def table1_spec(n_nodes: int = 50, n_sccs: int = 2, scc_size: int = 3, rho: float = 0.9,
                p_edge: float = 0.05, n_samples: int = 100, seed: int = 0) -> tuple[GenerativeSpec, list]:
    g, groups = table1_graph(n_nodes, n_sccs, scc_size, p_edge, seed)
    return GenerativeSpec(g, 1.0, rho, 1.0, {}, n_samples), groups


def write_truth(graph: DirectedGraph, graph_path, sccs_path=None, names=None) -> None:
    """Edge list ``i -> j`` plus ``scc: {i,j,k}`` annotations."""
    part = tarjan_scc(graph)
    scc_lines = ["scc: {" + ",".join(str(v) for v in comp) + "}" for comp in part.non_ordinary()]
    with open(graph_path, "w", newline="\n") as fh:
        fh.write(f"# nodes={graph.n_nodes}\n")
        if names:
            fh.write("# names=" + ",".join(names) + "\n")
        for i, j in graph.edges():
            fh.write(f"{i} -> {j}\n")
        for line in scc_lines:
            fh.write(line + "\n")
    if sccs_path is not None:
        with open(sccs_path, "w", newline="\n") as fh:
            for line in scc_lines:
                fh.write(line + "\n")


def read_graph(path, n_nodes: Optional[int] = None) -> DirectedGraph:
    """Parse an edge-list file; ``scc:`` lines are annotations and ignored."""
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("scc:"):
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("nodes=") and n_nodes is None:
                        n_nodes = int(tok.split("=", 1)[1])
                continue
            try:
                a, b = line.split("->")
                edges.append((int(a), int(b)))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'i -> j', got {line!r}") from None
    if n_nodes is None:
        n_nodes = 1 + max((max(e) for e in edges), default=0)
    return DirectedGraph.from_edges(n_nodes, edges)


def read_sccs(path) -> list[tuple[int, ...]]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("scc:"):
                body = line[4:].strip().strip("{}")
                out.append(tuple(int(v) for v in body.split(",") if v.strip()))
    return out
