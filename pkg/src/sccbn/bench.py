"""Benchmark pipelines and preset settings used by the command line.

Everything here is seeded and returns plain rows so the caller decides how
to write them.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .analysis import auroc, best_graph, edge_probabilities, scc_detection_rate
from .graph import DirectedGraph, condense
from .priors import PriorConfig
from .sampler import SamplerConfig, run_chain
from .score import Hyperparams, d_statistic
from .simulate import fig5_graph, fig5_spec, gen_mvn_block, simulate_linear_gaussian, table1_spec

# The four prior settings of the 50-node study, keyed by a short label.
TABLE1_PRIORS = {
    "q=m+1; Cor=0.5": Hyperparams(),
    "q=m+11; Cor=0.5": Hyperparams(q_offset=11, mean_correlation=0.5),
    "q=m+11; Cor=0.9": Hyperparams(q_offset=11, mean_correlation=0.9),
    "q=m+101; Cor=0.5": Hyperparams(q_offset=101, mean_correlation=0.5),
}
TABLE1_EDGE_PROB = 0.025
TABLE1_MAX_SCC = 3

FIG3_HYPER = Hyperparams(q_offset=101, mean_correlation=0.5)


def map_workers(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, spread over worker processes when ``workers > 1``.

    Results come back in input order, so a single caller writes them.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def default_workers() -> int:
    env = os.environ.get("SCCBN_WORKERS")
    return int(env) if env else 1


# -- d statistic curves -----------------------------------------------------

def d_curve(ms: Iterable[int], rhos: Iterable[float], n: int = 10_000,
            hyper: Optional[Hyperparams] = None, seed: int = 0) -> list[tuple[int, float, float]]:
    """``(m, rho, d / n)`` for an equicorrelated block at every grid point."""
    rows = []
    for m in ms:
        for rho in rhos:
            block = gen_mvn_block(n, m, 1.0, rho, seed)
            rows.append((m, float(rho), d_statistic(block.values, hyper) / n))
    return rows


def sign_change_point(rhos: Sequence[float], d: Sequence[float]) -> float:
    """Smallest grid correlation from which ``d`` stays positive; ``nan`` if it never does."""
    rhos = np.asarray(rhos, dtype=float)
    d = np.asarray(d, dtype=float)
    order = np.argsort(rhos)
    rhos, d = rhos[order], d[order]
    point = float("nan")
    for r, v in zip(rhos[::-1], d[::-1]):
        if v > 0:
            point = float(r)
        else:
            break
    return point


# -- five-node cycle with a root and a leaf ---------------------------------

def fig5_priors(informative: bool = True, first_cause: bool = True) -> PriorConfig:
    """Out-degree power law and SCC size cap, plus a Bernoulli prior keeping P parentless."""
    if not informative:
        return PriorConfig()
    bern = None
    if first_cause:
        bern = np.full((7, 7), 0.5)
        bern[:, 0] = 1e-6
    return PriorConfig(bernoulli=bern, degree_gamma=3.0, degree_kind="out", max_scc_size=3)


def structurally_equal(a, b) -> bool:
    """Same component partition and, per component, the same set of parent nodes.

    Graphs equal in this sense have identical scores under the component
    model, whatever the wiring inside each component or which member
    receives an incoming edge.
    """
    ga, gb = DirectedGraph(np.asarray(a, dtype=bool)), DirectedGraph(np.asarray(b, dtype=bool))
    ca, cb = condense(ga), condense(gb)
    if ca.partition.components != cb.partition.components:
        return False
    return ca.comp_parents == cb.comp_parents


@dataclass
class Fig5Result:
    seed: int
    best: np.ndarray
    best_score: float
    exact_match: bool
    structural_match: bool


def fig5_replicate(seed: int, informative: bool = True, n_iterations: int = 100_000,
                   rho: float = 0.9, n_samples: int = 100) -> Fig5Result:
    data = simulate_linear_gaussian(fig5_spec(rho=rho, n_samples=n_samples), seed)
    cfg = SamplerConfig(n_iterations=n_iterations, burn_in=n_iterations // 2,
                        thinning=max(1, n_iterations // 2000), seed=seed)
    out = run_chain(cfg, data, fig5_priors(informative))
    adj, score = best_graph(out)
    truth = fig5_graph().adjacency
    return Fig5Result(seed, adj, score, bool(np.array_equal(adj, truth)), structurally_equal(adj, truth))


def _fig5_task(args):
    return fig5_replicate(*args)


def fig5_batch(seeds: Sequence[int], informative: bool, n_iterations: int = 100_000,
               workers: int = 1) -> list[Fig5Result]:
    return map_workers(_fig5_task, [(s, informative, n_iterations) for s in seeds], workers)


# -- random 50-node style benchmark ----------------------------------------

@dataclass(frozen=True)
class Table1Scale:
    n_nodes: int = 20
    n_sccs: int = 1
    scc_size: int = 3
    p_edge: float = 0.05
    n_samples: int = 100
    replicates: int = 20
    n_iterations: int = 1_000_000
    kept_graphs: int = 100

    @classmethod
    def full(cls) -> "Table1Scale":
        return cls(n_nodes=50, n_sccs=2, replicates=100, n_iterations=20_000_000)


@dataclass
class Table1Row:
    replicate: int
    seed: int
    true_rho: float
    prior: str
    auroc: float
    scc_detection: float


def table1_replicate(scale: Table1Scale, true_rho: float, prior: str, replicate: int,
                     seed: int = 0) -> Table1Row:
    """One graph, one dataset, one chain.

    Graph and data depend only on ``seed + replicate``, so every prior
    setting sees the same datasets.
    """
    rep_seed = seed + replicate
    spec, groups = table1_spec(scale.n_nodes, scale.n_sccs, scale.scc_size, true_rho,
                               scale.p_edge, scale.n_samples, seed=rep_seed)
    data = simulate_linear_gaussian(spec, rep_seed)
    edge_prob = np.full((scale.n_nodes, scale.n_nodes), TABLE1_EDGE_PROB)
    priors = PriorConfig(bernoulli=edge_prob, max_scc_size=TABLE1_MAX_SCC)
    burn = scale.n_iterations // 2
    thin = max(1, (scale.n_iterations - burn) // scale.kept_graphs)
    cfg = SamplerConfig(n_iterations=scale.n_iterations, burn_in=burn, thinning=thin, seed=rep_seed)
    out = run_chain(cfg, data, priors, TABLE1_PRIORS[prior], chain_id=f"{prior}/{replicate}")
    probs = edge_probabilities(out)
    return Table1Row(
        replicate,
        rep_seed,
        true_rho,
        prior,
        auroc(probs.p_edge, spec.graph.adjacency),
        float(np.mean(scc_detection_rate(out, groups))),
    )


def _table1_task(args):
    return table1_replicate(*args)


def table1_batch(scale: Table1Scale, true_rhos: Sequence[float], priors: Sequence[str],
                 seed: int = 0, workers: int = 1) -> list[Table1Row]:
    for p in priors:
        if p not in TABLE1_PRIORS:
            raise KeyError(f"unknown prior setting {p!r}; choose from {list(TABLE1_PRIORS)}")
    tasks = [(scale, rho, p, r, seed) for rho in true_rhos for p in priors for r in range(scale.replicates)]
    return map_workers(_table1_task, tasks, workers)


def table1_summary(rows: Sequence[Table1Row]) -> list[tuple[float, str, float, float]]:
    """Row means ``(true_rho, prior, mean AUROC, mean SCC detection)`` in first-seen order."""
    groups: dict[tuple[float, str], list[Table1Row]] = {}
    for row in rows:
        groups.setdefault((row.true_rho, row.prior), []).append(row)
    return [
        (rho, prior, float(np.mean([r.auroc for r in rs])), float(np.mean([r.scc_detection for r in rs])))
        for (rho, prior), rs in groups.items()
    ]
