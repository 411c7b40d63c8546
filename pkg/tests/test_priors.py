import math

import numpy as np
import pytest
from scipy import stats

from sccbn.graph import DirectedGraph, tarjan_scc
from sccbn.priors import (
    FORBIDDEN,
    REQUIRED,
    PriorConfig,
    PriorConfigError,
    log_prior_bernoulli,
    log_prior_concordance,
    log_prior_degree,
    log_prior_edge_count,
    log_prior_motif,
    log_prior_scc,
    log_prior_total,
)


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    return DirectedGraph(adj)


def test_bernoulli_matches_pairwise_product():
    g = random_graph(5, 0.4, 1)
    e = np.random.default_rng(2).uniform(0.05, 0.95, (5, 5))
    expected = sum(
        math.log(e[i, j]) if g.has_edge(i, j) else math.log(1 - e[i, j])
        for i in range(5) for j in range(5) if i != j
    )
    assert log_prior_bernoulli(g, e) == pytest.approx(expected, abs=1e-12)


def test_uniform_bernoulli_is_constant_across_graphs():
    e = np.full((4, 4), 0.5)
    vals = {round(log_prior_bernoulli(random_graph(4, 0.5, s), e), 12) for s in range(10)}
    assert len(vals) == 1


def test_concordance_counts_disagreements():
    req = np.zeros((3, 3), dtype=int)
    req[0, 1] = REQUIRED
    req[1, 2] = FORBIDDEN
    g = DirectedGraph.from_edges(3, [(1, 2)])
    assert log_prior_concordance(g, req, 2.0) == -4.0
    assert log_prior_concordance(DirectedGraph.from_edges(3, [(0, 1)]), req, 2.0) == 0.0


def test_degree_power_law():
    g = DirectedGraph.from_edges(3, [(0, 1), (0, 2)])
    assert log_prior_degree(g, 3.0, "out") == pytest.approx(-3.0 * math.log(3.0))
    assert log_prior_degree(g, 1.0, "in") == pytest.approx(-2.0 * math.log(2.0))


def test_edge_count_is_poisson():
    for k in range(6):
        g = DirectedGraph.from_edges(4, [(0, j) for j in range(1, 4)][:k] + [(1, 2), (2, 3)][: max(0, k - 3)])
        assert log_prior_edge_count(g, 2.5) == pytest.approx(stats.poisson.logpmf(g.n_edges, 2.5), abs=1e-12)


def test_motif_prior():
    g = DirectedGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert log_prior_motif(g, 0.7, -1.0) == pytest.approx(0.7)


def test_scc_prior_poisson_and_size():
    g = DirectedGraph.from_edges(6, [(0, 1), (1, 0), (2, 3), (3, 4), (4, 2)])
    part = tarjan_scc(g)
    expected = stats.poisson.logpmf(2, 1.5) - 0.5 * (math.log(2) + math.log(3))
    assert log_prior_scc(part, lam=1.5, gamma=0.5) == pytest.approx(expected, abs=1e-12)


def test_scc_hard_constraints():
    cyc = tarjan_scc(DirectedGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)]))
    assert log_prior_scc(cyc, max_size=2) == -math.inf
    assert log_prior_scc(cyc, max_size=3) == 0.0
    assert log_prior_scc(cyc, allow_sccs=False) == -math.inf
    assert log_prior_scc(tarjan_scc(DirectedGraph.empty(3)), allow_sccs=False) == 0.0


def test_total_is_sum_of_active_terms():
    g = random_graph(5, 0.3, 4)
    e = np.full((5, 5), 0.2)
    cfg = PriorConfig(bernoulli=e, degree_gamma=2.0, edge_count_lambda=3.0, motif_weights=(0.1, 0.2))
    part = tarjan_scc(g)
    expected = (
        log_prior_bernoulli(g, e)
        + log_prior_degree(g, 2.0, "out")
        + log_prior_edge_count(g, 3.0)
        + log_prior_motif(g, 0.1, 0.2)
    )
    assert log_prior_total(g, part, cfg) == pytest.approx(expected, abs=1e-12)
    assert log_prior_total(g, part, PriorConfig()) == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"bernoulli": np.full((3, 3), 1.0)},
        {"bernoulli": np.zeros(3)},
        {"concordance": np.full((2, 2), 2)},
        {"degree_gamma": 0.0},
        {"edge_count_lambda": -1.0},
        {"degree_kind": "sideways"},
        {"max_scc_size": 0},
    ],
)
def test_invalid_configs_are_rejected(kwargs):
    with pytest.raises(PriorConfigError):
        PriorConfig(**kwargs)


def test_matrix_size_mismatch():
    cfg = PriorConfig(bernoulli=np.full((3, 3), 0.5))
    with pytest.raises(PriorConfigError):
        cfg.check_size(4)
