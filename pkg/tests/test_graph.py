import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import closure_partition
from sccbn.graph import (
    DirectedGraph,
    GraphError,
    SccPartition,
    condense,
    count_motifs,
    degree_vector,
    degrees,
    is_acyclic,
    tarjan_scc,
    toggle_edge,
    topological_order,
)
from sccbn.simulate import fig1_graph


@st.composite
def graphs(draw, max_nodes=9):
    n = draw(st.integers(1, max_nodes))
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    adj = np.array(bits, dtype=bool).reshape(n, n)
    np.fill_diagonal(adj, False)
    return DirectedGraph(adj)


def test_graph_rejects_self_loops_and_non_square():
    adj = np.zeros((3, 3), dtype=bool)
    adj[1, 1] = True
    with pytest.raises(GraphError):
        DirectedGraph(adj)
    with pytest.raises(GraphError):
        DirectedGraph(np.zeros((2, 3), dtype=bool))


def test_adjacency_is_read_only():
    g = DirectedGraph.from_edges(3, [(0, 1)])
    with pytest.raises(ValueError):
        g.adjacency[0, 2] = True


def test_toggle_edge_adds_then_removes():
    g = DirectedGraph.empty(3)
    g1 = toggle_edge(g, 0, 2)
    assert g1.has_edge(0, 2) and not g.has_edge(0, 2)
    assert toggle_edge(g1, 0, 2) == g
    with pytest.raises(GraphError):
        toggle_edge(g, 1, 1)
    with pytest.raises(GraphError):
        toggle_edge(g, 0, 3)


def test_parents_children_and_edges():
    g = DirectedGraph.from_edges(4, [(0, 1), (2, 1), (1, 3)])
    assert list(g.parents(1)) == [0, 2]
    assert list(g.children(1)) == [3]
    assert sorted(g.edges()) == [(0, 1), (1, 3), (2, 1)]
    assert g.n_edges == 3


def test_fig1_graph_has_three_components():
    part = tarjan_scc(fig1_graph())
    assert part.components == ((0,), (1, 2, 3), (4,))
    cg = condense(fig1_graph(), part)
    assert cg.comp_parents == (frozenset(), frozenset({0}), frozenset({3}))
    assert cg.comp_adjacency.tolist() == [[False, True, False], [False, False, True], [False, False, False]]


def test_two_cycle_and_empty_graph():
    assert tarjan_scc(DirectedGraph.from_edges(2, [(0, 1), (1, 0)])).components == ((0, 1),)
    assert tarjan_scc(DirectedGraph.empty(4)).components == ((0,), (1,), (2,), (3,))


def test_long_path_does_not_hit_recursion_limit():
    n = 5000
    g = DirectedGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)] + [(n - 1, 0)])
    assert len(tarjan_scc(g).components) == 1


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_tarjan_matches_transitive_closure(g):
    part = tarjan_scc(g)
    assert {frozenset(c) for c in part.components} == closure_partition(g)


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_condensation_is_acyclic_and_consistent(g):
    cg = condense(g)
    assert is_acyclic(cg.comp_adjacency)
    comp_of = np.asarray(cg.partition.component_of)
    for s, members in enumerate(cg.partition.components):
        expected = {int(p) for v in members for p in g.parents(v) if comp_of[p] != s}
        assert cg.comp_parents[s] == frozenset(expected)
    for i, j in g.edges():
        a, b = comp_of[i], comp_of[j]
        assert a == b or cg.comp_adjacency[a, b]


@settings(max_examples=100, deadline=None)
@given(graphs(max_nodes=7))
def test_partition_is_invariant_under_relabelling(g):
    n = g.n_nodes
    perm = np.random.default_rng(n).permutation(n)
    adj = np.zeros_like(g.adjacency)
    adj[np.ix_(perm, perm)] = g.adjacency
    relabelled = tarjan_scc(DirectedGraph(adj))
    mapped = {frozenset(int(perm[v]) for v in c) for c in tarjan_scc(g).components}
    assert {frozenset(c) for c in relabelled.components} == mapped


def test_topological_order_detects_cycles():
    assert topological_order(DirectedGraph.from_edges(3, [(0, 1), (1, 2)]).adjacency) == [0, 1, 2]
    assert topological_order(DirectedGraph.from_edges(3, [(0, 1), (1, 0)]).adjacency) is None


def brute_force_motifs(adj):
    n = adj.shape[0]
    ff = sum(adj[i, j] and adj[j, k] and adj[i, k] for i, j, k in itertools.permutations(range(n), 3))
    fb = sum(adj[i, j] and adj[j, k] and adj[k, i] for i, j, k in itertools.permutations(range(n), 3)) // 3
    return ff, fb


@settings(max_examples=100, deadline=None)
@given(graphs(max_nodes=6))
def test_motif_counts_match_enumeration(g):
    assert count_motifs(g) == brute_force_motifs(g.adjacency)


def test_motif_examples():
    assert count_motifs(DirectedGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])) == (1, 0)
    assert count_motifs(DirectedGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])) == (0, 1)


def test_degrees():
    g = DirectedGraph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
    d = degrees(g)
    assert d[:, 0].tolist() == [0, 1, 2]
    assert d[:, 1].tolist() == [2, 1, 0]
    assert degree_vector(g, "total").tolist() == [2, 2, 2]
    with pytest.raises(ValueError):
        degree_vector(g, "sideways")


def test_partition_lookup():
    part = SccPartition.from_components([(2, 0), (1,)])
    assert part.components == ((0, 2), (1,))
    assert part.same_component(0, 2) and not part.same_component(0, 1)
    assert part.non_ordinary() == [(0, 2)]
