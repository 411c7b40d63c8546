"""Directed graphs, strongly connected components and condensation.

Graphs are dense boolean adjacency matrices: ``adjacency[i, j]`` is true iff
there is an edge ``i -> j``.  Self-loops are never allowed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

DEGREE_KINDS = ("in", "out", "total")


class GraphError(ValueError):
    """Raised on malformed graphs or invalid edge operations."""


class DirectedGraph:
    """Directed graph on nodes ``0..n_nodes-1`` without auto-cycles."""

    __slots__ = ("_adj",)

    def __init__(self, adjacency):
        adj = np.array(adjacency, dtype=bool, copy=True)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise GraphError(f"adjacency must be a non-empty square matrix, got shape {adj.shape}")
        if adj.diagonal().any():
            raise GraphError("self-loops (auto-cycles) are not allowed")
        adj.setflags(write=False)
        self._adj = adj

    @classmethod
    def empty(cls, n_nodes: int) -> "DirectedGraph":
        return cls(np.zeros((n_nodes, n_nodes), dtype=bool))

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[tuple[int, int]]) -> "DirectedGraph":
        adj = np.zeros((n_nodes, n_nodes), dtype=bool)
        for i, j in edges:
            if i == j:
                raise GraphError(f"self-loop {i} -> {j} is not allowed")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise GraphError(f"edge {i} -> {j} is outside a {n_nodes}-node graph")
            adj[i, j] = True
        return cls(adj)

    @property
    def n_nodes(self) -> int:
        return self._adj.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        """Read-only boolean adjacency matrix."""
        return self._adj

    @property
    def n_edges(self) -> int:
        return int(self._adj.sum())

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[i, j])

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self._adj))]

    def parents(self, j: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self._adj[:, j])]

    def children(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self._adj[i])]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return np.array_equal(self._adj, other._adj)

    def __hash__(self) -> int:
        return hash((self.n_nodes, np.packbits(self._adj).tobytes()))

    def __repr__(self) -> str:
        return f"DirectedGraph(n_nodes={self.n_nodes}, edges={self.edges()})"


def toggle_edge(g: DirectedGraph, i: int, j: int) -> DirectedGraph:
    """Return a copy of ``g`` with the edge ``i -> j`` flipped."""
    n = g.n_nodes
    if not (0 <= i < n and 0 <= j < n):
        raise GraphError(f"edge ({i}, {j}) out of range for {n} nodes")
    if i == j:
        raise GraphError(f"cannot toggle auto-cycle ({i}, {i})")
    adj = g.adjacency.copy()
    adj[i, j] = not adj[i, j]
    return DirectedGraph(adj)


@dataclass(frozen=True)
class SccPartition:
    """Partition of the nodes into strongly connected components.

    Components are sorted tuples, ordered by their smallest member.
    """

    components: tuple[tuple[int, ...], ...]
    component_of: tuple[int, ...]

    @classmethod
    def from_components(cls, components: Iterable[Iterable[int]]) -> "SccPartition":
        comps = sorted((tuple(sorted(c)) for c in components), key=lambda c: c[0])
        n = sum(len(c) for c in comps)
        component_of = [-1] * n
        for idx, comp in enumerate(comps):
            for v in comp:
                if v >= n or component_of[v] != -1:
                    raise GraphError("components must partition 0..n-1")
                component_of[v] = idx
        return cls(tuple(comps), tuple(component_of))

    @property
    def n_components(self) -> int:
        return len(self.components)

    def non_ordinary(self) -> list[tuple[int, ...]]:
        """Components with at least two members."""
        return [c for c in self.components if len(c) > 1]

    def same_component(self, i: int, j: int) -> bool:
        return self.component_of[i] == self.component_of[j]


@dataclass(frozen=True)
class CondensedGraph:
    """Acyclic graph over the components of an :class:`SccPartition`."""

    partition: SccPartition
    comp_adjacency: np.ndarray
    comp_parents: tuple[frozenset, ...]

    @property
    def n_components(self) -> int:
        return self.partition.n_components


def tarjan_components(nodes: Sequence[int], successors: Callable[[int], Iterable[int]]) -> list[list[int]]:
    """Tarjan's algorithm over an arbitrary node subset, without recursion.

    ``successors(v)`` must only yield members of ``nodes``.  Components are
    returned in reverse topological order (sinks first).
    """
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors(root)))]
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def tarjan_scc(g: DirectedGraph) -> SccPartition:
    """Strongly connected components of ``g`` in linear time."""
    adj = g.adjacency
    succ = [np.flatnonzero(adj[v]).tolist() for v in range(g.n_nodes)]
    comps = tarjan_components(range(g.n_nodes), succ.__getitem__)
    return SccPartition.from_components(comps)


def condense(g: DirectedGraph, partition: SccPartition | None = None) -> CondensedGraph:
    """Contract every strongly connected component of ``g`` to a single vertex."""
    if partition is None:
        partition = tarjan_scc(g)
    adj = g.adjacency
    ncomp = partition.n_components
    comp_of = np.asarray(partition.component_of)
    cadj = np.zeros((ncomp, ncomp), dtype=bool)
    src, dst = np.nonzero(adj)
    cs, cd = comp_of[src], comp_of[dst]
    external = cs != cd
    cadj[cs[external], cd[external]] = True
    parents = []
    for comp in partition.components:
        members = list(comp)
        incoming = np.flatnonzero(adj[:, members].any(axis=1))
        parents.append(frozenset(int(v) for v in incoming) - frozenset(members))
    cadj.setflags(write=False)
    return CondensedGraph(partition, cadj, tuple(parents))


def topological_order(adjacency: np.ndarray) -> list[int] | None:
    """Kahn's algorithm; returns ``None`` if the graph has a cycle."""
    adj = np.asarray(adjacency, dtype=bool)
    indeg = adj.sum(axis=0).astype(int)
    ready = [v for v in range(adj.shape[0]) if indeg[v] == 0]
    order = []
    while ready:
        v = ready.pop()
        order.append(v)
        for w in np.flatnonzero(adj[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(int(w))
    return order if len(order) == adj.shape[0] else None


def is_acyclic(g: DirectedGraph | np.ndarray) -> bool:
    adj = g.adjacency if isinstance(g, DirectedGraph) else g
    return topological_order(adj) is not None


def count_motifs(g: DirectedGraph) -> tuple[int, int]:
    """Count triangular motifs.

    Returns ``(n_feedforward, n_feedback)``.  A feed-forward loop is an
    ordered triple ``(a, b, c)`` with edges a->b, b->c and a->c; a feedback
    loop is a directed 3-cycle, counted once per cycle.
    """
    a = g.adjacency.astype(np.int64)
    a2 = a @ a
    n_ff = int((a2 * a).sum())
    n_fb = int(np.trace(a2 @ a)) // 3
    return n_ff, n_fb


def degrees(g: DirectedGraph) -> np.ndarray:
    """Per-node ``(in, out, total)`` degrees as an ``(n, 3)`` integer array."""
    a = g.adjacency
    d_in = a.sum(axis=0)
    d_out = a.sum(axis=1)
    return np.column_stack([d_in, d_out, d_in + d_out]).astype(np.int64)


def degree_vector(g: DirectedGraph, kind: str = "out") -> np.ndarray:
    if kind not in DEGREE_KINDS:
        raise GraphError(f"degree kind must be one of {DEGREE_KINDS}, got {kind!r}")
    return degrees(g)[:, DEGREE_KINDS.index(kind)]
