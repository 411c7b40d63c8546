"""Posterior summaries of sampled graphs, convergence checks and benchmark metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graph import DirectedGraph, tarjan_scc


@dataclass
class EdgeProbabilityMatrix:
    """Posterior edge summaries.

    ``p_edge[i, j]`` is the fraction of samples with ``i -> j``;
    ``p_same_scc[i, j]`` the fraction placing ``i`` and ``j`` in one
    component; ``p_dag_edge[i, j]`` the fraction with ``i -> j`` between two
    different components.
    """

    n_nodes: int
    p_edge: np.ndarray
    p_same_scc: np.ndarray
    p_dag_edge: np.ndarray

    def to_csv(self, directory, prefix: str = "") -> None:
        from pathlib import Path

        d = Path(directory)
        for name in ("p_edge", "p_same_scc", "p_dag_edge"):
            write_matrix_csv(d / f"{prefix}{name}.csv", getattr(self, name))


def write_matrix_csv(path, mat: np.ndarray) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("i,j,value\n")
        n = mat.shape[0]
        for i in range(n):
            for j in range(n):
                if i != j:
                    fh.write(f"{i},{j},{format(float(mat[i, j]), '.17g')}\n")


def _as_stack(samples) -> np.ndarray:
    adj = getattr(samples, "adjacency", samples)
    if isinstance(adj, (list, tuple)):
        adj = [a.adjacency if isinstance(a, DirectedGraph) else a for a in adj]
    stack = np.asarray(adj, dtype=bool)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValueError(f"expected a (samples, n, n) adjacency stack, got shape {stack.shape}")
    return stack


def _unique_partitions(stack: np.ndarray):
    """Tarjan partitions for each distinct adjacency, plus the inverse index."""
    s, n, _ = stack.shape
    packed = np.packbits(stack.reshape(s, n * n), axis=1)
    uniq, first, inverse = np.unique(packed, axis=0, return_index=True, return_inverse=True)
    parts = [tarjan_scc(DirectedGraph(stack[k])) for k in first]
    return parts, np.asarray(inverse).reshape(-1)


def edge_probabilities(samples) -> EdgeProbabilityMatrix:
    stack = _as_stack(samples)
    s, n, _ = stack.shape
    if s == 0:
        raise ValueError("no samples")
    parts, inverse = _unique_partitions(stack)
    counts = np.bincount(inverse, minlength=len(parts))
    same = np.zeros((n, n))
    for part, c in zip(parts, counts):
        comp = np.asarray(part.component_of)
        same += c * (comp[:, None] == comp[None, :])
    np.fill_diagonal(same, 0.0)
    p_same = same / s

    p_edge = stack.mean(axis=0)
    dag_counts = np.zeros((n, n))
    for k, (part, c) in enumerate(zip(parts, counts)):
        comp = np.asarray(part.component_of)
        between = comp[:, None] != comp[None, :]
        dag_counts += between * stack[inverse == k].sum(axis=0)
    return EdgeProbabilityMatrix(n, p_edge, p_same, dag_counts / s)


def gelman_rubin(chains: Sequence) -> tuple[np.ndarray, float]:
    """Potential scale reduction factor per edge indicator.

    ``chains`` is a list of equally long indicator sequences, each either a
    ``(length, n, n)`` adjacency stack or a ``(length, k)`` array.  Edges that
    never vary within any chain get ``1`` when the chains agree and ``inf``
    otherwise.  On adjacency stacks the diagonal is reported as ``1``.
    """
    arrs = [np.asarray(getattr(c, "adjacency", c), dtype=float) for c in chains]
    if len(arrs) < 2:
        raise ValueError("need at least two chains")
    length = arrs[0].shape[0]
    if any(a.shape != arrs[0].shape for a in arrs):
        raise ValueError("all chains must have the same length and shape")
    if length < 10:
        raise ValueError("chains must hold at least 10 samples")
    x = np.stack(arrs)
    m = x.shape[0]
    means = x.mean(axis=1)
    B = length * means.var(axis=0, ddof=1)
    W = x.var(axis=1, ddof=1).mean(axis=0)
    V = (length - 1) / length * W + (m + 1) / (m * length) * B
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(V / W)
    rhat = np.where(W > 0, rhat, np.where(B > 0, np.inf, 1.0))
    return rhat, float(np.max(rhat))


def best_graph(samples) -> tuple[np.ndarray, float]:
    """Highest-scoring sample; ties go to the earliest one."""
    scores = np.asarray(samples.scores)
    if scores.size == 0:
        raise ValueError("no samples")
    k = int(np.argmax(scores))
    return np.asarray(samples.adjacency[k], dtype=bool), float(scores[k])


def auroc(scores, truth) -> float:
    """Area under the ROC curve over all off-diagonal ordered pairs.

    Pairs are ranked by decreasing score; the ROC curve steps through each
    distinct score threshold, so tied pairs enter together (the trapezoid
    over a tied block is the usual half-credit rule).
    """
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    if scores.shape != truth.shape:
        raise ValueError("score and truth matrices differ in shape")
    if scores.ndim == 2 and scores.shape[0] == scores.shape[1]:
        off = ~np.eye(scores.shape[0], dtype=bool)
        s, y = scores[off], truth[off]
    else:
        s, y = scores.ravel(), truth.ravel()
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one positive and one negative edge")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_block = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(y)[last_of_block]
    fp = np.cumsum(~y)[last_of_block]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def scc_detection_rate(samples, true_components: Iterable[Iterable[int]], mode: str = "exact") -> np.ndarray:
    """Fraction of samples that contain each true component.

    ``mode="exact"`` needs a sampled component with exactly the same node
    set; ``mode="superset"`` accepts any component containing it.
    """
    if mode not in ("exact", "superset"):
        raise ValueError("mode must be 'exact' or 'superset'")
    stack = _as_stack(samples)
    if stack.shape[0] == 0:
        raise ValueError("no samples")
    targets = [frozenset(c) for c in true_components]
    parts, inverse = _unique_partitions(stack)
    counts = np.bincount(inverse, minlength=len(parts))
    hits = np.zeros(len(targets))
    for part, c in zip(parts, counts):
        comps = [frozenset(x) for x in part.components]
        for t, target in enumerate(targets):
            if mode == "exact":
                found = target in comps
            else:
                found = any(target <= comp for comp in comps)
            if found:
                hits[t] += c
    return hits / stack.shape[0]


def diagnostics_report(values: dict) -> str:
    """Key-value text, one ``key=value`` per line."""
    lines = []
    for key, val in values.items():
        if isinstance(val, float):
            val = format(val, ".17g")
        lines.append(f"{key}={val}")
    return "\n".join(lines) + "\n"
