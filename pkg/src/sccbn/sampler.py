"""Metropolis-Hastings over directed graphs with incremental score updates.

Each step toggles one ordered pair ``(i, j)``.  Only the components whose
members or parent sets change are rescored:

* adding ``i -> j`` inside one SCC changes nothing but the prior;
* adding across components either enlarges the child's parent set, or,
  when ``j`` already reaches ``i``, merges every component on a ``j ~> i``
  path into one SCC whose evidence replaces theirs;
* deleting across components shrinks the child's parent set (if no other
  member still has ``i`` as a parent);
* deleting inside an SCC re-runs Tarjan on that SCC alone; if it splits,
  every piece is rescored, otherwise nothing changes.

Children of a changed component keep their parent *nodes*, so their
evidence is untouched.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .graph import DirectedGraph, SccPartition, condense, tarjan_components
from .priors import FORBIDDEN, REQUIRED, PriorConfig
from .score import ComponentScorer, DataMatrix, Hyperparams, graph_log_score

log = logging.getLogger(__name__)

NEG_INF = -math.inf
RNG_BATCH = 8192


class AuditError(RuntimeError):
    """Cached score drifted away from a from-scratch recomputation."""

    def __init__(self, iteration: int, cached: float, recomputed: float, chain_id=None):
        self.iteration = iteration
        self.cached = cached
        self.recomputed = recomputed
        self.chain_id = chain_id
        super().__init__(
            f"score audit failed (chain {chain_id}, iteration {iteration}): "
            f"cached {cached!r} vs recomputed {recomputed!r}"
        )

    def __reduce__(self):
        return (AuditError, (self.iteration, self.cached, self.recomputed, self.chain_id))


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _popcount(x: int) -> int:
    return bin(x).count("1")


class CachedScorer:
    """Memoises component evidences keyed by ``(members_mask, parents_mask)``."""

    def __init__(self, scorer: ComponentScorer, max_entries: int = 2_000_000):
        self.scorer = scorer
        self.cache: dict[tuple[int, int], float] = {}
        self.max_entries = max_entries
        self.hits = 0
        self.misses = 0

    def __call__(self, members: int, parents: int) -> float:
        key = (members, parents)
        val = self.cache.get(key)
        if val is not None:
            self.hits += 1
            return val
        self.misses += 1
        if len(self.cache) >= self.max_entries:
            self.cache.clear()
        val = self.scorer.log_ml(_bits(members), _bits(parents))
        self.cache[key] = val
        return val


@dataclass
class Move:
    """A proposed toggle and everything needed to apply it."""

    i: int
    j: int
    add: bool
    delta: float
    prior_delta: float
    removed: tuple = ()
    added: tuple = ()
    reparent: Optional[tuple] = None
    log_hastings: float = 0.0


class SamplerState:
    """Current graph plus cached per-component evidences and prior pieces."""

    def __init__(self, graph: DirectedGraph, scorer: CachedScorer, priors: PriorConfig):
        n = graph.n_nodes
        if scorer.scorer.n_nodes != n:
            raise ValueError(f"data has {scorer.scorer.n_nodes} columns but graph has {n} nodes")
        priors.check_size(n)
        self.n = n
        self.scorer = scorer
        self.priors = priors
        adj = graph.adjacency
        self.adj = np.array(adj, dtype=bool)
        self.pa = [sum(1 << int(i) for i in np.flatnonzero(adj[:, j])) for j in range(n)]
        self.ch = [sum(1 << int(j) for j in np.flatnonzero(adj[i])) for i in range(n)]
        self.outdeg = [int(x) for x in adj.sum(axis=1)]
        self.indeg = [int(x) for x in adj.sum(axis=0)]
        self.n_edges = int(adj.sum())

        self._setup_prior_tables()

        cg = condense(graph)
        self.comp_of = [0] * n
        self.members: dict[int, int] = {}
        self.comp_parents: dict[int, int] = {}
        self.comp_l: dict[int, float] = {}
        self.sizes: Counter = Counter()
        self._next_id = 0
        for comp, parents in zip(cg.partition.components, cg.comp_parents):
            mask = sum(1 << v for v in comp)
            pmask = sum(1 << v for v in parents)
            self._new_component(mask, pmask, scorer(mask, pmask))

        self.prior_base = self._prior_base_full(graph)
        self.loglik = math.fsum(self.comp_l.values())
        self.total_log_score = self.prior_base + self._scc_term(self.sizes) + self.loglik

    # -- priors -----------------------------------------------------------

    def _setup_prior_tables(self):
        p = self.priors
        n = self.n
        self.allow_sccs = p.allow_sccs
        self.max_scc = p.max_scc_size
        self.logodds = None
        if p.bernoulli is not None:
            e = p.bernoulli
            with np.errstate(divide="ignore"):
                lo = np.log(e) - np.log1p(-e)
            self.logodds = lo.tolist()
        self.concordance = p.concordance.tolist() if p.concordance is not None else None
        self.beta_c = p.concordance_beta
        self.degree_gamma = p.degree_gamma
        self.degree_kind = p.degree_kind
        self.log1p_table = [math.log1p(d) for d in range(2 * n + 2)]
        self.edge_lambda = p.edge_count_lambda
        self.log_edge_lambda = math.log(p.edge_count_lambda) if p.edge_count_lambda else 0.0
        self.motif = p.motif_weights

    def _prior_base_full(self, graph: DirectedGraph) -> float:
        """All prior terms except the SCC term (which depends on the partition)."""
        from .priors import (log_prior_bernoulli, log_prior_concordance, log_prior_degree,
                             log_prior_edge_count, log_prior_motif)

        p = self.priors
        total = 0.0
        if p.bernoulli is not None:
            total += log_prior_bernoulli(graph, p.bernoulli)
        if p.concordance is not None:
            total += log_prior_concordance(graph, p.concordance, p.concordance_beta)
        if p.degree_gamma is not None:
            total += log_prior_degree(graph, p.degree_gamma, p.degree_kind)
        if p.edge_count_lambda is not None:
            total += log_prior_edge_count(graph, p.edge_count_lambda)
        if p.motif_weights is not None:
            total += log_prior_motif(graph, *p.motif_weights)
        return total

    def _scc_term(self, sizes: Counter) -> float:
        p = self.priors
        n_big = 0
        sum_log = 0.0
        for s, c in sizes.items():
            if s > 1 and c > 0:
                if not self.allow_sccs:
                    return NEG_INF
                if self.max_scc is not None and s > self.max_scc:
                    return NEG_INF
                n_big += c
                sum_log += c * math.log(s)
        out = 0.0
        if p.scc_count_lambda is not None:
            lam = p.scc_count_lambda
            out += n_big * math.log(lam) - lam - math.lgamma(n_big + 1)
        if p.scc_size_gamma is not None:
            out -= p.scc_size_gamma * sum_log
        return out

    def _edge_prior_delta(self, i: int, j: int, add: bool) -> float:
        s = 1 if add else -1
        d = 0.0
        if self.logodds is not None:
            d += s * self.logodds[i][j]
        if self.concordance is not None:
            c = self.concordance[i][j]
            if c == REQUIRED:
                d += s * self.beta_c
            elif c == FORBIDDEN:
                d -= s * self.beta_c
        if self.degree_gamma is not None:
            t = self.log1p_table
            kind = self.degree_kind
            if kind == "out":
                do = self.outdeg[i]
                d -= self.degree_gamma * (t[do + s] - t[do])
            elif kind == "in":
                di = self.indeg[j]
                d -= self.degree_gamma * (t[di + s] - t[di])
            else:
                ti = self.outdeg[i] + self.indeg[i]
                tj = self.outdeg[j] + self.indeg[j]
                d -= self.degree_gamma * (t[ti + s] - t[ti] + t[tj + s] - t[tj])
        if self.edge_lambda is not None:
            e = self.n_edges
            if add:
                d += self.log_edge_lambda - math.log(e + 1)
            else:
                d += math.log(e) - self.log_edge_lambda
        if self.motif is not None:
            pa, ch = self.pa, self.ch
            n_ff = _popcount(ch[j] & ch[i]) + _popcount(pa[i] & pa[j]) + _popcount(ch[i] & pa[j])
            n_fb = _popcount(ch[j] & pa[i])
            d += s * (self.motif[0] * n_ff + self.motif[1] * n_fb)
        return d

    # -- structure --------------------------------------------------------

    def _new_component(self, mask: int, pmask: int, l: float) -> int:
        cid = self._next_id
        self._next_id += 1
        self.members[cid] = mask
        self.comp_parents[cid] = pmask
        self.comp_l[cid] = l
        self.sizes[_popcount(mask)] += 1
        for v in _bits(mask):
            self.comp_of[v] = cid
        return cid

    def _drop_component(self, cid: int) -> None:
        self.sizes[_popcount(self.members[cid])] -= 1
        del self.members[cid], self.comp_parents[cid], self.comp_l[cid]

    def _parents_of(self, mask: int, pa: list, skip: int = -1, skip_bit: int = 0) -> int:
        out = 0
        for v in _bits(mask):
            out |= pa[v] & ~skip_bit if v == skip else pa[v]
        return out & ~mask

    def _forward(self, start: int) -> int:
        ch = self.ch
        seen = 1 << start
        frontier = seen
        while frontier:
            nxt = 0
            for v in _bits(frontier):
                nxt |= ch[v]
            frontier = nxt & ~seen
            seen |= frontier
        return seen

    def _backward_within(self, start: int, allowed: int) -> int:
        pa = self.pa
        seen = 1 << start
        frontier = seen
        while frontier:
            nxt = 0
            for v in _bits(frontier):
                nxt |= pa[v]
            frontier = nxt & allowed & ~seen
            seen |= frontier
        return seen

    def _scc_delta(self, removed_sizes, added_sizes) -> float:
        old = self._scc_term(self.sizes)
        sizes = self.sizes.copy()
        for s in removed_sizes:
            sizes[s] -= 1
        for s in added_sizes:
            sizes[s] += 1
        return self._scc_term(sizes) - old

    def evaluate(self, i: int, j: int) -> Move:
        """Score change of toggling ``i -> j``; the state is not modified."""
        add = not (self.pa[j] >> i) & 1
        prior_delta = self._edge_prior_delta(i, j, add)
        ci, cj = self.comp_of[i], self.comp_of[j]
        score = self.scorer

        if add:
            if ci == cj:
                return Move(i, j, True, prior_delta, prior_delta)
            fwd = self._forward(j)
            if not (fwd >> i) & 1:
                old_p = self.comp_parents[cj]
                new_p = old_p | (1 << i)
                if new_p == old_p:
                    return Move(i, j, True, prior_delta, prior_delta)
                l_new = score(self.members[cj], new_p)
                return Move(i, j, True, prior_delta + (l_new - self.comp_l[cj]), prior_delta,
                            reparent=(cj, new_p, l_new))
            merged = fwd & self._backward_within(i, fwd)
            old_ids = {self.comp_of[v] for v in _bits(merged)}
            size = _popcount(merged)
            removed_sizes = [_popcount(self.members[c]) for c in old_ids]
            scc_d = self._scc_delta(removed_sizes, [size])
            if scc_d == NEG_INF:
                return Move(i, j, True, NEG_INF, prior_delta)
            pmask = self._parents_of(merged, self.pa)
            l_new = score(merged, pmask)
            l_old = sum(self.comp_l[c] for c in old_ids)
            return Move(i, j, True, prior_delta + scc_d + (l_new - l_old), prior_delta + scc_d,
                        removed=tuple(old_ids), added=((merged, pmask, l_new),))

        bit = 1 << i
        if ci != cj:
            old_p = self.comp_parents[cj]
            new_p = self._parents_of(self.members[cj], self.pa, j, bit)
            if new_p == old_p:
                return Move(i, j, False, prior_delta, prior_delta)
            l_new = score(self.members[cj], new_p)
            return Move(i, j, False, prior_delta + (l_new - self.comp_l[cj]), prior_delta,
                        reparent=(cj, new_p, l_new))

        cmask = self.members[cj]
        ch = self.ch
        jbit = 1 << j

        def succ(v):
            m = ch[v] & cmask
            if v == i:
                m &= ~jbit
            return _bits(m)

        pieces = tarjan_components(_bits(cmask), succ)
        if len(pieces) == 1:
            return Move(i, j, False, prior_delta, prior_delta)
        masks = [sum(1 << v for v in piece) for piece in pieces]
        scc_d = self._scc_delta([_popcount(cmask)], [_popcount(m) for m in masks])
        if scc_d == NEG_INF:
            return Move(i, j, False, NEG_INF, prior_delta)
        added = []
        l_new = 0.0
        for m in masks:
            pm = self._parents_of(m, self.pa, j, bit)
            lv = score(m, pm)
            l_new += lv
            added.append((m, pm, lv))
        return Move(i, j, False, prior_delta + scc_d + (l_new - self.comp_l[cj]), prior_delta + scc_d,
                    removed=(cj,), added=tuple(added))

    def apply(self, move: Move) -> None:
        i, j = move.i, move.j
        if move.add:
            self.pa[j] |= 1 << i
            self.ch[i] |= 1 << j
            self.outdeg[i] += 1
            self.indeg[j] += 1
            self.n_edges += 1
        else:
            self.pa[j] &= ~(1 << i)
            self.ch[i] &= ~(1 << j)
            self.outdeg[i] -= 1
            self.indeg[j] -= 1
            self.n_edges -= 1
        self.adj[i, j] = move.add
        if move.reparent is not None:
            cid, pmask, l_new = move.reparent
            self.loglik += l_new - self.comp_l[cid]
            self.comp_parents[cid] = pmask
            self.comp_l[cid] = l_new
        if move.removed or move.added:
            for cid in move.removed:
                self.loglik -= self.comp_l[cid]
                self._drop_component(cid)
            for mask, pmask, l_new in move.added:
                self._new_component(mask, pmask, l_new)
                self.loglik += l_new
        self.total_log_score += move.delta

    # -- views ------------------------------------------------------------

    def graph(self) -> DirectedGraph:
        return DirectedGraph(self.adj)

    def partition(self) -> SccPartition:
        return SccPartition.from_components(_bits(m) for m in self.members.values())

    def component_scores(self) -> list[tuple[tuple, tuple, float]]:
        out = [(tuple(_bits(self.members[c])), tuple(_bits(self.comp_parents[c])), self.comp_l[c])
               for c in self.members]
        return sorted(out)

    def recompute(self) -> float:
        """From-scratch score of the current graph (independent of the caches)."""
        return graph_log_score(self.graph(), None, self.priors, scorer=self.scorer.scorer)[0]

    def check(self, tol: float = 1e-6) -> None:
        full = self.recompute()
        if not abs(full - self.total_log_score) <= tol:
            raise AuditError(-1, self.total_log_score, full)


def propose(state: SamplerState, rng: np.random.Generator) -> tuple[int, int, str]:
    """Uniform ordered pair; the kind follows from the current adjacency."""
    n = state.n
    if n < 2:
        raise ValueError("need at least two nodes to propose an edge")
    r = int(rng.integers(n * (n - 1)))
    i, jj = divmod(r, n - 1)
    j = jj + (jj >= i)
    return i, j, ("delete" if state.adj[i, j] else "add")


def incremental_update(state: SamplerState, i: int, j: int) -> Move:
    return state.evaluate(i, j)


def mh_step(state: SamplerState, rng: np.random.Generator) -> bool:
    i, j, _ = propose(state, rng)
    move = state.evaluate(i, j)
    if accept(move.delta, rng.random()):
        state.apply(move)
        return True
    return False


def accept(log_ratio: float, u: float) -> bool:
    if log_ratio >= 0.0:
        return True
    if log_ratio == NEG_INF:
        return False
    return u < math.exp(log_ratio)


@dataclass
class SamplerConfig:
    n_iterations: int = 2_000_000
    burn_in: int = 1_000_000
    thinning: int = 100
    seed: int = 0
    initial_graph: Union[DirectedGraph, str, None] = "empty"
    allow_sccs: bool = True
    paranoid_check_every: Optional[int] = None
    proposal: str = "uniform"

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be positive")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("burn_in must be in [0, n_iterations)")
        if self.thinning < 1:
            raise ValueError("thinning must be positive")
        if self.n_iterations - self.burn_in < self.thinning:
            raise ValueError("no post-burn-in sample fits: need n_iterations - burn_in >= thinning")
        if self.proposal not in ("uniform", "bernoulli"):
            raise ValueError("proposal must be 'uniform' or 'bernoulli'")
        if self.paranoid_check_every is not None and self.paranoid_check_every < 1:
            raise ValueError("paranoid_check_every must be positive")

    @property
    def n_samples(self) -> int:
        return (self.n_iterations - self.burn_in) // self.thinning


@dataclass
class ChainOutput:
    n_nodes: int
    seed: int
    thinning: int
    burn_in: int
    iterations: np.ndarray
    scores: np.ndarray
    adjacency: np.ndarray
    acceptance_count: int = 0
    proposal_count: int = 0
    final_graph: Optional[DirectedGraph] = None
    final_score: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return self.acceptance_count / self.proposal_count if self.proposal_count else float("nan")

    def __len__(self) -> int:
        return len(self.iterations)

    def header(self) -> str:
        return f"# nodes={self.n_nodes} seed={self.seed} thin={self.thinning} burnin={self.burn_in}"

    def write(self, path) -> None:
        n2 = self.n_nodes * self.n_nodes
        with open(path, "w", newline="\n") as fh:
            fh.write(self.header() + "\n")
            flat = self.adjacency.reshape(len(self.iterations), n2).astype(np.uint8) + ord("0")
            for it, sc, row in zip(self.iterations, self.scores, flat):
                fh.write(f"{int(it)},{format_score(sc)},{row.tobytes().decode('ascii')}\n")


def format_score(x: float) -> str:
    return format(float(x), ".17g")


def read_chain(path) -> ChainOutput:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing chain header")
        meta = dict(tok.split("=", 1) for tok in header[1:].split())
        n = int(meta["nodes"])
        its, scores, adjs = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            it, sc, bits = line.split(",")
            if len(bits) != n * n:
                raise ValueError(f"{path}:{lineno}: expected {n * n} adjacency characters")
            its.append(int(it))
            scores.append(float(sc))
            adjs.append(np.frombuffer(bits.encode("ascii"), dtype=np.uint8) == ord("1"))
    adjacency = np.array(adjs, dtype=bool).reshape(len(its), n, n)
    return ChainOutput(n, int(meta["seed"]), int(meta["thin"]), int(meta["burnin"]),
                       np.array(its, dtype=np.int64), np.array(scores), adjacency)


class _BernoulliKernel:
    """Proposal weight ``E_ij`` for adding and ``1 - E_ij`` for deleting, with Hastings correction."""

    def __init__(self, state: SamplerState, edge_prob: np.ndarray):
        n = state.n
        self.n = n
        self.e = np.asarray(edge_prob, dtype=float)
        off = ~np.eye(n, dtype=bool)
        self.pairs = np.argwhere(off)
        self.w = np.where(state.adj[off], 1.0 - self.e[off], self.e[off])
        self.index = {(int(a), int(b)): k for k, (a, b) in enumerate(self.pairs)}

    def draw(self, u: float) -> tuple[int, int, float]:
        cw = np.cumsum(self.w)
        total = cw[-1]
        k = int(np.searchsorted(cw, u * total, side="right"))
        k = min(k, len(cw) - 1)
        i, j = (int(x) for x in self.pairs[k])
        w = self.w[k]
        total_after = total - w + (1.0 - w)
        return i, j, math.log((1.0 - w) / total_after) - math.log(w / total)

    def toggled(self, i: int, j: int) -> None:
        k = self.index[(i, j)]
        self.w[k] = 1.0 - self.w[k]


def _initial_graph(cfg: SamplerConfig, n: int) -> DirectedGraph:
    g = cfg.initial_graph
    if g is None or (isinstance(g, str) and g == "empty"):
        return DirectedGraph.empty(n)
    if isinstance(g, DirectedGraph):
        return g
    return DirectedGraph(g)


def run_chain(
    cfg: SamplerConfig,
    data: DataMatrix | np.ndarray,
    priors: Optional[PriorConfig] = None,
    hyper: Optional[Hyperparams] = None,
    chain_id=None,
    scorer: Optional[ComponentScorer] = None,
) -> ChainOutput:
    """Run one seeded chain and collect every ``thinning``-th post-burn-in state."""
    priors = priors if priors is not None else PriorConfig()
    hyper = hyper if hyper is not None else Hyperparams()
    if not cfg.allow_sccs and priors.allow_sccs:
        priors = PriorConfig(**{**priors.__dict__, "allow_sccs": False})
    if scorer is None:
        scorer = ComponentScorer(data, hyper)
    n = scorer.n_nodes
    if n < 2:
        raise ValueError("need at least two nodes")
    state = SamplerState(_initial_graph(cfg, n), CachedScorer(scorer), priors)
    if state.total_log_score == NEG_INF:
        raise ValueError("initial graph has zero posterior mass (violates a hard constraint)")

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    kernel = None
    if cfg.proposal == "bernoulli":
        edge_prob = priors.bernoulli if priors.bernoulli is not None else np.full((n, n), 0.5)
        kernel = _BernoulliKernel(state, edge_prob)

    n_samples = cfg.n_samples
    iterations = np.empty(n_samples, dtype=np.int64)
    scores = np.empty(n_samples)
    adjacency = np.empty((n_samples, n, n), dtype=bool)
    n_pairs = n * (n - 1)
    accepted = 0
    rec = 0
    burn_in, thin, audit_every = cfg.burn_in, cfg.thinning, cfg.paranoid_check_every
    evaluate, apply_move = state.evaluate, state.apply
    exp = math.exp

    t = 0
    total = cfg.n_iterations
    while t < total:
        batch = min(RNG_BATCH, total - t)
        picks = rng.integers(n_pairs, size=batch).tolist()
        uniforms = rng.random(batch).tolist()
        extra_u = rng.random(batch).tolist() if kernel is not None else None
        for b in range(batch):
            t += 1
            if kernel is None:
                i, jj = divmod(picks[b], n - 1)
                j = jj + (jj >= i)
                move = evaluate(i, j)
                ratio = move.delta
            else:
                i, j, log_h = kernel.draw(extra_u[b])
                move = evaluate(i, j)
                ratio = move.delta + log_h
            if ratio >= 0.0 or (ratio != NEG_INF and uniforms[b] < exp(ratio)):
                apply_move(move)
                accepted += 1
                if kernel is not None:
                    kernel.toggled(i, j)
            if t > burn_in and (t - burn_in) % thin == 0:
                iterations[rec] = t
                scores[rec] = state.total_log_score
                adjacency[rec] = state.adj
                rec += 1
            if audit_every is not None and t % audit_every == 0:
                full = state.recompute()
                if not abs(full - state.total_log_score) <= 1e-6:
                    raise AuditError(t, state.total_log_score, full, chain_id)

    log.debug("chain %s: acceptance %d/%d, cache hits %d misses %d",
              chain_id, accepted, total, state.scorer.hits, state.scorer.misses)
    return ChainOutput(
        n_nodes=n, seed=cfg.seed, thinning=thin, burn_in=burn_in,
        iterations=iterations, scores=scores, adjacency=adjacency,
        acceptance_count=accepted, proposal_count=total,
        final_graph=state.graph(), final_score=state.total_log_score,
    )
