"""Command-line interface: ``sccbn simulate | infer | score | bench-d | bench-table1``.

Exit status is 0 on success, 1 on a configuration or input error and 2
when the sampler's score audit fails.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bench
from .analysis import best_graph, diagnostics_report, edge_probabilities, gelman_rubin
from .config import ENV_OUTPUT_DIR, ConfigError, RunConfig, emit_config, parse_config
from .graph import DirectedGraph, tarjan_scc
from .priors import PriorConfig, PriorConfigError, log_prior_total
from .sampler import AuditError, ChainOutput, SamplerConfig, format_score, run_chain
from .score import DataMatrix, Hyperparams, graph_log_score
from .simulate import (
    GenerativeSpec,
    SimulationError,
    fig5_spec,
    gen_mvn_block,
    read_graph,
    simulate_linear_gaussian,
    table1_spec,
    vstructure_spec,
    write_truth,
)

log = logging.getLogger("sccbn")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_AUDIT = 2


class UsageError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format_score(x)


def _parse_floats(text: str) -> list[float]:
    """``"0.1,0.2"`` or a range ``"start:stop:step"`` (stop included)."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise UsageError("range step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _output_dir(arg: Optional[str], default: str = ".") -> Path:
    out = Path(arg or os.environ.get(ENV_OUTPUT_DIR) or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- simulate ---------------------------------------------------------------

def _complete_graph(m: int) -> DirectedGraph:
    adj = ~np.eye(m, dtype=bool)
    return DirectedGraph(adj)


def cmd_simulate(args) -> int:
    out = _output_dir(args.out)
    seed = args.seed
    if args.preset is not None and args.nodes is not None:
        raise UsageError("give either --preset or --nodes, not both")
    names = None
    if args.preset in ("fig2", "fig3"):
        m = args.m
        rho = 0.9 if args.rho is None else args.rho
        n = args.n_samples or 10_000
        data = gen_mvn_block(n, m, 1.0, rho, seed)
        truth = _complete_graph(m)
    elif args.preset == "fig5":
        spec = fig5_spec(rho=0.9 if args.rho is None else args.rho, n_samples=args.n_samples or 100)
        data, truth, names = simulate_linear_gaussian(spec, seed), spec.graph, spec.names
    elif args.preset == "vstructure":
        spec = vstructure_spec(n_samples=args.n_samples or 100)
        data, truth, names = simulate_linear_gaussian(spec, seed), spec.graph, spec.names
    elif args.preset == "table1":
        rho = 0.9 if args.rho is None else args.rho
        scale = bench.Table1Scale.full()
        spec, _ = table1_spec(scale.n_nodes, scale.n_sccs, scale.scc_size, rho, scale.p_edge,
                              args.n_samples or scale.n_samples, seed=seed)
        data, truth = simulate_linear_gaussian(spec, seed), spec.graph
    elif args.nodes is not None:
        if args.edges in (None, "none"):
            truth = DirectedGraph.empty(args.nodes)
        else:
            truth = read_graph(args.edges, args.nodes)
        spec = GenerativeSpec(truth, 1.0, 0.9 if args.rho is None else args.rho, 1.0, {},
                              args.n_samples or 100)
        data = simulate_linear_gaussian(spec, seed)
    else:
        raise UsageError("simulate needs --preset or --nodes")
    if names is not None:
        data = DataMatrix(data.values, names)
    data.to_csv(out / "data.csv")
    write_truth(truth, out / "truth_graph.txt", out / "truth_sccs.txt", names)
    print(f"seed={seed}")
    print(f"wrote {out / 'data.csv'} ({data.n_rows} rows, {data.n_cols} columns)")
    return EXIT_OK


# -- infer ------------------------------------------------------------------

def _chain_task(args):
    sampler_cfg, values, priors, hyper, chain_id = args
    return run_chain(sampler_cfg, values, priors, hyper, chain_id=chain_id)


def run_inference(cfg: RunConfig) -> tuple[list[ChainOutput], dict]:
    """Run every chain of ``cfg`` and write all result files; returns the chains and diagnostics."""
    data = DataMatrix.from_csv(cfg.data_path)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = cfg.sampler
    seeds = [base.seed + k for k in range(cfg.n_chains)]
    tasks = []
    for k, s in enumerate(seeds):
        sc = SamplerConfig(**{**base.__dict__, "seed": s})
        tasks.append((sc, data.values, cfg.priors, cfg.hyper, k))
    chains = bench.map_workers(_chain_task, tasks, cfg.workers)

    for k, chain in enumerate(chains):
        chain.write(out_dir / f"chain_{k}.txt")
    pooled = np.concatenate([c.adjacency for c in chains])
    probs = edge_probabilities(pooled)
    probs.to_csv(out_dir)

    best_k = int(np.argmax([best_graph(c)[1] for c in chains]))
    adj, score = best_graph(chains[best_k])
    write_truth(DirectedGraph(adj), out_dir / "best_graph.txt", names=data.names)

    diag = {
        "config_hash": cfg.config_hash(),
        "n_chains": cfg.n_chains,
        "seeds": ",".join(str(s) for s in seeds),
        "samples_per_chain": len(chains[0]),
        "best_score": score,
        "best_chain": best_k,
    }
    for k, chain in enumerate(chains):
        diag[f"acceptance_rate_{k}"] = chain.acceptance_rate
    if cfg.n_chains >= 2 and len(chains[0]) >= 10:
        _, max_rhat = gelman_rubin(chains)
        diag["max_rhat"] = max_rhat
    (out_dir / "diagnostics.txt").write_text(diagnostics_report(diag))
    (out_dir / "effective_config.txt").write_text(emit_config(cfg))
    return chains, diag


def cmd_infer(args) -> int:
    cfg = parse_config(args.config)
    if args.output_dir:
        cfg.output_dir = Path(args.output_dir)
    print(f"config_hash={cfg.config_hash()} seeds={','.join(str(cfg.sampler.seed + k) for k in range(cfg.n_chains))}")
    _, diag = run_inference(cfg)
    for key in ("best_score", "max_rhat"):
        if key in diag:
            print(f"{key}={_fmt(diag[key])}")
    print(f"results in {cfg.output_dir}")
    return EXIT_OK


# -- score ------------------------------------------------------------------

def cmd_score(args) -> int:
    if args.config:
        cfg = parse_config(args.config)
        priors, hyper = cfg.priors, cfg.hyper
        data_path = args.data or cfg.data_path
    else:
        if not args.data:
            raise UsageError("score needs --data or --config")
        priors, hyper, data_path = PriorConfig(), Hyperparams(), args.data
    data = DataMatrix.from_csv(data_path)
    g = read_graph(args.graph)
    if g.n_nodes != data.n_cols:
        raise UsageError(f"graph has {g.n_nodes} nodes but data has {data.n_cols} columns")
    total, comps = graph_log_score(g, data, priors, hyper)
    print(f"total={_fmt(total)}")
    print(f"log_prior={_fmt(log_prior_total(g, tarjan_scc(g), priors))}")
    for c in comps:
        members = ",".join(data.names[v] for v in c.member_nodes)
        parents = ",".join(data.names[v] for v in c.parent_nodes)
        print(f"component={{{members}}} parents={{{parents}}} log_ml={_fmt(c.log_ml)}")
    return EXIT_OK


# -- bench-d ----------------------------------------------------------------

def cmd_bench_d(args) -> int:
    if args.preset == "fig3":
        hyper = bench.FIG3_HYPER
    else:
        hyper = Hyperparams()
    overrides = {k: v for k, v in (("q_offset", args.q_offset), ("kappa_offdiag", args.kappa_offdiag),
                                   ("mean_correlation", args.mean_correlation)) if v is not None}
    if overrides:
        hyper = Hyperparams(**{**hyper.__dict__, **overrides})
    ms = _parse_ints(args.m)
    rhos = _parse_floats(args.rho)
    try:
        rows = bench.d_curve(ms, rhos, args.n, hyper, args.seed)
    except SimulationError as exc:
        raise UsageError(str(exc)) from None
    digest = hashlib.sha256(repr(sorted(hyper.__dict__.items())).encode()).hexdigest()[:12]
    lines = ["m,rho,d_over_n,seed,config_hash"]
    lines += [f"{m},{_fmt(r)},{_fmt(d)},{args.seed},{digest}" for m, r, d in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"seed={args.seed} wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- bench-table1 -----------------------------------------------------------

def cmd_bench_table1(args) -> int:
    scale = bench.Table1Scale.full() if args.full_scale else bench.Table1Scale()
    changes = {k: v for k, v in (("n_nodes", args.nodes), ("n_sccs", args.sccs),
                                 ("replicates", args.replicates), ("n_iterations", args.iterations)) if v is not None}
    scale = bench.Table1Scale(**{**scale.__dict__, **changes})
    priors = list(bench.TABLE1_PRIORS) if args.priors == "all" else [p.strip() for p in args.priors.split("|")]
    rhos = _parse_floats(args.rho)
    workers = args.workers or bench.default_workers()
    try:
        rows = bench.table1_batch(scale, rhos, priors, args.seed, workers)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    out = _output_dir(args.out, "table1_results")
    digest = hashlib.sha256(repr(scale).encode()).hexdigest()[:12]
    with open(out / "replicates.csv", "w", newline="\n") as fh:
        fh.write("replicate,seed,true_rho,prior,auroc,scc_detection,config_hash\n")
        for r in rows:
            fh.write(f"{r.replicate},{r.seed},{_fmt(r.true_rho)},{r.prior},{_fmt(r.auroc)},"
                     f"{_fmt(r.scc_detection)},{digest}\n")
    summary = bench.table1_summary(rows)
    with open(out / "summary.csv", "w", newline="\n") as fh:
        fh.write("true_correlation,prior,auroc,scc_pr,seed,config_hash\n")
        for rho, prior, au, det in summary:
            fh.write(f"{_fmt(rho)},{prior},{_fmt(au)},{_fmt(det)},{args.seed},{digest}\n")
    print(f"seed={args.seed}")
    print(f"{'True correlation':>16}  {'Prior':<18} {'AUROC':>6} {'SCC Pr':>7}")
    for rho, prior, au, det in summary:
        print(f"{rho:>16.2f}  {prior:<18} {au:>6.2f} {det:>7.2f}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sccbn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a dataset and its true graph")
    p.add_argument("--preset", choices=["fig2", "fig3", "fig5", "vstructure", "table1"])
    p.add_argument("--nodes", type=int, help="number of nodes for a custom graph")
    p.add_argument("--edges", help="edge-list file for the custom graph, or 'none'")
    p.add_argument("--rho", type=float, help="within-SCC correlation")
    p.add_argument("--m", type=int, default=3, help="block size for fig2/fig3")
    p.add_argument("--n-samples", type=int, help="rows to generate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default: current directory)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="run MCMC chains from a configuration file")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("score", help="log score of one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--data")
    p.add_argument("--config")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench-d", help="SCC-versus-DAG score difference over a correlation grid")
    p.add_argument("--preset", choices=["fig2", "fig3"], default="fig2")
    p.add_argument("--m", default="2,3,5")
    p.add_argument("--rho", default="0.05:0.95:0.05")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--q-offset", type=float)
    p.add_argument("--kappa-offdiag", type=float)
    p.add_argument("--mean-correlation", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_d)

    p = sub.add_parser("bench-table1", help="AUROC and SCC detection on random graphs")
    p.add_argument("--full-scale", action="store_true", help="50 nodes, 2 SCCs, 100 replicates, 2e7 iterations")
    p.add_argument("--nodes", type=int)
    p.add_argument("--sccs", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--rho", default="0.9", help="true correlations, comma separated")
    p.add_argument("--priors", default="all", help="'all' or labels separated by '|'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_table1)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (ConfigError, UsageError, PriorConfigError, SimulationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
