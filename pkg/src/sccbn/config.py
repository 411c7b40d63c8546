"""Run configuration: a flat file of ``section.key = value`` lines.

Schema (every key is optional unless noted)::

    run.data_path        CSV of observations (required)
    run.output_dir       where results go (default: ./results)
    run.n_chains         number of independent chains (default 2)
    run.workers          concurrent worker processes (default 1)

    sampler.n_iterations, sampler.burn_in, sampler.thinning, sampler.seed
    sampler.initial_graph   "empty" or an edge-list file
    sampler.allow_sccs      true / false
    sampler.paranoid_check_every
    sampler.proposal        uniform / bernoulli

    prior.bernoulli         a probability for every pair, or an N x N CSV file
    prior.concordance       N x N CSV file of 1 / -1 / 0
    prior.concordance_beta, prior.degree_gamma, prior.degree_kind,
    prior.edge_count_lambda, prior.motif_ff, prior.motif_fb,
    prior.scc_count_lambda, prior.scc_size_gamma, prior.max_scc_size,
    prior.allow_sccs

    hyper.q_offset, hyper.kappa_diag, hyper.kappa_offdiag,
    hyper.mean_correlation, hyper.variance_scaling, hyper.tau, hyper.q_ordinary

Blank lines and lines starting with ``#`` are ignored.  Relative paths are
resolved against the directory holding the configuration file.  The
environment variables ``SCCBN_OUTPUT_DIR`` and ``SCCBN_WORKERS`` override
``run.output_dir`` and ``run.workers``.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .priors import PriorConfig, PriorConfigError
from .sampler import SamplerConfig
from .score import Hyperparams
from .simulate import read_graph

ENV_OUTPUT_DIR = "SCCBN_OUTPUT_DIR"
ENV_WORKERS = "SCCBN_WORKERS"


class ConfigError(ValueError):
    """Invalid configuration; ``lineno`` points at the offending line when known."""

    def __init__(self, message: str, lineno: Optional[int] = None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        elif lineno is not None:
            where = f"line {lineno}: "
        super().__init__(where + message)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _optional(conv):
    def parse(text: str):
        if text.strip().lower() in ("none", ""):
            return None
        return conv(text)
    return parse


def _int(text: str) -> int:
    val = float(text)
    if val != int(val):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(val)


RUN_KEYS = {"data_path": str, "output_dir": str, "n_chains": _int, "workers": _int}
SAMPLER_KEYS = {
    "n_iterations": _int,
    "burn_in": _int,
    "thinning": _int,
    "seed": _int,
    "initial_graph": str,
    "allow_sccs": _parse_bool,
    "paranoid_check_every": _optional(_int),
    "proposal": str,
}
PRIOR_SCALARS = {
    "concordance_beta": float,
    "degree_gamma": _optional(float),
    "degree_kind": str,
    "edge_count_lambda": _optional(float),
    "motif_ff": _optional(float),
    "motif_fb": _optional(float),
    "scc_count_lambda": _optional(float),
    "scc_size_gamma": _optional(float),
    "max_scc_size": _optional(_int),
    "allow_sccs": _parse_bool,
}
PRIOR_MATRICES = ("bernoulli", "concordance")
HYPER_KEYS = {
    "q_offset": float,
    "kappa_diag": float,
    "kappa_offdiag": float,
    "mean_correlation": _optional(float),
    "variance_scaling": _parse_bool,
    "tau": _optional(float),
    "q_ordinary": _optional(float),
}


def read_matrix_csv(path, n_nodes: int) -> np.ndarray:
    """Dense ``n_nodes x n_nodes`` numeric CSV, no header."""
    mat = np.loadtxt(path, delimiter=",", ndmin=2)
    if mat.shape != (n_nodes, n_nodes):
        raise ValueError(f"{path}: expected a {n_nodes}x{n_nodes} matrix, got {mat.shape}")
    return mat


def data_n_columns(path) -> int:
    with open(path) as fh:
        header = fh.readline().strip()
    if not header:
        raise ValueError(f"{path}: empty data file")
    return len(header.split(","))


@dataclass
class RunConfig:
    data_path: Path
    output_dir: Path = Path("results")
    priors: PriorConfig = field(default_factory=PriorConfig)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    n_chains: int = 2
    workers: int = 1
    # How matrix priors and the initial graph were given, kept for re-emitting.
    sources: dict = field(default_factory=dict)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunConfig):
            return NotImplemented
        return emit_config(self) == emit_config(other)

    def config_hash(self) -> str:
        return hashlib.sha256(emit_config(self).encode()).hexdigest()[:12]


def _fmt(val) -> str:
    if val is None:
        return "none"
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return format(val, ".17g")
    return str(val)


def emit_config(cfg: RunConfig) -> str:
    """Effective configuration as text; parsing it gives back an equal ``RunConfig``."""
    lines = [
        f"run.data_path = {Path(cfg.data_path).resolve()}",
        f"run.output_dir = {Path(cfg.output_dir).resolve()}",
        f"run.n_chains = {cfg.n_chains}",
        f"run.workers = {cfg.workers}",
    ]
    s = cfg.sampler
    init = cfg.sources.get("initial_graph", "empty")
    lines += [
        f"sampler.n_iterations = {s.n_iterations}",
        f"sampler.burn_in = {s.burn_in}",
        f"sampler.thinning = {s.thinning}",
        f"sampler.seed = {s.seed}",
        f"sampler.initial_graph = {init}",
        f"sampler.allow_sccs = {_fmt(s.allow_sccs)}",
        f"sampler.paranoid_check_every = {_fmt(s.paranoid_check_every)}",
        f"sampler.proposal = {s.proposal}",
    ]
    p = cfg.priors
    for name in PRIOR_MATRICES:
        if name in cfg.sources:
            lines.append(f"prior.{name} = {cfg.sources[name]}")
    ff, fb = p.motif_weights if p.motif_weights is not None else (None, None)
    scalars = {
        "concordance_beta": p.concordance_beta,
        "degree_gamma": p.degree_gamma,
        "degree_kind": p.degree_kind,
        "edge_count_lambda": p.edge_count_lambda,
        "motif_ff": ff,
        "motif_fb": fb,
        "scc_count_lambda": p.scc_count_lambda,
        "scc_size_gamma": p.scc_size_gamma,
        "max_scc_size": p.max_scc_size,
        "allow_sccs": p.allow_sccs,
    }
    lines += [f"prior.{k} = {_fmt(v)}" for k, v in scalars.items()]
    h = cfg.hyper
    lines += [f"hyper.{f.name} = {_fmt(getattr(h, f.name))}" for f in fields(h)]
    return "\n".join(lines) + "\n"


def _matrix_source(value: str, base: Path, n_nodes: int, name: str) -> tuple[np.ndarray, str]:
    try:
        prob = float(value)
    except ValueError:
        path = (base / value).resolve()
        if not path.is_file():
            raise FileNotFoundError(f"prior.{name}: no such file {path}")
        return read_matrix_csv(path, n_nodes), str(path)
    if name != "bernoulli":
        raise ValueError(f"prior.{name} must be a CSV file path")
    mat = np.full((n_nodes, n_nodes), prob)
    np.fill_diagonal(mat, 0.5)
    return mat, _fmt(prob)


def parse_config_text(text: str, base_dir=".", path=None, env=None) -> RunConfig:
    env = os.environ if env is None else env
    base = Path(base_dir)
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'section.key = value', got {stripped!r}", lineno, path)
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key.count(".") != 1:
            raise ConfigError(f"key {key!r} must look like section.key", lineno, path)
        section, name = key.split(".")
        known = {
            "run": RUN_KEYS,
            "sampler": SAMPLER_KEYS,
            "prior": {**PRIOR_SCALARS, **{m: str for m in PRIOR_MATRICES}},
            "hyper": HYPER_KEYS,
        }.get(section)
        if known is None or name not in known:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno, path)
        raw[key] = (value, lineno)

    def get(section, table):
        out = {}
        for name, conv in table.items():
            key = f"{section}.{name}"
            if key in raw:
                value, lineno = raw[key]
                try:
                    out[name] = conv(value)
                except ValueError as exc:
                    raise ConfigError(f"{key}: {exc}", lineno, path) from None
        return out

    run = get("run", RUN_KEYS)
    if "data_path" not in run:
        raise ConfigError("run.data_path is required", None, path)
    data_path = (base / run["data_path"]).resolve()
    if not data_path.is_file():
        raise ConfigError(f"run.data_path: no such file {data_path}", raw["run.data_path"][1], path)
    n_nodes = data_n_columns(data_path)
    output_dir = Path(env.get(ENV_OUTPUT_DIR) or (base / run.get("output_dir", "results")))
    workers = run.get("workers", 1)
    if env.get(ENV_WORKERS):
        try:
            workers = int(env[ENV_WORKERS])
        except ValueError:
            raise ConfigError(f"{ENV_WORKERS} must be an integer") from None
    n_chains = run.get("n_chains", 2)
    if n_chains < 1 or workers < 1:
        raise ConfigError("run.n_chains and run.workers must be positive", None, path)

    sources = {}
    sampler_kw = get("sampler", SAMPLER_KEYS)
    init = sampler_kw.pop("initial_graph", "empty")
    if init != "empty":
        gpath = (base / init).resolve()
        if not gpath.is_file():
            raise ConfigError(f"sampler.initial_graph: no such file {gpath}", raw["sampler.initial_graph"][1], path)
        g = read_graph(gpath, n_nodes)
        if g.n_nodes != n_nodes:
            raise ConfigError("sampler.initial_graph node count differs from the data", None, path)
        sampler_kw["initial_graph"] = g
        sources["initial_graph"] = str(gpath)
    try:
        sampler = SamplerConfig(**sampler_kw)
    except ValueError as exc:
        raise ConfigError(f"sampler: {exc}", None, path) from None

    prior_kw = get("prior", PRIOR_SCALARS)
    ff, fb = prior_kw.pop("motif_ff", None), prior_kw.pop("motif_fb", None)
    if (ff is None) != (fb is None):
        raise ConfigError("prior.motif_ff and prior.motif_fb must be given together", None, path)
    if ff is not None:
        prior_kw["motif_weights"] = (ff, fb)
    for name in PRIOR_MATRICES:
        key = f"prior.{name}"
        if key in raw:
            value, lineno = raw[key]
            try:
                prior_kw[name], sources[name] = _matrix_source(value, base, n_nodes, name)
            except (ValueError, OSError) as exc:
                raise ConfigError(str(exc), lineno, path) from None
    try:
        priors = PriorConfig(**prior_kw)
        priors.check_size(n_nodes)
    except PriorConfigError as exc:
        raise ConfigError(f"prior: {exc}", None, path) from None
    if sampler.proposal == "bernoulli" and priors.bernoulli is None:
        raise ConfigError("sampler.proposal = bernoulli needs prior.bernoulli", None, path)

    try:
        hyper = Hyperparams(**get("hyper", HYPER_KEYS))
    except ValueError as exc:
        raise ConfigError(f"hyper: {exc}", None, path) from None

    return RunConfig(data_path, output_dir, priors, hyper, sampler, n_chains, workers, sources)


def parse_config(path, env=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}", None, path) from None
    return parse_config_text(text, path.parent, path, env)
