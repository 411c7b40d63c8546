import numpy as np
import pytest

from sccbn.config import ConfigError, RunConfig, emit_config, parse_config, parse_config_text
from sccbn.score import DataMatrix


@pytest.fixture
def workdir(tmp_path):
    rng = np.random.default_rng(0)
    DataMatrix(rng.normal(size=(20, 3)), ["a", "b", "c"]).to_csv(tmp_path / "data.csv")
    np.savetxt(tmp_path / "edges.csv", np.full((3, 3), 0.2), delimiter=",")
    (tmp_path / "start.txt").write_text("# nodes=3\n0 -> 1\n")
    return tmp_path


FULL = """\
# comment line
run.data_path = data.csv
run.output_dir = out
run.n_chains = 3
sampler.n_iterations = 5000
sampler.burn_in = 1000
sampler.thinning = 10
sampler.seed = 42
sampler.initial_graph = start.txt
sampler.paranoid_check_every = 500
prior.bernoulli = edges.csv
prior.degree_gamma = 3
prior.max_scc_size = 3
prior.motif_ff = 0.1
prior.motif_fb = -0.2
hyper.q_offset = 11
hyper.mean_correlation = 0.9
"""


def test_parse_full_config(workdir):
    (workdir / "run.cfg").write_text(FULL)
    cfg = parse_config(workdir / "run.cfg", env={})
    assert cfg.n_chains == 3
    assert cfg.sampler.seed == 42 and cfg.sampler.paranoid_check_every == 500
    assert cfg.sampler.initial_graph.has_edge(0, 1)
    assert cfg.priors.bernoulli[0, 1] == 0.2
    assert cfg.priors.degree_gamma == 3.0 and cfg.priors.max_scc_size == 3
    assert cfg.priors.motif_weights == (0.1, -0.2)
    assert cfg.hyper.q_offset == 11 and cfg.hyper.mean_correlation == 0.9
    assert cfg.output_dir == workdir / "out"


def test_round_trip_is_identical(workdir):
    (workdir / "run.cfg").write_text(FULL)
    cfg = parse_config(workdir / "run.cfg", env={})
    text = emit_config(cfg)
    (workdir / "again.cfg").write_text(text)
    again = parse_config(workdir / "again.cfg", env={})
    assert again == cfg
    assert emit_config(again) == text
    assert np.array_equal(again.priors.bernoulli, cfg.priors.bernoulli)
    assert again.config_hash() == cfg.config_hash()


def test_scalar_bernoulli_and_defaults(workdir):
    cfg = parse_config_text("run.data_path = data.csv\nprior.bernoulli = 0.025\n", workdir, env={})
    off = ~np.eye(3, dtype=bool)
    assert np.all(cfg.priors.bernoulli[off] == 0.025)
    assert cfg.n_chains == 2 and cfg.workers == 1
    assert cfg.hyper.q_offset == 1 and cfg.priors.degree_gamma is None


def test_environment_overrides(workdir):
    env = {"SCCBN_OUTPUT_DIR": str(workdir / "elsewhere"), "SCCBN_WORKERS": "4"}
    cfg = parse_config_text("run.data_path = data.csv\nrun.workers = 1\n", workdir, env=env)
    assert cfg.output_dir == workdir / "elsewhere"
    assert cfg.workers == 4


@pytest.mark.parametrize(
    "text,lineno",
    [
        ("run.data_path = data.csv\nnot a setting\n", 2),
        ("run.data_path = data.csv\nsampler.colour = red\n", 2),
        ("run.data_path = data.csv\nprior.degree_gamma = lots\n", 2),
        ("run.data_path = data.csv\nrun.n_chains = 2\nrun.n_chains = 3\n", 3),
        ("run.data_path = missing.csv\n", 1),
        ("run.data_path = data.csv\nprior.bernoulli = nofile.csv\n", 2),
    ],
)
def test_errors_carry_line_numbers(workdir, text, lineno):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text, workdir, path="run.cfg", env={})
    assert info.value.lineno == lineno
    assert f"run.cfg:{lineno}:" in str(info.value)


@pytest.mark.parametrize(
    "text",
    [
        "sampler.seed = 1\n",
        "run.data_path = data.csv\nprior.degree_gamma = -1\n",
        "run.data_path = data.csv\nhyper.kappa_offdiag = 2\n",
        "run.data_path = data.csv\nsampler.burn_in = 5000\nsampler.n_iterations = 100\n",
        "run.data_path = data.csv\nprior.motif_ff = 1\n",
        "run.data_path = data.csv\nsampler.proposal = bernoulli\n",
    ],
)
def test_invalid_settings_raise_config_error(workdir, text):
    with pytest.raises(ConfigError):
        parse_config_text(text, workdir, env={})


def test_matrix_shape_is_checked(workdir):
    np.savetxt(workdir / "small.csv", np.full((2, 2), 0.2), delimiter=",")
    with pytest.raises(ConfigError):
        parse_config_text("run.data_path = data.csv\nprior.bernoulli = small.csv\n", workdir, env={})


def test_run_config_equality_ignores_object_identity(workdir):
    a = parse_config_text("run.data_path = data.csv\n", workdir, env={})
    b = parse_config_text("run.data_path = data.csv\n", workdir, env={})
    assert a == b and isinstance(a, RunConfig)
    c = parse_config_text("run.data_path = data.csv\nsampler.seed = 9\n", workdir, env={})
    assert a != c
