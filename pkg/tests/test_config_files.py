from pathlib import Path

import pytest

from src.core.config_files import (
    format_simulation_config,
    load_distribution,
    load_simulation_config,
    load_sweep,
    parse_simulation_config,
    read_values,
)
from src.core.errors import ConfigError
from src.core.params import Boundary, LinearSolver, SamplingLaw, validate
from src.excitation.specs import BowSpec, HammerSpec, PluckSpec

PLUCK_CONFIG = """
# plucked stiff string
F0=300
KAPPA=5.88
ALPHA=3
SAMPLE_RATE=48000
DURATION=1.0
PLUCK_AMPLITUDE=0.0078
PLUCK_POSITION=0.14
"""


def test_pluck_config(write_config):
    config = load_simulation_config(write_config(PLUCK_CONFIG))
    assert config.string.gamma == 600.0
    assert config.string.kappa == 5.88
    assert config.string.alpha == 3.0
    assert config.n_steps == 48000
    (pluck,) = config.excitations
    assert isinstance(pluck, PluckSpec)
    assert pluck.c0 == 0.0078
    assert pluck.x_p == 0.14
    assert pluck.width == 0.2


def test_bow_and_hammer_groups(write_config):
    text = """
GAMMA=600
SAMPLE_RATE=48000
DURATION=1.5
BOW_POSITION=0.12
BOW_VELOCITY="0:0.2 1:0.2"
BOW_FORCE="0:40 0.99:40 1:0"
BOW_END=1.0
HAMMER_POSITION=0.2
HAMMER_VELOCITY=2
HAMMER_ONSET=1.2
BOUNDARY=simply_supported
LINEAR_SOLVER=direct-sparse
NEWTON_TOL=1e-9
READOUT_MIX=1,0.5
"""
    config = load_simulation_config(write_config(text))
    bow = next(e for e in config.excitations if isinstance(e, BowSpec))
    hammer = next(e for e in config.excitations if isinstance(e, HammerSpec))
    assert bow.f_b(0.5) == pytest.approx(40.0)
    assert bow.f_b(1.0) == 0.0
    assert bow.end == 1.0
    assert hammer.onset == 1.2
    assert hammer.v_h0 == 2.0
    assert config.boundary is Boundary.SIMPLY_SUPPORTED
    assert config.solver.linear_solver is LinearSolver.DIRECT_SPARSE
    assert config.solver.newton_tol == 1e-9
    assert config.readout_mix == (1.0, 0.5)


def test_numbered_excitations(write_config):
    text = "F0=200\nSAMPLE_RATE=48000\nDURATION=1\nBOW_END=0.4\nBOW2_START=0.5\nBOW2_FORCE=10\n"
    config = load_simulation_config(write_config(text))
    assert len(config.bows()) == 2


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("SAMPLE_RATE=48000\nDURATION=1\n", "F0"),
        ("F0=300\nGAMMA=600\nSAMPLE_RATE=48000\nDURATION=1\n", "not both"),
        ("F0=300\nSAMPLE_RATE=48000\n", "DURATION"),
        ("F0=300\nDURATION=1\n", "SAMPLE_RATE"),
        ("F0=300\nSAMPLE_RATE=48000\nDURATION=1\nTENSION=3\n", "TENSION"),
        ("F0=abc\nSAMPLE_RATE=48000\nDURATION=1\n", "F0"),
        ("F0=300\nSAMPLE_RATE=48000\nDURATION=1\nBOUNDARY=free\n", "BOUNDARY"),
        ("F0=300\nSAMPLE_RATE=48000\nDURATION=1\nPLUCK_SHAPE=1\n", "PLUCK_SHAPE"),
    ],
)
def test_config_errors(write_config, text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        load_simulation_config(write_config(text))


def test_default_sample_rate(write_config):
    config = load_simulation_config(write_config("F0=300\nDURATION=0.5\n"), default_sample_rate=44100.0)
    assert config.sample_rate == 44100.0


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        read_values(tmp_path / "nope.env")


def test_format_round_trip(write_config):
    config = load_simulation_config(write_config(PLUCK_CONFIG))
    text = format_simulation_config(config)
    assert load_simulation_config(write_config(text, "again.env")) == config


def test_format_round_trip_with_envelopes():
    values = {
        "F0": "220",
        "SAMPLE_RATE": "48000",
        "DURATION": "1",
        "BOW_FORCE": "0:30 0.66:30 0.67:0",
        "HAMMER_ONSET": "0.8",
        "SEED": "4",
    }
    config = parse_simulation_config(values)
    lines = format_simulation_config(config).splitlines()
    parsed = dict(line.split("=", 1) for line in lines)
    parsed = {k: v.strip('"') for k, v in parsed.items()}
    assert parse_simulation_config(parsed) == config


def test_distribution_file(write_config):
    text = """
SEED=42
EXCITATIONS=pluck,hammer
ALPHA_MIN=1
ALPHA_MAX=2
KAPPA_LAW=uniform
DURATION=0.25
SAMPLE_RATE=44100
"""
    dist = load_distribution(write_config(text))
    assert dist.seed == 42
    assert dist.excitations == ("pluck", "hammer")
    assert dist.ranges["alpha"].low == 1.0
    assert dist.ranges["alpha"].high == 2.0
    assert dist.ranges["kappa"].law is SamplingLaw.UNIFORM
    assert dist.base.duration == 0.25
    assert dist.base.sample_rate == 44100.0


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("ALPHA_MIN=3\nALPHA_MAX=2\n", "alpha"),
        ("EXCITATIONS=pluck,violin\n", "violin"),
        ("KAPPA_LAW=gaussian\n", "KAPPA_LAW"),
        ("COLOR=red\n", "COLOR"),
    ],
)
def test_distribution_errors(write_config, text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        load_distribution(write_config(text))


def test_sweep_file(write_config):
    text = "BASE_F0=200\nBASE_DURATION=0.05\nN_STEPS=4800,9600\nWORKERS=1,2\n"
    sweep = load_sweep(write_config(text))
    assert sweep.n_steps == (4800, 9600)
    assert sweep.workers == (1, 2)
    assert sweep.f0 == ()
    assert sweep.base.string.gamma == 400.0
    assert sweep.base.sample_rate == 48000.0


def test_empty_sweep(write_config):
    sweep = load_sweep(write_config("# nothing to sweep\n"))
    assert sweep.cases() == []
    assert sweep.base.string.gamma == 600.0


def test_sweep_errors(write_config):
    with pytest.raises(ConfigError, match="REPEATS"):
        load_sweep(write_config("REPEATS=3\n"))
    with pytest.raises(ConfigError, match="N_STEPS"):
        load_sweep(write_config("N_STEPS=a,b\n"))


EXAMPLES = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("name", ["pluck.env", "bow.env", "hammer.env"])
def test_example_render_configs_are_valid(name):
    assert validate(load_simulation_config(EXAMPLES / name)).ok


def test_example_dataset_and_sweep_configs():
    assert load_distribution(EXAMPLES / "dataset.env").excitations == ("pluck", "bow", "hammer")
    assert len(load_sweep(EXAMPLES / "sweep.env").cases()) == 9
