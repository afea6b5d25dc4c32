import numpy as np
import pytest

from src.core.params import SimulationConfig, from_f0
from src.excitation.specs import PluckSpec


@pytest.fixture
def make_config():
    """Plucked-string config factory; keyword arguments not naming a run setting go to the string."""

    def _make(f0=300.0, sample_rate=48000.0, duration=0.05, excitations=None, **kwargs):
        run_keys = {"readout_position", "readout_mix", "interpolation_order", "solver", "boundary", "seed"}
        run = {k: kwargs.pop(k) for k in list(kwargs) if k in run_keys}
        return SimulationConfig(
            string=from_f0(f0, **kwargs),
            sample_rate=sample_rate,
            duration=duration,
            excitations=(PluckSpec(c0=0.002),) if excitations is None else tuple(excitations),
            **run,
        )

    return _make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_config(tmp_path):
    def _write(text, name="config.env"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
