import pytest

from src.core.config import AppConfig, load_config
from src.core.errors import ConfigError

ENV_KEYS = (
    "SYNTH_SAMPLE_RATE",
    "SYNTH_WORKERS",
    "SYNTH_AUDIO_FORMAT",
    "SYNTH_LOG_LEVEL",
    "SYNTH_OUTPUT_DIR",
    "SYNTH_VERBOSE",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in ENV_KEYS:
        monkeypatch.delenv(key, raising=False)


def test_defaults(tmp_path):
    assert load_config(str(tmp_path / "absent.env")) == AppConfig()


def test_env_file(tmp_path, monkeypatch):
    env = tmp_path / "synth.env"
    env.write_text(
        "SYNTH_SAMPLE_RATE=96000\nSYNTH_WORKERS=4\nSYNTH_AUDIO_FORMAT=INT16\nSYNTH_VERBOSE=yes\n",
        encoding="utf-8",
    )
    config = load_config(str(env))
    for key in ENV_KEYS:
        monkeypatch.delenv(key, raising=False)
    assert config.sample_rate == 96000.0
    assert config.workers == 4
    assert config.audio_format == "int16"
    assert config.verbose


@pytest.mark.parametrize(
    "key, value",
    [
        ("SYNTH_SAMPLE_RATE", "fast"),
        ("SYNTH_SAMPLE_RATE", "-1"),
        ("SYNTH_WORKERS", "0"),
        ("SYNTH_AUDIO_FORMAT", "mp3"),
        ("SYNTH_LOG_LEVEL", "LOUD"),
    ],
)
def test_invalid_environment(tmp_path, monkeypatch, key, value):
    monkeypatch.setenv(key, value)
    with pytest.raises(ConfigError, match=key):
        load_config(str(tmp_path / "absent.env"))
