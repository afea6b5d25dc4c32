import json

import pytest
import soundfile as sf

from src.analysis.benchmark import COLUMNS
from src.cli.app import EXIT_FAILURE, EXIT_OK, main
from src.core.workflow import MANIFEST_NAME, read_manifest

PLUCK = "F0=300\nKAPPA=2\nALPHA=3\nSAMPLE_RATE=48000\nDURATION=0.02\nPLUCK_AMPLITUDE=0.002\n"


def test_render(tmp_path, write_config):
    out = tmp_path / "pluck.wav"
    assert main(["render", "--config", str(write_config(PLUCK)), "--out", str(out)]) == EXIT_OK
    info = sf.info(str(out))
    assert info.frames == 960
    assert info.subtype == "FLOAT"
    sidecar = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
    assert sidecar["n_samples"] == 960
    assert sidecar["raw_scale"] > 0


def test_render_is_bit_identical(tmp_path, write_config):
    config = str(write_config(PLUCK))
    first, second = tmp_path / "a.wav", tmp_path / "b.wav"
    assert main(["render", "--config", config, "--out", str(first)]) == EXIT_OK
    assert main(["render", "--config", config, "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_render_overrides_and_dumps(tmp_path, write_config):
    out = tmp_path / "short.wav"
    argv = [
        "render", "--config", str(write_config(PLUCK)), "--out", str(out),
        "--duration", "0.01", "--sample-rate", "44100", "--seed", "5",
        "--format", "int16", "--dump-fields", "--dump-spectrum",
    ]
    assert main(argv) == EXIT_OK
    info = sf.info(str(out))
    assert info.samplerate == 44100
    assert info.frames == 441
    assert info.subtype == "PCM_16"
    assert (tmp_path / "short.u.txt").exists()
    assert (tmp_path / "short.zeta.txt").exists()
    assert (tmp_path / "short.spectrum.txt").exists()
    assert json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))["seed"] == 5


def test_render_rejects_invalid_alpha(tmp_path, write_config, capsys):
    config = write_config(PLUCK.replace("ALPHA=3", "ALPHA=0.5"))
    assert main(["render", "--config", str(config), "--out", str(tmp_path / "x.wav")]) == EXIT_FAILURE
    assert "alpha" in capsys.readouterr().err
    assert not (tmp_path / "x.wav").exists()


def test_render_missing_config(tmp_path):
    argv = ["render", "--config", str(tmp_path / "missing.env"), "--out", str(tmp_path / "x.wav")]
    assert main(argv) == EXIT_FAILURE


def test_dataset(tmp_path, write_config):
    dist = write_config("SEED=42\nEXCITATIONS=pluck\nDURATION=0.01\n", "dist.env")
    out = tmp_path / "data"
    argv = ["dataset", "--config", str(dist), "-n", "2", "--out", str(out), "--workers", "1"]
    assert main(argv) == EXIT_OK
    records = read_manifest(out / MANIFEST_NAME)
    assert len(records) == 2
    assert all(r["success"] for r in records)


def test_dataset_empty(tmp_path, write_config):
    dist = write_config("SEED=1\n", "dist.env")
    out = tmp_path / "empty"
    assert main(["dataset", "--config", str(dist), "-n", "0", "--out", str(out)]) == EXIT_OK
    assert (out / MANIFEST_NAME).read_text(encoding="utf-8") == ""


def test_dataset_bad_distribution(tmp_path, write_config):
    dist = write_config("ALPHA_MIN=4\nALPHA_MAX=1\n", "dist.env")
    assert main(["dataset", "--config", str(dist), "-n", "1", "--out", str(tmp_path)]) == EXIT_FAILURE


def test_verify_oracle(capsys):
    assert main(["verify", "oracle"]) == EXIT_OK
    assert "oracle" in capsys.readouterr().out


def test_verify_unknown_suite():
    assert main(["verify", "nonsense"]) == EXIT_FAILURE


@pytest.mark.slow
def test_verify_all_suites():
    assert main(["verify"]) == EXIT_OK


def test_bench_empty_sweep(write_config, capsys):
    sweep = write_config("BASE_DURATION=0.001\n", "sweep.env")
    assert main(["bench", "--config", str(sweep), "--repeats", "1"]) == EXIT_OK
    lines = [line for line in capsys.readouterr().out.splitlines() if line and not line.startswith("#")]
    assert lines == ["\t".join(COLUMNS)]


def test_bench_to_file(tmp_path, write_config):
    sweep = write_config("BASE_DURATION=0.001\nN_STEPS=24,48\n", "sweep.env")
    out = tmp_path / "timing.json"
    assert main(["bench", "--config", str(sweep), "--repeats", "1", "--out", str(out)]) == EXIT_OK
    rows = json.loads(out.read_text(encoding="utf-8"))["rows"]
    assert [row["n_steps"] for row in rows] == [24, 48]
    assert all(row["iqr_seconds"] is None for row in rows)


def test_bench_rejects_zero_repeats(write_config):
    sweep = write_config("", "sweep.env")
    assert main(["bench", "--config", str(sweep), "--repeats", "0"]) == EXIT_FAILURE
