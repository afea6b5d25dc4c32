"""
音频导出
Wave output with peak normalization, JSON sidecars and numeric field dumps.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import soundfile as sf

from .config import AUDIO_FORMATS
from .errors import ConfigError
from .params import SimulationConfig

PathLike = Union[str, Path]

SUBTYPES = {"float32": "FLOAT", "int16": "PCM_16"}


def normalize_peak(samples: np.ndarray, dbfs: float = -1.0) -> Tuple[np.ndarray, float]:
    """
    Scale so the absolute peak sits at ``dbfs``.

    Returns (scaled, scale); the raw signal is scaled / scale. Silence keeps scale 1.
    """
    x = np.asarray(samples, dtype=float)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak == 0.0:
        return x.copy(), 1.0
    scale = 10.0 ** (dbfs / 20.0) / peak
    return x * scale, scale


def config_hash(config: Union[SimulationConfig, Dict[str, Any]]) -> str:
    data = config.to_dict() if isinstance(config, SimulationConfig) else config
    payload = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_audio(path: PathLike, samples: np.ndarray, sample_rate: float, audio_format: str = "float32") -> Path:
    """Mono RIFF wave, 32-bit float or 16-bit integer."""
    if audio_format not in AUDIO_FORMATS:
        raise ConfigError(f"audio format must be one of {', '.join(AUDIO_FORMATS)} (got {audio_format!r})")
    rate = int(round(sample_rate))
    if rate != sample_rate:
        raise ConfigError(f"wave output needs an integer sample rate (got {sample_rate})")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), np.asarray(samples, dtype=np.float32), rate, subtype=SUBTYPES[audio_format], format="WAV")
    return path


def sidecar_path(audio_path: PathLike) -> Path:
    return Path(audio_path).with_suffix(".json")


def build_sidecar(result, scale: float, audio_format: str) -> Dict[str, Any]:
    """Sidecar content: everything needed to invert the normalization and reproduce the render."""
    diagnostics = result.diagnostics.summary()
    diagnostics.pop("render_seconds", None)
    return {
        "engine_version": result.provenance["engine_version"],
        "sample_rate": result.sample_rate,
        "n_samples": len(result.samples),
        "audio_format": audio_format,
        "raw_scale": scale,
        "config_hash": config_hash(result.provenance["config"]),
        "config": result.provenance["config"],
        "seed": result.provenance["seed"],
        "grid": result.provenance["grid"],
        "diagnostics": diagnostics,
    }


def write_json(path: PathLike, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path


def dump_fields(result, stem: PathLike) -> Dict[str, Path]:
    """Full u and zeta histories as tab-separated text, one row per time level."""
    stem = Path(stem)
    paths = {}
    for name, data in (("u", result.u_field), ("zeta", result.z_field)):
        if data is None:
            continue
        path = stem.with_name(f"{stem.name}.{name}.txt")
        np.savetxt(path, data, delimiter="\t")
        paths[name] = path
    return paths


def save_render(
    result,
    out_path: PathLike,
    audio_format: str = "float32",
    with_fields: bool = False,
    with_spectrum: bool = False,
) -> Dict[str, Path]:
    """Write audio, sidecar and optional dumps for one render; returns the written paths."""
    out_path = Path(out_path)
    scaled, scale = normalize_peak(result.samples)
    paths = {"audio": write_audio(out_path, scaled, result.sample_rate, audio_format)}
    paths["sidecar"] = write_json(sidecar_path(out_path), build_sidecar(result, scale, audio_format))
    stem = out_path.with_suffix("")
    if with_fields:
        paths.update(dump_fields(result, stem))
    if with_spectrum and len(result.samples):
        from ..analysis.spectrum import spectrum

        spectrum_path = stem.with_name(f"{stem.name}.spectrum.txt")
        spectrum(result.samples, result.sample_rate).save(spectrum_path)
        paths["spectrum"] = spectrum_path
    return paths
