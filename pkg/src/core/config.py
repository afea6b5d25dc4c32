import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler

from .errors import ConfigError

AUDIO_FORMATS = ("float32", "int16")


@dataclass
class AppConfig:
    sample_rate: float = 48000.0
    workers: int = 1
    audio_format: str = "float32"
    log_level: str = "INFO"
    output_dir: str = "output"
    verbose: bool = False


def _env_number(name: str, default: str, cast):
    raw = os.getenv(name, default)
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"{name}={raw!r} is not a valid {cast.__name__}")


def load_config(env_file: Optional[str] = None) -> AppConfig:
    """Load process-level defaults from environment variables (and a .env file)"""

    load_dotenv(env_file)

    sample_rate = _env_number("SYNTH_SAMPLE_RATE", "48000", float)
    if sample_rate <= 0:
        raise ConfigError(f"SYNTH_SAMPLE_RATE must be positive, got {sample_rate}")

    workers = _env_number("SYNTH_WORKERS", "1", int)
    if workers < 1:
        raise ConfigError(f"SYNTH_WORKERS must be at least 1, got {workers}")

    audio_format = os.getenv("SYNTH_AUDIO_FORMAT", "float32").lower()
    if audio_format not in AUDIO_FORMATS:
        raise ConfigError(
            f"SYNTH_AUDIO_FORMAT must be one of {', '.join(AUDIO_FORMATS)}, got {audio_format!r}"
        )

    log_level = os.getenv("SYNTH_LOG_LEVEL", "INFO").upper()
    if log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ConfigError(f"SYNTH_LOG_LEVEL={log_level!r} is not a logging level")

    return AppConfig(
        sample_rate=sample_rate,
        workers=workers,
        audio_format=audio_format,
        log_level=log_level,
        output_dir=os.getenv("SYNTH_OUTPUT_DIR", "output"),
        verbose=os.getenv("SYNTH_VERBOSE", "false").lower() in ("1", "true", "yes"),
    )


def setup_logging(level: str = "INFO") -> None:
    """Route library diagnostics through rich"""
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True, show_path=False)],
        force=True,
    )
