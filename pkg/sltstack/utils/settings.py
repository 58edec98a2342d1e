"""
Settings
Environment-driven settings, read after load_dotenv
"""

import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

from ..errors import ConfigError


@dataclass(frozen=True)
class Settings:
    results_dir: Path
    log_level: str
    workers: int


def load_settings() -> Settings:
    """
    Read SLT_RESULTS_DIR, SLT_LOG_LEVEL and SLT_WORKERS

    A ``.env`` file in the working directory is loaded first; variables
    already set in the environment win.
    """
    load_dotenv()
    workers_raw = os.getenv("SLT_WORKERS", "1")
    try:
        workers = int(workers_raw)
    except ValueError:
        raise ConfigError(f"SLT_WORKERS must be an integer, got {workers_raw!r}") from None
    if workers < 1:
        raise ConfigError(f"SLT_WORKERS must be at least 1, got {workers}")
    return Settings(
        results_dir=Path(os.getenv("SLT_RESULTS_DIR", "./results")),
        log_level=os.getenv("SLT_LOG_LEVEL", "INFO"),
        workers=workers,
    )
