"""
Config - Process-level settings read from the environment, and logging setup.
"""

import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError

THREADS_ENV = "WEDGE_INTENSITY_THREADS"
LOG_LEVEL_ENV = "WEDGE_INTENSITY_LOG_LEVEL"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass(frozen=True)
class Settings:
    """Settings that govern a whole process rather than a single evaluation."""
    threads: int = 1
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Build settings from environment variables.

        Returns:
            Settings with `threads` from WEDGE_INTENSITY_THREADS (default: CPU count)
            and `log_level` from WEDGE_INTENSITY_LOG_LEVEL (default: WARNING).
        """
        raw = os.environ.get(THREADS_ENV)
        if raw is None or raw.strip() == "":
            threads = os.cpu_count() or 1
        else:
            try:
                threads = int(raw)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
            if threads < 1:
                raise ConfigError(f"{THREADS_ENV} must be >= 1, got {threads}")
        level = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
        return cls(threads=threads, log_level=level)


def worker_count(requested: Optional[int] = None) -> int:
    """Number of workers to use: the explicit request, else the environment cap."""
    if requested is not None:
        return max(1, int(requested))
    return Settings.from_env().threads


def configure_logging(level: Optional[str] = None) -> None:
    """
    Install a single stderr handler on the package logger.

    Library modules only create loggers; this is called by the CLI.

    Args:
        level: Level name. Defaults to the environment setting.
    """
    name = (level or Settings.from_env().log_level).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise ConfigError(f"Unknown log level: {level}")

    package_logger = logging.getLogger("wedge_intensity")
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    package_logger.addHandler(handler)
    package_logger.setLevel(numeric)
