"""Runtime configuration for macroent.

Values come from the environment (optionally via a ``.env`` file) so the CLI,
the library and the tests share one source of truth.  Library modules only
read ``settings``; directories are created by the CLI entry point and the run
ledger.
"""
from __future__ import annotations

from dataclasses import dataclass
import os
from pathlib import Path
from typing import Optional

try:
    from dotenv import load_dotenv
except ImportError:  # pragma: no cover - optional dependency guard
    load_dotenv = None


BASE_DIR = Path(__file__).parent

if load_dotenv:  # pragma: no branch - simple configuration loader
    candidate_paths = []
    if env_file := os.environ.get("MACROENT_ENV_FILE"):
        candidate_paths.append(Path(env_file).expanduser())
    candidate_paths.append(BASE_DIR / ".env")
    loaded = False
    for env_path in candidate_paths:
        if env_path and env_path.exists():
            load_dotenv(env_path, override=False)
            loaded = True
            break
    if not loaded:
        load_dotenv(override=False)

DEFAULT_DATA_DIR = BASE_DIR / "data"
DEFAULT_LOG_LEVEL = "WARNING"
DEFAULT_ADVERSARY_STARTS = 32
DEFAULT_MAX_ITER = 2000


def _bool_env(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "on"}


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    if not value:
        return default
    try:
        parsed = int(value.strip())
    except ValueError:
        return default
    return parsed if parsed > 0 else default


def _optional_int_env(name: str) -> Optional[int]:
    value = os.getenv(name)
    if not value:
        return None
    try:
        return int(value.strip())
    except ValueError:
        return None


def _optional_path_env(name: str) -> Optional[Path]:
    value = os.getenv(name)
    return Path(value).expanduser() if value else None


@dataclass(slots=True)
class Settings:
    """Runtime settings resolved from the environment."""

    data_dir: Path = Path(os.getenv("MACROENT_DATA_DIR", str(DEFAULT_DATA_DIR))).expanduser()
    seed: Optional[int] = _optional_int_env("MACROENT_SEED")
    threads: int = _int_env("MACROENT_THREADS", os.cpu_count() or 1)
    log_level: str = os.getenv("MACROENT_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()
    log_file: Optional[Path] = _optional_path_env("MACROENT_LOG_FILE")
    record_runs: bool = _bool_env("MACROENT_RECORD_RUNS", False)
    adversary_starts: int = _int_env("MACROENT_ADVERSARY_STARTS", DEFAULT_ADVERSARY_STARTS)
    max_iter: int = _int_env("MACROENT_MAX_ITER", DEFAULT_MAX_ITER)

    def ensure_directories(self) -> None:
        """Create the data folders used by the run ledger and log files."""

        for path in (self.data_dir, self.data_dir / "db", self.log_dir):
            path.mkdir(parents=True, exist_ok=True)

    @property
    def db_path(self) -> Path:
        return self.data_dir / "db" / "macroent.sqlite"

    @property
    def log_dir(self) -> Path:
        return self.data_dir / "logs"

    def resolve_seed(self, seed: Optional[int]) -> Optional[int]:
        return seed if seed is not None else self.seed


settings = Settings()
