import importlib
import sys
from pathlib import Path

import pytest


@pytest.fixture(autouse=True)
def configure_env(tmp_path, monkeypatch):
    data_dir = tmp_path / "MacroentData"
    monkeypatch.setenv("MACROENT_DATA_DIR", str(data_dir))
    monkeypatch.delenv("MACROENT_SEED", raising=False)
    repo_root = Path(__file__).resolve().parents[1]
    if str(repo_root) not in sys.path:
        sys.path.insert(0, str(repo_root))

    config = importlib.import_module("config")
    monkeypatch.setattr(config.settings, "data_dir", data_dir)
    monkeypatch.setattr(config.settings, "seed", None)
    monkeypatch.setattr(config.settings, "record_runs", False)
    monkeypatch.setattr(config.settings, "log_level", "WARNING")
    monkeypatch.setattr(config.settings, "log_file", None)
    monkeypatch.setattr(config.settings, "threads", 2)
    monkeypatch.setattr(config.settings, "adversary_starts", 8)
    config.settings.ensure_directories()

    storage = importlib.import_module("macroent.core.storage")
    storage._engine = None  # type: ignore[attr-defined]
    storage.init_db(config.settings.db_path)

    yield

    if storage._engine is not None:  # type: ignore[attr-defined]
        storage._engine.dispose()  # type: ignore[attr-defined]
        storage._engine = None  # type: ignore[attr-defined]
