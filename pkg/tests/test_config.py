import importlib


def test_settings_paths_follow_data_dir(tmp_path, monkeypatch):
    config = importlib.import_module("config")
    monkeypatch.setattr(config.settings, "data_dir", tmp_path / "elsewhere")
    config.settings.ensure_directories()
    assert config.settings.db_path == tmp_path / "elsewhere" / "db" / "macroent.sqlite"
    assert config.settings.log_dir.is_dir()


def test_seed_resolution(monkeypatch):
    config = importlib.import_module("config")
    assert config.settings.resolve_seed(7) == 7
    assert config.settings.resolve_seed(None) is None
    monkeypatch.setattr(config.settings, "seed", 11)
    assert config.settings.resolve_seed(None) == 11
    assert config.settings.resolve_seed(0) == 0


def test_env_helpers(monkeypatch):
    config = importlib.import_module("config")
    monkeypatch.setenv("MACROENT_TEST_FLAG", "Yes")
    assert config._bool_env("MACROENT_TEST_FLAG", False) is True
    monkeypatch.setenv("MACROENT_TEST_INT", "-3")
    assert config._int_env("MACROENT_TEST_INT", 4) == 4
    monkeypatch.setenv("MACROENT_TEST_INT", "oops")
    assert config._optional_int_env("MACROENT_TEST_INT") is None
