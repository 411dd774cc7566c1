import json

from utils.settings import DEFAULT_SETTINGS, load_settings, save_settings


def test_missing_file_gives_defaults(tmp_path, logger, monkeypatch):
    monkeypatch.delenv("MAXMIN_GUARD_NONZEROS", raising=False)
    assert load_settings(logger, str(tmp_path / "none.json")) == DEFAULT_SETTINGS


def test_save_then_load(tmp_path, logger, monkeypatch):
    monkeypatch.delenv("MAXMIN_GUARD_NONZEROS", raising=False)
    path = str(tmp_path / "conf" / "settings.json")
    assert save_settings({"retry_cap": 5}, logger, path)
    loaded = load_settings(logger, path)
    assert loaded["retry_cap"] == 5
    assert loaded["brute_guard"] == DEFAULT_SETTINGS["brute_guard"]


def test_bad_values_fall_back(tmp_path, logger, monkeypatch):
    monkeypatch.delenv("MAXMIN_GUARD_NONZEROS", raising=False)
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"retry_cap": "many", "lp_tolerance": 0}))
    loaded = load_settings(logger, str(path))
    assert loaded["retry_cap"] == 32
    # an int where a float is expected is accepted
    assert loaded["lp_tolerance"] == 0

    path.write_text("[1, 2]")
    assert load_settings(logger, str(path)) == DEFAULT_SETTINGS


def test_environment_override(tmp_path, logger, monkeypatch):
    monkeypatch.setenv("MAXMIN_GUARD_NONZEROS", "77")
    assert load_settings(logger, str(tmp_path / "none.json"))["guard_nonzeros"] == 77
    monkeypatch.setenv("MAXMIN_GUARD_NONZEROS", "lots")
    assert load_settings(logger, str(tmp_path / "none.json"))["guard_nonzeros"] == 2_000_000
