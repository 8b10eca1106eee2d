"""Tests for solver settings."""

import json

import pytest

from src.core.settings import THREADS_ENV, SolverSettings


@pytest.fixture(autouse=True)
def no_thread_override(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


def test_bundled_defaults():
    assert SolverSettings.load() == SolverSettings()


def test_missing_config_falls_back(tmp_path):
    assert SolverSettings.load(tmp_path / "absent.json") == SolverSettings()


def test_config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"solver_defaults": {"grid": 50, "unknown": 1}}), encoding="utf-8")
    settings = SolverSettings.load(path)
    assert settings.grid == 50
    assert settings.horizon == SolverSettings().horizon


@pytest.mark.parametrize("value, expected", [("4", 4), ("0", 1), ("many", 1)])
def test_thread_override(monkeypatch, value, expected):
    monkeypatch.setenv(THREADS_ENV, value)
    assert SolverSettings.load().thread_count == expected


def test_overrides_skip_none():
    base = SolverSettings()
    changed = base.with_overrides(grid=None, horizon=5, colour="red")
    assert changed.horizon == 5
    assert changed.grid == base.grid
    assert base.with_overrides(grid=None) is base


def test_round_trip():
    settings = SolverSettings(grid=10, thread_count=3)
    assert SolverSettings.from_dict(settings.to_dict()) == settings
