"""Shared fixtures: keep tests away from the user's config files and environment."""

import os
from pathlib import Path

import pytest

from hapsnoma import config as config_module
from hapsnoma.config import ScenarioConfig


@pytest.fixture(autouse=True)
def isolated_config(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """No default config files, no HAPSNOMA_* variables, cwd without platforms.yaml."""
    monkeypatch.setattr(
        config_module,
        "CONFIG_PATHS",
        [tmp_path / "home" / "scenario.env", tmp_path / "home" / ".hapsnoma.env"],
    )
    for key in list(os.environ):
        if key.startswith("HAPSNOMA_"):
            monkeypatch.delenv(key)
    workdir = tmp_path / "work"
    workdir.mkdir()
    monkeypatch.chdir(workdir)


@pytest.fixture
def small_config() -> ScenarioConfig:
    """Scenario small enough for Monte Carlo tests to run in seconds."""
    cfg = ScenarioConfig()
    cfg.n_trials = 4
    cfg.power_grid_dbm = (30.0, 40.0, 50.0)
    cfg.qos_grid = (0.0, 1.0, 2.0)
    cfg.favprop_elements = 16
    cfg.favprop_trials = 400
    cfg.favprop_step_deg = 90.0
    cfg.corr_points = 21
    cfg.quad_nodes = 12
    return cfg


DESK_SCENARIO = Path(__file__).resolve().parents[1] / "docs" / "desk" / "scenario.env"


@pytest.fixture
def desk_config() -> ScenarioConfig:
    """The shipped desk scenario, trimmed to a few trials."""
    cfg = ScenarioConfig.load(DESK_SCENARIO)
    cfg.n_trials = 16
    return cfg
