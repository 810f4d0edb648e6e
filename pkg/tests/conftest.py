import numpy as np
import pytest

from sbscv_lab.physics.cvgrid import Grid, cat_state
from sbscv_lab.physics.envmodel import make_oscillator_env
from sbscv_lab.utils.envvars import EnvVars
from sbscv_lab.utils.logger import LogManager


def _reset_singletons():
    LogManager.delete_instance()
    EnvVars.delete_instance()


@pytest.fixture(autouse=True)
def isolated_environment(tmp_path, monkeypatch):
    """Fresh settings per test, logs under tmp_path and no cap from the caller's shell."""
    monkeypatch.setenv("SBSCV_LOG_PATH", str(tmp_path / "logs"))
    monkeypatch.setenv("SBSCV_LOG_CONSOLE", "false")
    monkeypatch.delenv("SBSCV_CAP", raising=False)
    monkeypatch.chdir(tmp_path)
    _reset_singletons()
    yield
    _reset_singletons()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_grid():
    return Grid(-6.0, 6.0, 16)


@pytest.fixture
def small_cat(small_grid):
    return cat_state(small_grid, [-1.0, 1.0], [1.0, 1.0], 0.35)


@pytest.fixture
def canonical_grid():
    return Grid(-8.0, 8.0, 128)


@pytest.fixture
def canonical_cat(canonical_grid):
    return cat_state(canonical_grid, [-3.0, 3.0], [1.0, 1.0], 0.5)


@pytest.fixture
def position_env():
    return make_oscillator_env(6, "position", coupling=1.0)


@pytest.fixture
def small_scenario_data():
    """Observed-only scenario that runs in well under a second."""
    return {
        "schema": 1,
        "name": "tiny_observed",
        "grid": {"x_min": -6.0, "x_max": 6.0, "n": 16},
        "state": {"kind": "cat", "centers": [-1.0, 1.0], "width": 0.35},
        "ensemble": {"observed": [{"kind": "position", "dim": 6, "coupling": 1.0}]},
        "times": [0.5, 2.0],
        "partition": {"kind": "cuts", "cuts": [0.0]},
    }
