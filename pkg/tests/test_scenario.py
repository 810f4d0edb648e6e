import copy
import json

import pytest

from sbscv_lab.config.scenario import (DEFAULT_BOUND_TOL, DEFAULT_GRID_POINTS, load_packaged_scenario,
                                       load_scenario, packaged_scenarios, scenario_from_dict)
from sbscv_lab.utils.envvars import DEFAULT_DIMENSION_CAP, EnvVars
from sbscv_lab.utils.errors import ConfigurationError
from sbscv_lab.utils.lab_types import EnvKind, PvmStrategy

MINIMAL = {
    "schema": 1,
    "name": "minimal",
    "grid": {"x_min": -8.0, "x_max": 8.0},
    "state": {"kind": "cat", "centers": [-3.0, 3.0], "width": 0.5},
    "ensemble": {"gamma": {"alpha": 1.0}},
    "times": [1.0],
    "partition": {"kind": "uniform"},
}


def _with(**changes):
    data = copy.deepcopy(MINIMAL)
    data.update(changes)
    return data


def test_defaults():
    scenario = scenario_from_dict(MINIMAL)
    assert scenario.grid.n == DEFAULT_GRID_POINTS
    assert scenario.tolerances.bound == DEFAULT_BOUND_TOL
    assert scenario.cap == DEFAULT_DIMENSION_CAP
    assert scenario.seed == 0
    assert scenario.workers == 1
    assert scenario.pvm.strategy == PvmStrategy.heuristic
    assert scenario.ensemble.gamma.n_exp == 1.0
    assert scenario.ensemble.gaussian_only
    assert scenario.partition.build(scenario.grid.build(), 1.0).cells[0].b == 0.0


def test_packaged_scenarios_load():
    assert packaged_scenarios() == ["canonical_cat_gaussian.json", "canonical_cat_observed.json",
                                    "multi_env_identical.json", "small_cross_check.json"]
    for name in packaged_scenarios():
        scenario = load_packaged_scenario(name)
        assert scenario.name == name[:-len(".json")]
    cross = load_packaged_scenario("small_cross_check.json")
    assert [spec.kind for spec in cross.ensemble.traced] == [EnvKind.qubit, EnvKind.position]
    assert cross.ensemble.observed_dims == (8,)
    assert not cross.truncation_check


def test_unknown_packaged_scenario():
    with pytest.raises(ConfigurationError):
        load_packaged_scenario("missing.json")


def test_unknown_key_is_named():
    with pytest.raises(ConfigurationError, match="foo"):
        scenario_from_dict(_with(foo=1))
    data = copy.deepcopy(MINIMAL)
    data["grid"]["bar"] = 2
    with pytest.raises(ConfigurationError, match="bar"):
        scenario_from_dict(data)


@pytest.mark.parametrize("changes", [
    {"times": []},
    {"times": [-1.0]},
    {"schema": 2},
    {"ensemble": {}},
    {"state": {"kind": "cat", "centers": [-3.0, 3.0], "width": 0.0}},
    {"state": {"kind": "gaussian", "centers": [-3.0, 3.0], "width": 0.5}},
    {"state": {"kind": "cat", "centers": [-7.5, 3.0], "width": 0.5}},
    {"partition": {"kind": "cuts"}},
    {"partition": {"kind": "cuts", "cuts": [9.0]}},
    {"ensemble": {"observed": [{"kind": "position"}]}},
    {"ensemble": {"observed": [{"kind": "position", "dim": 3}]}},
])
def test_invalid_scenarios(changes):
    with pytest.raises(ConfigurationError):
        scenario_from_dict(_with(**changes))


def test_pvm_settings():
    observed = {"observed": [{"kind": "position", "dim": 8}]}
    with pytest.raises(ConfigurationError, match="fixed_cells"):
        scenario_from_dict(_with(ensemble=observed, pvm={"strategy": "fixed"}))
    with pytest.raises(ConfigurationError, match="exhaustive"):
        scenario_from_dict(_with(ensemble=observed, pvm={"strategy": "exhaustive"}))
    scenario = scenario_from_dict(_with(ensemble=observed, pvm={"strategy": "fixed",
                                                               "fixed_cells": [[0, 1, 2, 3], [4, 5, 6, 7]]}))
    assert scenario.pvm.fixed_cells == ((0, 1, 2, 3), (4, 5, 6, 7))


def test_cap_precedence(monkeypatch):
    scenario = scenario_from_dict(_with(cap=5000))
    assert scenario.effective_cap() == 5000
    assert scenario.effective_cap(300) == 300
    monkeypatch.setenv("SBSCV_CAP", "400")
    EnvVars.delete_instance()
    assert scenario.effective_cap() == 400
    assert scenario.effective_cap(300) == 300


def test_joint_dimension_above_cap():
    observed = {"observed": [{"kind": "position", "dim": 12}]}
    with pytest.raises(ConfigurationError, match="cap"):
        scenario_from_dict(_with(ensemble=observed), cap=1000)
    assert scenario_from_dict(_with(ensemble=observed)).joint_dimension() == 128 * 12


def test_per_time_partition():
    partition = {"kind": "cuts", "cuts": [0.0], "per_time": [{"t": 2.0, "cuts": [-1.0, 1.0]}]}
    scenario = scenario_from_dict(_with(times=[1.0, 2.0], partition=partition))
    grid = scenario.grid.build()
    assert len(scenario.partition.build(grid, 1.0)) == 2
    assert len(scenario.partition.build(grid, 2.0)) == 3


def test_complex_weights():
    scenario = scenario_from_dict(_with(state={"kind": "cat", "centers": [-3.0, 3.0], "width": 0.5,
                                               "weights": [1.0, [0.0, 1.0]]}))
    assert scenario.state.weights == (1 + 0j, 1j)


def test_config_hash():
    assert scenario_from_dict(MINIMAL).config_hash() == scenario_from_dict(copy.deepcopy(MINIMAL)).config_hash()
    assert scenario_from_dict(_with(seed=3)).config_hash() != scenario_from_dict(MINIMAL).config_hash()


def test_load_from_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(MINIMAL))
    assert load_scenario(path).name == "minimal"

    broken = tmp_path / "broken.json"
    broken.write_text('{"schema": 1,\n "name": }')
    with pytest.raises(ConfigurationError, match="line 2"):
        load_scenario(broken)
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / "absent.json")
    listing = tmp_path / "list.json"
    listing.write_text("[]")
    with pytest.raises(ConfigurationError, match="object"):
        load_scenario(listing)
