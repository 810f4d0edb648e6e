import dataclasses
import json

import numpy as np
import pandas as pd
import pytest

from sbscv_lab.config.scenario import load_packaged_scenario, scenario_from_dict
from sbscv_lab.runner.experiment import ExperimentRunner, run
from sbscv_lab.runner.manifest import file_sha256
from sbscv_lab.runner.record_formatter import BOUND_COLUMNS, SUMMARY_COLUMNS, validate_csv
from sbscv_lab.utils.errors import ConfigurationError, TruncationError


@pytest.fixture
def small_scenario(small_scenario_data):
    return scenario_from_dict(small_scenario_data)


def test_run_writes_outputs(small_scenario, tmp_path):
    out = tmp_path / "out"
    record = run(small_scenario, out)
    assert record.all_satisfied
    assert [sample.t for sample in record.samples] == [0.5, 2.0]

    bounds = pd.read_csv(out / "bounds.csv")
    assert list(bounds.columns) == BOUND_COLUMNS
    assert bounds['satisfied'].all()
    assert set(bounds['env_dims'].astype(str)) == {"6"}
    assert {'diagonal_bound', 'jensen_step', 'objective_chain', 'kupsch_offdiag_bound'} <= set(bounds['name'])
    assert validate_csv(out / "bounds.csv") == []

    summary = pd.read_csv(out / "summary.csv")
    assert list(summary.columns) == SUMMARY_COLUMNS
    assert len(summary) == 2
    assert np.all(np.isfinite(summary['qsd_error']))


def test_manifest(small_scenario, tmp_path):
    out = tmp_path / "out"
    run(small_scenario, out, seed=7)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest['scenario'] == "tiny_observed"
    assert manifest['config_sha256'] == small_scenario.config_hash()
    assert manifest['seed'] == 7
    assert manifest['all_satisfied'] is True
    assert manifest['outputs']['bounds']['sha256'] == file_sha256(out / "bounds.csv")
    assert manifest['outputs']['summary']['path'] == "summary.csv"
    assert len(manifest['records']['samples']) == 2


def test_outputs_are_reproducible(small_scenario, tmp_path):
    run(small_scenario, tmp_path / "a")
    run(small_scenario, tmp_path / "b")
    run(dataclasses.replace(small_scenario, workers=2), tmp_path / "c")
    for name in ("bounds.csv", "summary.csv"):
        reference = (tmp_path / "a" / name).read_bytes()
        assert (tmp_path / "b" / name).read_bytes() == reference
        assert (tmp_path / "c" / name).read_bytes() == reference


def test_initial_time_is_exactly_sbs(small_scenario_data):
    data = dict(small_scenario_data, times=[0.0], partition={"kind": "uniform", "k": 1},
                pvm={"strategy": "fixed", "fixed_cells": [[0, 1, 2, 3, 4, 5]]})
    record = run(scenario_from_dict(data))
    sample = record.samples[0]
    assert sample.distance <= 1e-10
    assert sample.pvm_strategy == "fixed"
    assert record.all_satisfied


def test_gaussian_sweep_decreases():
    record = run(load_packaged_scenario("canonical_cat_gaussian.json"))
    assert record.all_satisfied
    names = {report.name for sample in record.samples for report in sample.reports}
    assert {'gaussian_offdiag_bound', 'offdiag_total_gaussian', 'kupsch_ibp_identity'} <= names
    distances = record.distances()
    assert np.all(np.diff(distances) <= 1e-6)
    assert all(np.isnan(sample.qsd_error) for sample in record.samples)


def test_only_filter(small_scenario):
    record = run(small_scenario, only="diagonal_bound")
    assert all(r.name == "diagonal_bound" for sample in record.samples for r in sample.reports)
    assert all(len(sample.reports) == 1 for sample in record.samples)
    with pytest.raises(ConfigurationError, match="Unknown bound"):
        ExperimentRunner(small_scenario, only="bogus")


def test_truncation_error_names_scenario_and_time(small_scenario_data):
    data = dict(small_scenario_data, name="truncated", times=[3.0],
                ensemble={"traced": [{"kind": "position", "dim": 4, "coupling": 1.0}],
                          "observed": [{"kind": "position", "dim": 6}]})
    with pytest.raises(TruncationError, match="'truncated', t=3"):
        run(scenario_from_dict(data))


def test_validate_csv_detects_tampering(small_scenario, tmp_path):
    out = tmp_path / "out"
    run(small_scenario, out)
    bounds = pd.read_csv(out / "bounds.csv")
    bounds.loc[0, 'satisfied'] = False
    bounds.to_csv(out / "bounds.csv", index=False)
    assert validate_csv(out / "bounds.csv") == [(float(bounds.loc[0, 't']), bounds.loc[0, 'name'])]
