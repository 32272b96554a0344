"""Tests for SweepRunner and the run/sweep writers."""

import json

import numpy as np
import pytest

from critcycle.config.schema import ExperimentConfig
from critcycle.errors import NumericalError
from critcycle.harness import experiment
from critcycle.harness.experiment import cycle_records, run_experiment
from critcycle.harness.output import RUN_COLUMNS, read_csv
from critcycle.harness.sweep import SweepRunner, default_workers, run_point


def _config(**sweep) -> ExperimentConfig:
    return ExperimentConfig(cycles=2, sweep=sweep)


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------

def test_run_writes_versioned_files(tmp_path):
    result = run_experiment(ExperimentConfig(cycles=2))
    csv_path, json_path = result.write(tmp_path)

    assert csv_path.read_text().splitlines()[0] == "# schema: critcycle.trajectory/1"
    table = read_csv(csv_path)
    assert list(table.columns) == RUN_COLUMNS
    assert len(table) == 2

    summary = json.loads(json_path.read_text())
    assert summary["schema"] == "critcycle.summary/1"
    assert summary["alpha_fit"] is None
    assert summary["phase_match"]["matched"] is True
    assert summary["bound_dominated"] is True
    assert summary["eps"]["flagged"] is False


def test_dense_run_covers_every_step():
    result = run_experiment(ExperimentConfig(cycles=1), dense=True)
    assert len(result.table) == result.summary["steps"] + 1
    assert result.table["t"].iloc[-1] == pytest.approx(16.0)


def test_size_cap_reported():
    result = run_experiment(ExperimentConfig(cycles=2, eta=20.0))
    assert result.summary["m_star"] == 2


def test_cycle_records_add_cycle_index():
    records = cycle_records(run_experiment(ExperimentConfig(cycles=2)))
    assert list(records.columns) == ["m"] + RUN_COLUMNS
    assert list(records["m"]) == [1, 2]


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@pytest.mark.asyncio
async def test_table_layout():
    result = await SweepRunner(_config(kappa_2tau=[0.0, 0.5], n_th=[0.0, 2.0]), workers=1).run()
    assert list(result.table.columns) == (
        ["kappa_2tau", "n_th", "m", "status", "error"] + RUN_COLUMNS + ["alpha", "alpha_bound"]
    )
    assert len(result.table) == 4 * 2
    assert list(result.table["kappa_2tau"]) == [0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5]
    assert list(result.table["n_th"]) == [0.0, 0.0, 2.0, 2.0, 0.0, 0.0, 2.0, 2.0]
    assert result.failed == 0


@pytest.mark.asyncio
async def test_output_independent_of_worker_count(tmp_path):
    config = _config(tau_omega=[8.0, 8.2, 9.0])
    written = []
    for workers in (1, 2, 8):
        result = await SweepRunner(config, workers=workers).run()
        csv_path, _ = result.write(tmp_path / f"w{workers}")
        written.append(csv_path.read_bytes())
    assert written[0] == written[1] == written[2]


@pytest.mark.asyncio
async def test_failed_point_is_recorded(mocker):
    original = experiment.run_experiment

    def flaky(config, dense=None):
        if config.kappa_2tau == 0.5:
            raise NumericalError("Non-finite covariance", time=3.0)
        return original(config, dense=dense)

    mocker.patch("critcycle.harness.sweep.run_experiment", side_effect=flaky)
    result = await SweepRunner(_config(kappa_2tau=[0.0, 0.5]), workers=1).run()

    assert result.failed == 1
    failed = result.table[result.table["status"] == "error"]
    assert len(failed) == 1
    assert failed["error"].iloc[0] == "Non-finite covariance"
    assert np.isnan(failed["N"].iloc[0])
    assert result.summary["points"][1]["status"] == "error"


@pytest.mark.asyncio
async def test_single_point_sweep_matches_run():
    config = _config(kappa_2tau=[0.25])
    result = await SweepRunner(config, workers=1).run()
    direct = cycle_records(run_experiment(config.with_values(kappa_2tau=0.25)))
    for column in RUN_COLUMNS:
        assert np.array_equal(result.table[column].to_numpy(), direct[column].to_numpy())


@pytest.mark.asyncio
async def test_sweep_without_axes_runs_one_point():
    result = await SweepRunner(ExperimentConfig(cycles=2), workers=1).run()
    assert len(result.outcomes) == 1
    assert list(result.table.columns[:3]) == ["m", "status", "error"]


def test_run_point_catches_library_errors(mocker):
    mocker.patch("critcycle.harness.sweep.run_experiment", side_effect=NumericalError("bad"))
    outcome = run_point(3, {"n_th": 1.0}, _config())
    assert not outcome.ok
    assert outcome.index == 3
    assert outcome.error == "bad"


def test_default_workers(monkeypatch):
    monkeypatch.delenv("CRITCYCLE_WORKERS", raising=False)
    assert default_workers() == 1
    monkeypatch.setenv("CRITCYCLE_WORKERS", "4")
    assert default_workers() == 4
