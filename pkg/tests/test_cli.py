"""Tests for the critcycle command line."""

import json

import pytest
import yaml
from click.testing import CliRunner

from critcycle.cli import cli
from critcycle.errors import NumericalError
from critcycle.harness.output import read_csv
from critcycle.harness.validation import CheckResult, ValidationReport


@pytest.fixture
def runner():
    return CliRunner()


def test_print_config_defaults(runner):
    result = runner.invoke(cli, ["print-config"])
    assert result.exit_code == 0
    data = yaml.safe_load(result.output)
    assert data["tau_omega"] == 8.0
    assert data["convention"] == "fixed_coupling"


def test_print_config_with_file_and_overrides(runner, tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("cycles: 3\nn_th: 2.0\n")
    result = runner.invoke(cli, ["print-config", "--config", str(path), "--set", "cycles=4"])
    assert result.exit_code == 0
    data = yaml.safe_load(result.output)
    assert data["cycles"] == 4
    assert data["n_th"] == 2.0


@pytest.mark.parametrize(
    "args",
    [
        ["--set", "frequency=1"],
        ["--set", "kappa_2tau=-0.5"],
        ["--config", "/nonexistent/run.yaml"],
    ],
)
def test_configuration_errors_exit_2(runner, args):
    result = runner.invoke(cli, ["run"] + args)
    assert result.exit_code == 2
    assert "Config error" in result.output


def test_run_writes_outputs(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--set", "cycles=2", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "N_final" in result.output

    trajectory = tmp_path / "trajectory.csv"
    assert trajectory.read_text().startswith("# schema: critcycle.trajectory/1\n")
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["cycles"] == 2


def test_run_without_coupling_stays_in_vacuum(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--set", "g_tau=0", "--set", "cycles=2", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    table = read_csv(tmp_path / "trajectory.csv")
    assert (table["N"].abs() <= 1e-12).all()
    assert (table["Q_omega"].abs() <= 1e-8).all()


def test_dense_run(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--set", "cycles=1", "--dense", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(read_csv(tmp_path / "trajectory.csv")) == summary["steps"] + 1


def test_long_noiseless_run_succeeds(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--set", "cycles=20", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    table = read_csv(tmp_path / "trajectory.csv")
    assert len(table) == 20
    assert ((table["purity"] - 1.0).abs() <= 1e-7).all()
    assert (table["Q_omega"].diff().dropna() > 0).all()


def test_numerical_failure_exits_3(runner, mocker, tmp_path):
    mocker.patch(
        "critcycle.harness.experiment.run_experiment",
        side_effect=NumericalError("Non-finite covariance", time=1.5),
    )
    result = runner.invoke(cli, ["run", "--out", str(tmp_path)])
    assert result.exit_code == 3
    assert "t=1.5" in result.output


def test_sweep_failure_exits_4(runner, mocker, tmp_path):
    mocker.patch("critcycle.harness.sweep.run_experiment", side_effect=NumericalError("boom"))
    result = runner.invoke(
        cli,
        ["sweep", "--set", "cycles=2", "--set", "sweep.n_th=[0, 1]", "--workers", "1", "--out", str(tmp_path)],
    )
    assert result.exit_code == 4
    table = read_csv(tmp_path / "sweep.csv")
    assert list(table["status"]) == ["error", "error"]


def test_sweep_writes_grid(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["sweep", "--set", "cycles=2", "--set", "sweep.kappa_2tau=[0, 0.5]", "--workers", "1", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "sweep.csv").read_text().startswith("# schema: critcycle.sweep/1\n")
    summary = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert summary["axes"] == {"kappa_2tau": [0, 0.5]}
    assert summary["failed"] == 0


def test_validate_reports_failure(runner, mocker):
    report = ValidationReport(
        level="fast",
        results=[CheckResult(name="purity_conservation", passed=True, detail="ok"),
                 CheckResult(name="bound_dominance", passed=False, detail="I > I^B")],
    )
    mocker.patch("critcycle.harness.validation.run_validation", return_value=report)
    result = runner.invoke(cli, ["validate"])
    assert result.exit_code == 1
    assert "FAIL" in result.output
    assert "bound_dominance" in result.output


def test_validate_success(runner, mocker):
    report = ValidationReport(level="fast", results=[CheckResult(name="cycle_cap_arithmetic", passed=True, detail="ok")])
    mocked = mocker.patch("critcycle.harness.validation.run_validation", return_value=report)
    result = runner.invoke(cli, ["validate", "--level", "full"])
    assert result.exit_code == 0
    assert mocked.call_args.args[1] == "full"

