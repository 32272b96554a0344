"""
CLI entry point — the `critcycle` command.

Commands:
  critcycle run          [--config PATH] [--set k=v ...] [--out DIR] [--dense]
  critcycle sweep        [--config PATH] [--set k=v ...] [--out DIR] [--workers N]
  critcycle validate     [--config PATH] [--set k=v ...] [--level fast|full]
  critcycle print-config [--config PATH] [--set k=v ...]

Exit codes: 0 success, 1 failed validation check, 2 configuration or parameter
error, 3 numerical failure, 4 at least one failed sweep point.
"""

from __future__ import annotations

import asyncio
import sys
from typing import Tuple

import click

from critcycle.errors import InvalidParameterError, NumericalError
from critcycle.observability.logger import get_logger, setup_telemetry

logger = get_logger(__name__)

EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SWEEP_FAILED = 4


# ---------------------------------------------------------------------------
# Root group
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(package_name="critcycle")
def cli():
    """critcycle — critical quantum metrology with cyclic quenches."""
    setup_telemetry()


def config_options(fn):
    fn = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override a config key (repeatable); values parse as YAML.",
    )(fn)
    fn = click.option("--config", "config_path", default=None, type=click.Path(), help="YAML or JSON config file.")(fn)
    return fn


def _load(config_path, overrides: Tuple[str, ...]):
    from critcycle.config.loader import load_config

    try:
        return load_config(config_path, overrides)
    except InvalidParameterError as exc:
        click.secho(f"Config error: {exc}", fg="red", err=True)
        sys.exit(EXIT_CONFIG)


def _fail(exc: Exception) -> None:
    if isinstance(exc, NumericalError):
        where = f" (t={exc.time!r})" if exc.time is not None else ""
        click.secho(f"Numerical failure{where}: {exc}", fg="red", err=True)
        sys.exit(EXIT_NUMERICAL)
    click.secho(f"Invalid parameters: {exc}", fg="red", err=True)
    sys.exit(EXIT_CONFIG)


# ---------------------------------------------------------------------------
# critcycle run
# ---------------------------------------------------------------------------

@cli.command()
@config_options
@click.option("--out", "out_dir", default=None, type=click.Path(), help="Output directory (default: out_dir key).")
@click.option("--dense", is_flag=True, default=False, help="Emit every grid step, not just cycle boundaries.")
def run(config_path, overrides, out_dir, dense):
    """Run one protocol configuration and write trajectory.csv + summary.json."""
    from critcycle.harness.experiment import run_experiment

    config = _load(config_path, overrides)
    try:
        result = run_experiment(config, dense=dense or config.dense)
    except (InvalidParameterError, NumericalError) as exc:
        _fail(exc)
    csv_path, json_path = result.write(out_dir)

    fit = result.summary["alpha_fit"]
    click.secho(f"Wrote {csv_path} and {json_path}", fg="green")
    click.echo(f"N_final = {result.summary['N_final']:.6g}")
    if fit is not None:
        click.echo(f"alpha   = {fit['alpha']:.4f} (window {fit['window']}, residual {fit['residual']:.2e})")


# ---------------------------------------------------------------------------
# critcycle sweep
# ---------------------------------------------------------------------------

@cli.command()
@config_options
@click.option("--out", "out_dir", default=None, type=click.Path(), help="Output directory (default: out_dir key).")
@click.option("--workers", default=1, type=click.IntRange(min=1), envvar="CRITCYCLE_WORKERS", show_default=True)
def sweep(config_path, overrides, out_dir, workers):
    """Evaluate the sweep grid in parallel and write sweep.csv in grid order."""
    from critcycle.harness.sweep import SweepRunner

    config = _load(config_path, overrides)
    if not config.sweep:
        click.secho("No sweep axes configured; running a single point.", fg="yellow", err=True)
    result = asyncio.run(SweepRunner(config, workers=workers).run())
    csv_path, _ = result.write(out_dir or config.out_dir)

    click.secho(f"Wrote {csv_path} ({len(result.outcomes)} points)", fg="green")
    if result.failed:
        click.secho(f"{result.failed} sweep point(s) failed; see the status column.", fg="red", err=True)
        sys.exit(EXIT_SWEEP_FAILED)


# ---------------------------------------------------------------------------
# critcycle validate
# ---------------------------------------------------------------------------

@cli.command()
@config_options
@click.option("--level", default="fast", type=click.Choice(["fast", "full"]), show_default=True)
def validate(config_path, overrides, level):
    """Run the invariant suite (fast) or the suite plus oracle and scaling checks (full)."""
    from critcycle.harness.validation import run_validation

    config = _load(config_path, overrides)
    report = run_validation(config, level)

    width = max(len(r.name) for r in report.results)
    for r in report.results:
        status = click.style("PASS", fg="green") if r.passed else click.style("FAIL", fg="red")
        click.echo(f"{status}  {r.name:<{width}}  {r.detail}  ({r.seconds:.1f}s)")
    if not report.passed:
        click.secho(f"\nFailed checks: {', '.join(report.failed)}", fg="red")
        sys.exit(EXIT_VALIDATION_FAILED)
    click.secho(f"\nAll {len(report.results)} {level} checks passed.", fg="green")


# ---------------------------------------------------------------------------
# critcycle print-config
# ---------------------------------------------------------------------------

@cli.command("print-config")
@config_options
def print_config(config_path, overrides):
    """Print the effective configuration (file + overrides) as YAML."""
    from critcycle.config.loader import dump_config

    click.echo(dump_config(_load(config_path, overrides)), nl=False)


if __name__ == "__main__":
    cli()
