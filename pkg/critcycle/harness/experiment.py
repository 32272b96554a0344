"""
Single protocol run: trajectory, metrology and the tabular/summary outputs of ``critcycle run``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from critcycle.config.schema import ExperimentConfig
from critcycle.core.metrology import MetrologyReport, analyze, qfi_bound, qfi_bound_approx_at
from critcycle.core.propagator import cycle_samples
from critcycle.core.protocol import is_phase_matched, max_cycles, phase_prediction
from critcycle.harness.output import RUN_COLUMNS, schema_tag, write_csv, write_json
from critcycle.observability.logger import get_logger

logger = get_logger(__name__)


@dataclass
class RunResult:
    config: ExperimentConfig
    table: pd.DataFrame
    summary: Dict[str, Any]
    report: MetrologyReport = field(repr=False)

    def write(self, out_dir: Optional[Path] = None) -> Tuple[Path, Path]:
        """Write ``trajectory.csv`` and ``summary.json`` into *out_dir* (default: config.out_dir)."""
        target = Path(out_dir or self.config.out_dir)
        csv_path = write_csv(self.table, target / "trajectory.csv", kind="trajectory")
        json_path = write_json(self.summary, target / "summary.json")
        logger.info("run_written", csv=str(csv_path), summary=str(json_path), rows=len(self.table))
        return csv_path, json_path


def _cycle_table(config: ExperimentConfig, report: MetrologyReport) -> pd.DataFrame:
    trajectory = report.fisher.central
    samples = cycle_samples(trajectory)
    couplings = trajectory.couplings[trajectory.boundary_indices[1:]]
    return pd.DataFrame(
        {
            "t": [s.t for s in samples],
            "g": couplings,
            "N": [s.N for s in samples],
            "purity": [s.purity for s in samples],
            "s_mag": [s.s_mag for s in samples],
            "theta": [s.theta for s in samples],
            "Q_omega": report.Q_omega,
            "I_bound": report.I_bound,
            "I_bound_approx": report.I_bound_approx,
            "var_minor": [s.var_minor for s in samples],
            "var_major": [s.var_major for s in samples],
        },
        columns=RUN_COLUMNS,
    )


def _dense_table(config: ExperimentConfig, report: MetrologyReport) -> pd.DataFrame:
    trajectory = report.fisher.central
    decompositions = [trajectory.decomposition(i) for i in range(len(trajectory))]
    return pd.DataFrame(
        {
            "t": trajectory.times,
            "g": trajectory.couplings,
            "N": trajectory.boson_numbers,
            "purity": trajectory.purities,
            "s_mag": [d.s_mag for d in decompositions],
            "theta": [d.theta for d in decompositions],
            "Q_omega": report.fisher.snr,
            "I_bound": qfi_bound(trajectory, dense=True),
            "I_bound_approx": qfi_bound_approx_at(config.tau, trajectory.times),
            "var_minor": [d.minor_variance for d in decompositions],
            "var_major": [d.major_variance for d in decompositions],
        },
        columns=RUN_COLUMNS,
    )


def _fit_summary(fit) -> Optional[Dict[str, Any]]:
    if fit is None:
        return None
    return {"alpha": fit.alpha, "residual": fit.residual, "window": list(fit.window)}


def run_experiment(config: ExperimentConfig, dense: Optional[bool] = None) -> RunResult:
    """Integrate, analyse and tabulate one configuration."""
    dense = config.dense if dense is None else dense
    started = time.perf_counter()
    logger.info(
        "run_start",
        omega_tau=config.tau_omega,
        cycles=config.cycles,
        kappa_2tau=config.kappa_2tau,
        n_th=config.n_th,
        n_beta=config.n_beta,
    )

    m_star = None
    if config.eta is not None:
        m_star = max_cycles(config.eta)
        if config.cycles > m_star:
            logger.warning("cycles_exceed_size_cap", cycles=config.cycles, m_star=m_star, eta=config.eta)

    report = analyze(
        config.initial_state(),
        config.schedule(),
        config.omega,
        config.noise(),
        eps_rel=config.eps_rel,
        convention=config.convention,
        window=config.fit_window,
        step=config.step,
        verify_eps=True,
    )
    table = _dense_table(config, report) if dense else _cycle_table(config, report)

    first = cycle_samples(report.fisher.central)[0]
    match = is_phase_matched(config.tau_omega)
    summary: Dict[str, Any] = {
        "schema": schema_tag("summary"),
        "config": config.model_dump(mode="json"),
        "alpha_fit": _fit_summary(report.alpha_fit),
        "alpha_bound": _fit_summary(report.alpha_bound),
        "phase_match": {
            "matched": match.matched,
            "distance": match.distance,
            "nearest": match.nearest,
            "predicted_theta": phase_prediction(config.tau_omega, config.ramp),
            "measured_theta_1": first.theta,
        },
        "m_star": m_star,
        "eps": {
            "eps": report.fisher.eps,
            "flagged": report.fisher.eps_flagged,
            "max_rel_change": report.fisher.eps_change,
        },
        "bound_dominated": report.bound_dominated,
        "N_final": float(report.fisher.central.boson_numbers[-1]),
        "Q_final": float(report.Q_omega[-1]),
        "steps": len(report.fisher.central) - 1,
        "step": report.fisher.central.step,
        "runtime_s": time.perf_counter() - started,
    }
    logger.info(
        "run_done",
        alpha=None if report.alpha_fit is None else round(report.alpha_fit.alpha, 4),
        N_final=summary["N_final"],
        runtime_s=round(summary["runtime_s"], 3),
    )
    return RunResult(config=config, table=table, summary=summary, report=report)


def cycle_records(result: RunResult) -> pd.DataFrame:
    """Per-cycle table with the cycle index, as used by sweeps."""
    table = _cycle_table(result.config, result.report) if result.config.dense else result.table.copy()
    table.insert(0, "m", np.arange(1, len(table) + 1))
    return table
