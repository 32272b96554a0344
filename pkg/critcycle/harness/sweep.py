"""
Parameter sweeps over one or two configuration axes.

Grid points are independent runs. They are dispatched to a worker pool from an
asyncio loop and gathered in grid order, so the emitted table does not depend on
the number of workers or on completion order.
"""

from __future__ import annotations

import asyncio
import os
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from critcycle.config.schema import ExperimentConfig
from critcycle.errors import CritcycleError
from critcycle.harness.experiment import cycle_records, run_experiment
from critcycle.harness.output import RUN_COLUMNS, schema_tag, write_csv, write_json
from critcycle.observability.logger import get_logger, log_context, traced

logger = get_logger(__name__)


@dataclass(frozen=True)
class PointOutcome:
    index: int
    point: Dict[str, Any]
    records: Optional[pd.DataFrame]
    alpha: Optional[float]
    alpha_bound: Optional[float]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_point(index: int, point: Dict[str, Any], config: ExperimentConfig) -> PointOutcome:
    """Evaluate one grid point; library errors become a failed outcome instead of propagating."""
    with log_context(sweep_index=index), traced("sweep_point", index=index, **point):
        try:
            result = run_experiment(config.with_values(**point), dense=False)
        except CritcycleError as exc:
            logger.warning("sweep_point_failed", index=index, point=point, error=str(exc))
            return PointOutcome(index=index, point=point, records=None, alpha=None, alpha_bound=None, error=str(exc))
    fit, bound_fit = result.report.alpha_fit, result.report.alpha_bound
    return PointOutcome(
        index=index,
        point=point,
        records=cycle_records(result),
        alpha=None if fit is None else fit.alpha,
        alpha_bound=None if bound_fit is None else bound_fit.alpha,
    )


@dataclass
class SweepResult:
    table: pd.DataFrame
    summary: Dict[str, Any]
    outcomes: List[PointOutcome]

    @property
    def failed(self) -> int:
        return sum(not o.ok for o in self.outcomes)

    def write(self, out_dir: Path) -> Tuple[Path, Path]:
        out_dir = Path(out_dir)
        csv_path = write_csv(self.table, out_dir / "sweep.csv", kind="sweep")
        json_path = write_json(self.summary, out_dir / "sweep_summary.json")
        logger.info("sweep_written", csv=str(csv_path), summary=str(json_path), rows=len(self.table))
        return csv_path, json_path


def default_workers() -> int:
    return int(os.environ.get("CRITCYCLE_WORKERS", "1"))


class SweepRunner:
    """Runs every grid point of ``config.sweep`` and merges the results in grid order."""

    def __init__(self, config: ExperimentConfig, workers: Optional[int] = None) -> None:
        self.config = config
        self.workers = max(1, workers if workers is not None else default_workers())
        self.axes = list(config.sweep)
        self.points = list(config.grid()) if config.sweep else [{}]

    def _executor(self) -> Executor:
        if self.workers == 1:
            return ThreadPoolExecutor(max_workers=1)
        return ProcessPoolExecutor(max_workers=min(self.workers, len(self.points)))

    async def run(self) -> SweepResult:
        logger.info("sweep_start", axes=self.axes, points=len(self.points), workers=self.workers)
        loop = asyncio.get_running_loop()
        with self._executor() as pool:
            futures = [
                loop.run_in_executor(pool, run_point, index, point, self.config)
                for index, point in enumerate(self.points)
            ]
            outcomes = await asyncio.gather(*futures)
        outcomes = sorted(outcomes, key=lambda o: o.index)
        result = SweepResult(table=self._table(outcomes), summary=self._summary(outcomes), outcomes=outcomes)
        logger.info("sweep_done", points=len(outcomes), failed=result.failed)
        return result

    def _table(self, outcomes: List[PointOutcome]) -> pd.DataFrame:
        frames = []
        for outcome in outcomes:
            if outcome.ok:
                frame = outcome.records.copy()
                frame.insert(1, "status", "ok")
                frame.insert(2, "error", "")
            else:
                frame = pd.DataFrame({"m": [np.nan], "status": ["error"], "error": [outcome.error]})
                for column in RUN_COLUMNS:
                    frame[column] = np.nan
            frame["alpha"] = np.nan if outcome.alpha is None else outcome.alpha
            frame["alpha_bound"] = np.nan if outcome.alpha_bound is None else outcome.alpha_bound
            for position, axis in enumerate(self.axes):
                frame.insert(position, axis, outcome.point[axis])
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def _summary(self, outcomes: List[PointOutcome]) -> Dict[str, Any]:
        return {
            "schema": schema_tag("sweep_summary"),
            "axes": {axis: list(self.config.sweep[axis]) for axis in self.axes},
            "workers": self.workers,
            "failed": sum(not o.ok for o in outcomes),
            "points": [
                {
                    "index": o.index,
                    **o.point,
                    "status": "ok" if o.ok else "error",
                    "alpha": o.alpha,
                    "alpha_bound": o.alpha_bound,
                    "error": o.error,
                }
                for o in outcomes
            ],
        }
