from .experiment import RunResult, run_experiment
from .sweep import SweepResult, SweepRunner
from .validation import ValidationReport, run_validation

__all__ = ["RunResult", "run_experiment", "SweepResult", "SweepRunner", "ValidationReport", "run_validation"]
