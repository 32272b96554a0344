from .schema import ExperimentConfig, SWEEPABLE
from .loader import apply_overrides, dump_config, load_config

__all__ = ["ExperimentConfig", "SWEEPABLE", "apply_overrides", "dump_config", "load_config"]
