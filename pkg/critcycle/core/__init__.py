from .gaussian import CovarianceState, SqueezingDecomposition, squeezing_decomposition, thermal_state, vacuum_state
from .metrology import DerivativeConvention, MetrologyReport, analyze, fit_alpha, qfi_bound, qfi_frequency
from .propagator import NoiseParams, Trajectory, cycle_samples, evolve
from .protocol import ProtocolSchedule, g_of_t
from .ramps import RampRegistry, register_ramp

__all__ = [
    "CovarianceState",
    "SqueezingDecomposition",
    "squeezing_decomposition",
    "thermal_state",
    "vacuum_state",
    "DerivativeConvention",
    "MetrologyReport",
    "analyze",
    "fit_alpha",
    "qfi_bound",
    "qfi_frequency",
    "NoiseParams",
    "Trajectory",
    "cycle_samples",
    "evolve",
    "ProtocolSchedule",
    "g_of_t",
    "RampRegistry",
    "register_ramp",
]
