"""Pydantic model for experiment configuration."""

from __future__ import annotations

import itertools
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from critcycle.core.gaussian import CovarianceState, thermal_state
from critcycle.core.metrology import DerivativeConvention
from critcycle.core.propagator import DEFAULT_STEP_DIVISOR, MAX_STEP_OMEGA, NoiseParams
from critcycle.core.protocol import ProtocolSchedule
from critcycle.core.ramps import get_default_registry

SWEEPABLE = ("omega", "tau_omega", "g_tau", "cycles", "kappa_2tau", "n_th", "n_beta", "eps_rel", "step_divisor")
MAX_SWEEP_AXES = 2


class ExperimentConfig(BaseModel):
    """
    One protocol run, or a grid of runs when ``sweep`` names axes.

    Physical parameters are exposed as the dimensionless groups ωτ and 2τκ.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    omega: float = Field(default=1.0, gt=0, description="Mode frequency; sets the units")
    tau_omega: float = Field(default=8.0, gt=0, le=100, description="Half-cycle duration as ωτ")
    g_tau: float = Field(default=1.0, ge=0, le=1, description="Peak rescaled coupling")
    cycles: int = Field(default=10, ge=1, le=64, description="Number of cycles m")
    kappa_2tau: float = Field(default=0.0, ge=0, le=10, description="Dissipation strength 2τκ")
    n_th: float = Field(default=0.0, ge=0, description="Environment occupation N_th")
    n_beta: float = Field(default=0.0, ge=0, description="Initial thermal occupation N_β")
    eps_rel: float = Field(default=1e-8, gt=0, le=1e-3, description="Finite-difference step ε/ω")
    step_divisor: int = Field(default=DEFAULT_STEP_DIVISOR, ge=1000, le=1_000_000, description="Integration step τ/divisor")
    convention: DerivativeConvention = Field(default=DerivativeConvention.FIXED_COUPLING)
    ramp: str = Field(default="linear", description="Registered ramp shape tag")
    fit_window: Tuple[int, int] = Field(default=(5, 10), description="Inclusive cycle window for the α fit")
    eta: Optional[float] = Field(default=None, gt=1, description="Effective system size; caps the useful cycle count")
    sweep: Dict[str, List[float]] = Field(default_factory=dict, description="Sweep axes: parameter -> values")
    out_dir: Path = Field(default=Path("results"))
    dense: bool = Field(default=False, description="Emit every grid step, not just cycle boundaries")
    seed: Optional[int] = Field(default=None, description="Reserved; all computations are deterministic")

    @field_validator("ramp")
    @classmethod
    def ramp_registered(cls, value: str) -> str:
        if value not in get_default_registry():
            raise ValueError(f"Unknown ramp '{value}'. Registered: {get_default_registry().names()}")
        return value

    @field_validator("fit_window")
    @classmethod
    def window_ordered(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        lo, hi = value
        if not 1 <= lo < hi:
            raise ValueError(f"fit_window must satisfy 1 <= lo < hi, got {list(value)}")
        return value

    @model_validator(mode="after")
    def validate_sweep(self) -> "ExperimentConfig":
        if len(self.sweep) > MAX_SWEEP_AXES:
            raise ValueError(f"At most {MAX_SWEEP_AXES} sweep axes are supported, got {list(self.sweep)}")
        for axis, values in self.sweep.items():
            if axis not in SWEEPABLE:
                raise ValueError(f"'{axis}' is not sweepable. Sweepable: {list(SWEEPABLE)}")
            if not values:
                raise ValueError(f"Sweep axis '{axis}' has no values")
        if self.sweep:
            # every grid point must be a valid configuration on its own
            for point in self.grid():
                self.with_values(**point)
        return self

    # ------------------------------------------------------------------
    # Derived physical objects
    # ------------------------------------------------------------------

    @property
    def tau(self) -> float:
        return self.tau_omega / self.omega

    @property
    def kappa(self) -> float:
        return self.kappa_2tau / (2.0 * self.tau)

    @property
    def step(self) -> float:
        return min(self.tau / self.step_divisor, MAX_STEP_OMEGA / self.omega)

    def schedule(self) -> ProtocolSchedule:
        return ProtocolSchedule(tau=self.tau, g_tau=self.g_tau, cycles=self.cycles, ramp=self.ramp)

    def noise(self) -> NoiseParams:
        return NoiseParams(kappa=self.kappa, n_th=self.n_th)

    def initial_state(self) -> CovarianceState:
        return thermal_state(self.n_beta)

    # ------------------------------------------------------------------
    # Sweeps
    # ------------------------------------------------------------------

    def grid(self) -> Iterator[Dict[str, Any]]:
        """Sweep points in row-major order of the axes as declared."""
        axes = list(self.sweep)
        for combo in itertools.product(*(self.sweep[a] for a in axes)):
            yield dict(zip(axes, combo))

    def with_values(self, **updates: Any) -> "ExperimentConfig":
        """Validated copy with *updates* applied and the sweep removed."""
        data = self.model_dump()
        data.update(updates)
        data["sweep"] = {}
        return ExperimentConfig.model_validate(data)
