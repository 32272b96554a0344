"""
Coupling schedules g(t) and closed-form protocol analytics.

One cycle ramps the rescaled coupling from 0 to g_τ in a time τ and back to 0
at 2τ; m cycles are concatenated periodically, T = 2mτ. The critical point is g_c = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.integrate import quad

from critcycle.core.ramps import get_default_registry
from critcycle.errors import InvalidParameterError

LOG3 = math.log(3.0)
SINGLE_CYCLE_SQUEEZING = 0.5 * LOG3
_TIME_SLACK = 1e-12

ArrayLike = Union[float, np.ndarray]


class ProtocolSchedule(BaseModel):
    """Triangular cycle parameters: half-cycle τ, peak g_τ, cycle count m and ramp tag."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tau: float = Field(gt=0, description="Half-cycle duration, units of 1/omega")
    g_tau: float = Field(default=1.0, ge=0.0, le=1.0, description="Peak rescaled coupling")
    cycles: int = Field(default=1, ge=1, description="Number of concatenated cycles m")
    ramp: str = Field(default="linear", description="Registered ramp shape tag")

    @field_validator("ramp")
    @classmethod
    def ramp_registered(cls, value: str) -> str:
        if value not in get_default_registry():
            raise ValueError(f"Unknown ramp '{value}'. Registered: {get_default_registry().names()}")
        return value

    @property
    def duration(self) -> float:
        return 2.0 * self.cycles * self.tau

    def rescaled(self, factor: float) -> "ProtocolSchedule":
        """
        Copy with the peak coupling multiplied by *factor*.

        Used for ω-perturbed runs, where g_τ may exceed 1 by O(ε); the copy is
        deliberately not re-validated.
        """
        return self.model_copy(update={"g_tau": self.g_tau * factor})


def g_of_t(schedule: ProtocolSchedule, t: ArrayLike) -> ArrayLike:
    """Coupling at time(s) *t* ∈ [0, T], reduced modulo 2τ."""
    times = np.asarray(t, dtype=float)
    total = schedule.duration
    if np.any(times < -_TIME_SLACK * total) or np.any(times > total * (1.0 + _TIME_SLACK)):
        raise InvalidParameterError(f"Time outside the protocol window [0, {total}]: {t!r}")
    local = np.mod(np.clip(times, 0.0, None), 2.0 * schedule.tau) / schedule.tau
    u = np.where(local <= 1.0, local, 2.0 - local)
    profile = get_default_registry().get(schedule.ramp)
    values = schedule.g_tau * np.asarray(profile(u), dtype=float)
    return float(values) if values.ndim == 0 else values


@lru_cache(maxsize=None)
def phase_coefficient(ramp: str = "linear") -> float:
    """ν = −2∫₀¹ √(1 − φ(u)²) du for the registered ramp φ."""
    profile = get_default_registry().get(ramp)
    integral, _ = quad(lambda u: math.sqrt(max(0.0, 1.0 - float(profile(u)) ** 2)), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    return -2.0 * integral


def fold_angle(angle: float) -> float:
    """Fold *angle* into (−π, π]."""
    folded = math.fmod(angle + math.pi, 2.0 * math.pi)
    if folded <= 0.0:
        folded += 2.0 * math.pi
    return folded - math.pi


def phase_prediction(omega_tau: float, ramp: str = "linear", fold: bool = True) -> float:
    """Predicted squeezing angle after one cycle, θ = ν·ωτ + π/2."""
    if omega_tau <= 0:
        raise InvalidParameterError(f"omega*tau must be positive, got {omega_tau!r}")
    theta = phase_coefficient(ramp) * omega_tau + 0.5 * math.pi
    return fold_angle(theta) if fold else theta


@dataclass(frozen=True)
class PhaseMatch:
    matched: bool
    distance: float
    nearest: float


def is_phase_matched(omega_tau: float, tolerance: float = 1e-2) -> PhaseMatch:
    """Whether ωτ lies within *tolerance* of an even integer 2n, n ≥ 1."""
    if omega_tau <= 0 or tolerance <= 0:
        raise InvalidParameterError(f"omega*tau and tolerance must be positive, got {omega_tau!r}, {tolerance!r}")
    n = max(1, round(omega_tau / 2.0))
    nearest = 2.0 * n
    distance = abs(omega_tau - nearest)
    return PhaseMatch(matched=distance <= tolerance, distance=distance, nearest=nearest)


def nm_prediction(m: int, n_beta: float = 0.0, squeezing: float = SINGLE_CYCLE_SQUEEZING) -> float:
    """
    Occupation after *m* phase-matched cycles from a thermal state with N_β bosons.

    N_m = ½((2N_β+1)·cosh(2m|s|) − 1); |s| defaults to log(3)/2.
    """
    if m < 0 or n_beta < 0:
        raise InvalidParameterError(f"m and n_beta must be non-negative, got m={m!r}, n_beta={n_beta!r}")
    return 0.5 * ((2.0 * n_beta + 1.0) * math.cosh(2.0 * m * squeezing) - 1.0)


def finite_time_squeezing(omega_tau: float) -> float:
    """Single-cycle squeezing at g_τ = 1 including the finite-time correction (27ωτ)^{−2/3}."""
    if omega_tau <= 0:
        raise InvalidParameterError(f"omega*tau must be positive, got {omega_tau!r}")
    return SINGLE_CYCLE_SQUEEZING - (27.0 * omega_tau) ** (-2.0 / 3.0)


def max_cycles(eta: float) -> int:
    """
    Largest cycle count m* = ⌊log₃ η⌋ before finite-size corrections matter.

    Often rounded to m* ≈ 10 at η ≈ 10⁶, although ⌊log₃ 10⁶⌋ = 12.
    """
    if not eta > 1:
        raise InvalidParameterError(f"Effective system size must exceed 1, got {eta!r}")
    k = int(math.floor(math.log(eta) / LOG3))
    # float log can land one below an exact power of three
    while 3 ** (k + 1) <= eta:
        k += 1
    while k > 0 and 3**k > eta:
        k -= 1
    return k
