"""
Covariance propagation under a coupling schedule, noiseless or dissipative.

The covariance matrix obeys the time-dependent Lyapunov equation

    Ṙ = W̃R + RW̃ᵀ + F,   W̃ = [[−κ/2, ω(1−g²)], [−ω, −κ/2]],   F = κ(2N_th+1)·I.

Both cases use classical fixed-step RK4. Because the drift is linear, one RK4 step is
an affine map, and the grid is aligned with the ramp kinks (every multiple of τ), so
the maps of one cycle repeat for all cycles and are built once.

Dissipative runs integrate the three independent entries y = (R₀₀, R₀₁, R₁₁).
Noiseless runs integrate the symplectic matrix Ṡ = W̃S instead and form
R = S·R(0)·Sᵀ. Entries of R grow like e^{2|s|}, so det(R) and R⁻¹ recomputed from
them lose every digit after a dozen phase-matched cycles; S grows only like e^{|s|},
and det S is carried as the product of the per-step determinants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from critcycle.core.gaussian import (
    CovarianceState,
    SqueezingDecomposition,
    boson_numbers,
    purities_from_det,
    squeezing_decomposition,
)
from critcycle.core.protocol import ProtocolSchedule, g_of_t
from critcycle.errors import InvalidParameterError, NumericalError
from critcycle.observability.logger import get_logger, traced

logger = get_logger(__name__)

DEFAULT_STEP_DIVISOR = 5000
MAX_STEP_OMEGA = 0.002
_STEP_LIMIT_DIVISOR = 1000
_STEP_LIMIT_OMEGA = 0.01


class NoiseParams(BaseModel):
    """Thermal environment: coupling rate κ (units of ω) and occupation N_th."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kappa: float = Field(default=0.0, ge=0.0)
    n_th: float = Field(default=0.0, ge=0.0)

    @classmethod
    def from_inverse_temperature(cls, kappa: float, beta: float, omega: float) -> "NoiseParams":
        """Environment at inverse temperature β: N_th = 1/(e^{βω} − 1)."""
        if beta <= 0 or omega <= 0:
            raise InvalidParameterError(f"beta and omega must be positive, got beta={beta!r}, omega={omega!r}")
        return cls(kappa=kappa, n_th=1.0 / math.expm1(beta * omega))

    @property
    def diffusion(self) -> float:
        return self.kappa * (2.0 * self.n_th + 1.0)

    @property
    def is_noiseless(self) -> bool:
        return self.kappa == 0.0


@dataclass(frozen=True)
class CycleSample:
    m: int
    t: float
    N: float
    s_mag: float
    theta: float
    purity: float
    var_minor: float
    var_major: float


@dataclass(frozen=True)
class Trajectory:
    """
    Covariance matrices on a uniform grid covering [0, T].

    ``determinants`` holds det(R) as known to the integrator; ``symplectic`` holds S(t)
    with R = S·R(0)·Sᵀ and is only present for noiseless runs.
    """

    times: np.ndarray
    covariances: np.ndarray
    couplings: np.ndarray
    schedule: ProtocolSchedule
    omega: float
    noise: NoiseParams
    step: float
    steps_per_cycle: int
    determinants: np.ndarray
    symplectic: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.times)

    def state(self, index: int) -> CovarianceState:
        return CovarianceState(self.covariances[index])

    def decomposition(self, index: int) -> SqueezingDecomposition:
        return squeezing_decomposition(self.state(index), det=float(self.determinants[index]))

    @property
    def initial(self) -> CovarianceState:
        return self.state(0)

    @property
    def final(self) -> CovarianceState:
        return self.state(-1)

    @property
    def boson_numbers(self) -> np.ndarray:
        return boson_numbers(self.covariances)

    @property
    def purities(self) -> np.ndarray:
        return purities_from_det(self.determinants)

    @property
    def boundary_indices(self) -> np.ndarray:
        """Grid indices of t = 2mτ for m = 0 … cycles."""
        return np.arange(self.schedule.cycles + 1) * self.steps_per_cycle


def drift_matrices(g: float, omega: float, noise: Optional[NoiseParams] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Drift W̃ and diffusion F of the Lyapunov equation at coupling *g*."""
    if omega <= 0:
        raise InvalidParameterError(f"omega must be positive, got {omega!r}")
    noise = noise or NoiseParams()
    half_kappa = 0.5 * noise.kappa
    drift = np.array([[-half_kappa, omega * (1.0 - g * g)], [-omega, -half_kappa]])
    return drift, noise.diffusion * np.eye(2)


def _vech_generator(g: np.ndarray, omega: float, kappa: float) -> np.ndarray:
    """Lyapunov operator restricted to (R₀₀, R₀₁, R₁₁), for an array of couplings."""
    stiffness = omega * (1.0 - np.asarray(g, dtype=float) ** 2)
    gen = np.zeros(stiffness.shape + (3, 3))
    gen[..., 0, 0] = -kappa
    gen[..., 0, 1] = 2.0 * stiffness
    gen[..., 1, 0] = -omega
    gen[..., 1, 1] = -kappa
    gen[..., 1, 2] = stiffness
    gen[..., 2, 1] = -2.0 * omega
    gen[..., 2, 2] = -kappa
    return gen


def _rk4_affine(a1: np.ndarray, a2: np.ndarray, a3: np.ndarray, f: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Classical RK4 step for y' = A(t)y + f written as y ↦ M·y + c.

    a1, a2, a3 hold A at t, t+h/2 and t+h for a batch of steps.
    """
    eye = np.broadcast_to(np.eye(a1.shape[-1]), a1.shape)
    k1 = a1
    k2 = a2 @ (eye + 0.5 * h * k1)
    k3 = a2 @ (eye + 0.5 * h * k2)
    k4 = a3 @ (eye + h * k3)
    transfer = eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    j1 = np.broadcast_to(f, a1.shape[:-1])
    j2 = np.einsum("...ij,...j->...i", a2, 0.5 * h * j1) + f
    j3 = np.einsum("...ij,...j->...i", a2, 0.5 * h * j2) + f
    j4 = np.einsum("...ij,...j->...i", a3, h * j3) + f
    offset = (h / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
    return transfer, offset


def default_step(tau: float, omega: float, divisor: int = DEFAULT_STEP_DIVISOR) -> float:
    """Default RK4 step, τ/divisor capped at 0.002/ω."""
    return min(tau / divisor, MAX_STEP_OMEGA / omega)


def aligned_grid(tau: float, step: float) -> Tuple[int, float]:
    """Number of steps per half-cycle and the effective step τ/n ≤ *step*."""
    n_half = max(1, math.ceil(round(tau / step, 9)))
    return n_half, tau / n_half


def check_step(tau: float, omega: float, step: float) -> None:
    limit = min(tau / _STEP_LIMIT_DIVISOR, _STEP_LIMIT_OMEGA / omega)
    if not 0 < step <= limit * (1.0 + 1e-12):
        raise InvalidParameterError(f"Step {step!r} outside (0, {limit!r}] = (0, min(tau/1000, 0.01/omega)]")


def _vech(R: np.ndarray) -> np.ndarray:
    return np.array([R[0, 0], R[0, 1], R[1, 1]], dtype=float)


def _unvech(y: np.ndarray) -> np.ndarray:
    R = np.empty(y.shape[:-1] + (2, 2))
    R[..., 0, 0] = y[..., 0]
    R[..., 0, 1] = y[..., 1]
    R[..., 1, 0] = y[..., 1]
    R[..., 1, 1] = y[..., 2]
    return R


def _hamiltonian_drift(g: np.ndarray, omega: float) -> np.ndarray:
    """Noiseless W̃ for an array of couplings."""
    stiffness = omega * (1.0 - np.asarray(g, dtype=float) ** 2)
    drift = np.zeros(stiffness.shape + (2, 2))
    drift[..., 0, 1] = stiffness
    drift[..., 1, 0] = -omega
    return drift


def _abort_if_non_finite(block: np.ndarray, first_index: int, h: float, cycle: int) -> None:
    finite = np.all(np.isfinite(block.reshape(len(block), -1)), axis=1)
    if not np.all(finite):
        time = (first_index + int(np.argmin(finite))) * h
        raise NumericalError(f"Non-finite covariance at t={time!r} (cycle {cycle + 1})", time=time)


def _propagate_lyapunov(
    initial: np.ndarray, transfer: np.ndarray, offset: np.ndarray, cycles: int, h: float
) -> Tuple[np.ndarray, np.ndarray]:
    per_cycle = len(transfer)
    ys = np.empty((per_cycle * cycles + 1, 3))
    y = _vech(initial)
    ys[0] = y
    index = 0
    for cycle in range(cycles):
        start = index
        for j in range(per_cycle):
            y = transfer[j] @ y + offset[j]
            index += 1
            ys[index] = y
        _abort_if_non_finite(ys[start : index + 1], start, h, cycle)
    return _unvech(ys), ys[:, 0] * ys[:, 2] - ys[:, 1] ** 2


def _propagate_symplectic(
    initial: np.ndarray, transfer: np.ndarray, cycles: int, h: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """S(t), R(t) and det R(t) on the grid for a noiseless run."""
    per_cycle = len(transfer)
    # S within one cycle, relative to its start
    partial = np.empty((per_cycle + 1, 2, 2))
    partial[0] = np.eye(2)
    for j in range(per_cycle):
        partial[j + 1] = transfer[j] @ partial[j]
    step_dets = transfer[:, 0, 0] * transfer[:, 1, 1] - transfer[:, 0, 1] * transfer[:, 1, 0]
    partial_dets = np.cumprod(step_dets)

    total = per_cycle * cycles
    S = np.empty((total + 1, 2, 2))
    det_S = np.empty(total + 1)
    S[0] = np.eye(2)
    det_S[0] = 1.0
    for cycle in range(cycles):
        start = cycle * per_cycle
        block = slice(start + 1, start + per_cycle + 1)
        S[block] = partial[1:] @ S[start]
        det_S[block] = partial_dets * det_S[start]
        _abort_if_non_finite(S[block], start + 1, h, cycle)

    L = S @ np.linalg.cholesky(initial)
    R = np.empty_like(L)
    R[:, 0, 0] = L[:, 0, 0] ** 2 + L[:, 0, 1] ** 2
    R[:, 1, 1] = L[:, 1, 0] ** 2 + L[:, 1, 1] ** 2
    R[:, 0, 1] = L[:, 0, 0] * L[:, 1, 0] + L[:, 0, 1] * L[:, 1, 1]
    R[:, 1, 0] = R[:, 0, 1]
    det_initial = initial[0, 0] * initial[1, 1] - initial[0, 1] * initial[1, 0]
    return S, R, det_initial * det_S**2


def evolve(
    initial: CovarianceState,
    schedule: ProtocolSchedule,
    omega: float = 1.0,
    noise: Optional[NoiseParams] = None,
    step: Optional[float] = None,
) -> Trajectory:
    """Integrate the covariance matrix over all cycles of *schedule*."""
    noise = noise or NoiseParams()
    if omega <= 0:
        raise InvalidParameterError(f"omega must be positive, got {omega!r}")
    if not initial.is_centered:
        raise InvalidParameterError("Propagation assumes zero first moments")
    tau = schedule.tau
    step = default_step(tau, omega) if step is None else step
    check_step(tau, omega, step)
    if omega * tau < 1.0:
        logger.warning("sub_threshold_cycle", omega_tau=omega * tau)

    n_half, h = aligned_grid(tau, step)
    per_cycle = 2 * n_half
    total = per_cycle * schedule.cycles

    with traced("evolve", cycles=schedule.cycles, omega_tau=omega * tau, kappa=noise.kappa, steps=total):
        first_cycle = schedule.model_copy(update={"cycles": 1})
        nodes = np.arange(per_cycle + 1) * h
        nodes[-1] = first_cycle.duration
        g_nodes = g_of_t(first_cycle, nodes)
        g_mid = g_of_t(first_cycle, nodes[:-1] + 0.5 * h)

        symplectic = None
        if noise.is_noiseless:
            drift_nodes = _hamiltonian_drift(g_nodes, omega)
            transfer, _ = _rk4_affine(drift_nodes[:-1], _hamiltonian_drift(g_mid, omega), drift_nodes[1:], np.zeros(2), h)
            symplectic, covariances, determinants = _propagate_symplectic(initial.R, transfer, schedule.cycles, h)
        else:
            gen_nodes = _vech_generator(g_nodes, omega, noise.kappa)
            gen_mid = _vech_generator(g_mid, omega, noise.kappa)
            forcing = np.array([noise.diffusion, 0.0, noise.diffusion])
            transfer, offset = _rk4_affine(gen_nodes[:-1], gen_mid, gen_nodes[1:], forcing, h)
            covariances, determinants = _propagate_lyapunov(initial.R, transfer, offset, schedule.cycles, h)

        times = np.arange(total + 1) * h
        times[-1] = schedule.duration
        couplings = np.concatenate([np.tile(g_nodes[:-1], schedule.cycles), g_nodes[-1:]])

    trajectory = Trajectory(
        times=times,
        covariances=covariances,
        couplings=couplings,
        schedule=schedule,
        omega=omega,
        noise=noise,
        step=h,
        steps_per_cycle=per_cycle,
        determinants=determinants,
        symplectic=symplectic,
    )
    logger.debug(
        "evolve_done",
        steps=total,
        step=h,
        final_N=float(trajectory.boson_numbers[-1]),
        omega_tau=omega * tau,
        kappa=noise.kappa,
    )
    return trajectory


def cycle_samples(trajectory: Trajectory) -> List[CycleSample]:
    """Occupation, squeezing and purity at every cycle boundary t = 2mτ, m ≥ 1."""
    numbers = trajectory.boson_numbers
    purity_values = trajectory.purities
    samples = []
    for m, index in enumerate(trajectory.boundary_indices[1:], start=1):
        squeeze = trajectory.decomposition(index)
        samples.append(
            CycleSample(
                m=m,
                t=float(trajectory.times[index]),
                N=float(numbers[index]),
                s_mag=squeeze.s_mag,
                theta=squeeze.theta,
                purity=float(purity_values[index]),
                var_minor=squeeze.minor_variance,
                var_major=squeeze.major_variance,
            )
        )
    return samples
