"""
Brute-force reference in a truncated Fock basis.

The mode is propagated with

    H(t) = ω a†a − (g(t)²ω/4)·p²,   p = i(a† − a),

whose Heisenberg equations reproduce the covariance drift used by the propagator.
Pure noiseless runs integrate the Schrödinger equation on a D-dimensional amplitude
vector; everything else integrates the vectorised Lindblad generator on D² entries
(column-stacking, vec(AρB) = (Bᵀ ⊗ A)·vec ρ). Both use fixed-step RK4 on the same
kink-aligned grid as the covariance propagator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np
from scipy import sparse

from critcycle.core.gaussian import CovarianceState
from critcycle.core.metrology import DerivativeConvention, perturbed_schedule
from critcycle.core.propagator import NoiseParams, aligned_grid, check_step, default_step
from critcycle.core.protocol import ProtocolSchedule, g_of_t
from critcycle.errors import ConvergenceError, InvalidParameterError, NumericalError, UnphysicalStateError
from critcycle.observability.logger import get_logger, traced

logger = get_logger(__name__)

MIN_DIM = 16
ORACLE_STEP_DIVISOR = 20000
ORACLE_EPS_REL = 1e-4
TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-12
EIGEN_TOL = 1e-9
TAIL_LIMIT = 1e-8
TAIL_FRACTION = 0.1
CONVERGENCE_TOL = 1e-6


@dataclass(frozen=True)
class FockState:
    """Truncated state: amplitude vector (pure) or D×D density matrix."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=complex)
        if data.ndim == 1:
            norm = float(np.vdot(data, data).real)
            if abs(norm - 1.0) > TRACE_TOL:
                raise UnphysicalStateError(f"Amplitude vector not normalised: norm²={norm!r}")
        elif data.ndim == 2 and data.shape[0] == data.shape[1]:
            trace = complex(np.trace(data))
            if abs(trace - 1.0) > TRACE_TOL:
                raise UnphysicalStateError(f"Density matrix trace {trace!r} differs from 1")
            if np.max(np.abs(data - data.conj().T)) > HERMITIAN_TOL:
                raise UnphysicalStateError("Density matrix is not Hermitian")
            lowest = float(np.linalg.eigvalsh(data)[0])
            if lowest < -EIGEN_TOL:
                raise UnphysicalStateError(f"Density matrix has negative eigenvalue {lowest!r}")
        else:
            raise UnphysicalStateError(f"Fock state data must be a vector or square matrix, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def populations(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.real(np.diag(self.data))

    def tail_population(self) -> float:
        """Population held by the top 10% of Fock levels."""
        cut = self.dim - max(1, math.ceil(TAIL_FRACTION * self.dim))
        return float(np.sum(self.populations()[cut:]))

    def expectation(self, op) -> complex:
        if self.is_pure:
            return complex(np.vdot(self.data, op @ self.data))
        return complex(np.sum(op.T.multiply(self.data)) if sparse.issparse(op) else np.trace(op @ self.data))


def fock_vacuum(dim: int) -> FockState:
    return fock_number(0, dim)


def fock_number(k: int, dim: int) -> FockState:
    """Number state |k⟩ in a basis of *dim* levels."""
    if not 0 <= k < dim:
        raise InvalidParameterError(f"Level {k!r} outside the truncated basis of dimension {dim!r}")
    amplitudes = np.zeros(dim, dtype=complex)
    amplitudes[k] = 1.0
    return FockState(amplitudes)


def fock_thermal(n_beta: float, dim: int) -> FockState:
    """Thermal state with occupation *n_beta*, truncated and renormalised."""
    if n_beta < 0:
        raise InvalidParameterError(f"Thermal occupation must be non-negative, got {n_beta!r}")
    if n_beta == 0:
        return FockState(np.diag(fock_vacuum(dim).populations()).astype(complex))
    ratio = n_beta / (n_beta + 1.0)
    weights = ratio ** np.arange(dim)
    return FockState(np.diag(weights / weights.sum()).astype(complex))


def ladder_operators(dim: int) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Truncated annihilation and creation operators."""
    lowering = sparse.diags(np.sqrt(np.arange(1, dim, dtype=float)), offsets=1, shape=(dim, dim), format="csr")
    return lowering.astype(complex), lowering.T.conj().tocsr().astype(complex)


def quadratures(dim: int) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    a, ad = ladder_operators(dim)
    return (a + ad).tocsr(), (1j * (ad - a)).tocsr()


def _hamiltonian_parts(dim: int, omega: float) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Static part ω a†a and the coupling part −(ω/4)p² multiplying g²."""
    a, ad = ladder_operators(dim)
    _, p = quadratures(dim)
    return (omega * (ad @ a)).tocsr(), (-0.25 * omega * (p @ p)).tocsr()


def _liouvillian_parts(dim: int, omega: float, noise: NoiseParams) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    static, coupling = _hamiltonian_parts(dim, omega)
    eye = sparse.identity(dim, dtype=complex, format="csr")

    def commutator(h):
        return -1j * (sparse.kron(eye, h) - sparse.kron(h.T, eye))

    generator = commutator(static)
    a, ad = ladder_operators(dim)
    for jump, rate in ((a, noise.kappa * (noise.n_th + 1.0)), (ad, noise.kappa * noise.n_th)):
        if rate == 0.0:
            continue
        decay = (jump.conj().T @ jump).tocsr()
        generator = generator + 0.5 * rate * (
            2.0 * sparse.kron(jump.conj(), jump) - sparse.kron(eye, decay) - sparse.kron(decay.T, eye)
        )
    return generator.tocsr(), commutator(coupling).tocsr()


@dataclass(frozen=True)
class FockSample:
    t: float
    state: FockState


def _check_tail(state: FockState, time: float) -> None:
    tail = state.tail_population()
    if tail >= TAIL_LIMIT:
        raise ConvergenceError(
            f"Fock truncation D={state.dim} leaks population {tail:.3e} into the top levels at t={time!r}; "
            f"retry with D={2 * state.dim}",
            tail=tail,
            suggested_dim=2 * state.dim,
            time=time,
        )


def fock_samples(
    initial: FockState,
    schedule: ProtocolSchedule,
    omega: float = 1.0,
    noise: Optional[NoiseParams] = None,
    step: Optional[float] = None,
) -> Iterator[FockSample]:
    """Yield the state at every multiple of τ, starting with the initial state at t = 0."""
    noise = noise or NoiseParams()
    if initial.dim < MIN_DIM:
        raise InvalidParameterError(f"Fock dimension must be at least {MIN_DIM}, got {initial.dim}")
    if omega <= 0:
        raise InvalidParameterError(f"omega must be positive, got {omega!r}")
    tau = schedule.tau
    step = default_step(tau, omega, ORACLE_STEP_DIVISOR) if step is None else step
    check_step(tau, omega, step)
    n_half, h = aligned_grid(tau, step)

    first_cycle = schedule.model_copy(update={"cycles": 1})
    nodes = np.arange(2 * n_half + 1) * h
    nodes[-1] = first_cycle.duration
    g2_nodes = g_of_t(first_cycle, nodes) ** 2
    g2_mid = g_of_t(first_cycle, nodes[:-1] + 0.5 * h) ** 2

    dim = initial.dim
    pure = initial.is_pure and noise.is_noiseless
    if pure:
        static, coupling = _hamiltonian_parts(dim, omega)
        static, coupling = -1j * static, -1j * coupling
        y = np.array(initial.data)
    else:
        static, coupling = _liouvillian_parts(dim, omega, noise)
        y = initial.density_matrix().reshape(-1, order="F")

    def pack(vector: np.ndarray) -> FockState:
        if pure:
            return FockState(vector)
        rho = vector.reshape((dim, dim), order="F")
        return FockState(0.5 * (rho + rho.conj().T))

    yield FockSample(t=0.0, state=initial)
    with traced("evolve_fock", dim=dim, cycles=schedule.cycles, pure=pure, steps=2 * n_half * schedule.cycles):
        for half in range(2 * schedule.cycles):
            offset = (half % 2) * n_half
            for j in range(offset, offset + n_half):
                k1 = static @ y + g2_nodes[j] * (coupling @ y)
                z = y + 0.5 * h * k1
                k2 = static @ z + g2_mid[j] * (coupling @ z)
                z = y + 0.5 * h * k2
                k3 = static @ z + g2_mid[j] * (coupling @ z)
                z = y + h * k3
                k4 = static @ z + g2_nodes[j + 1] * (coupling @ z)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            time = (half + 1) * tau
            if not np.all(np.isfinite(y)):
                raise NumericalError(f"Non-finite Fock amplitudes at t={time!r}", time=time)
            state = pack(y)
            _check_tail(state, time)
            yield FockSample(t=time, state=state)


def evolve_fock(
    initial: FockState,
    schedule: ProtocolSchedule,
    omega: float = 1.0,
    noise: Optional[NoiseParams] = None,
    step: Optional[float] = None,
) -> FockState:
    """State at T = 2mτ; the tail check runs at every multiple of τ."""
    last = None
    for sample in fock_samples(initial, schedule, omega, noise, step):
        last = sample
    logger.debug("evolve_fock_done", dim=initial.dim, cycles=schedule.cycles, tail=last.state.tail_population())
    return last.state


def covariance_of(state: FockState) -> CovarianceState:
    """Quadrature covariance matrix and first moments of a Fock-basis state."""
    x, p = quadratures(state.dim)
    mean = np.array([state.expectation(x).real, state.expectation(p).real])
    xx = state.expectation(x @ x).real - mean[0] ** 2
    pp = state.expectation(p @ p).real - mean[1] ** 2
    xp = 0.5 * state.expectation(x @ p + p @ x).real - mean[0] * mean[1]
    return CovarianceState(np.array([[xx, xp], [xp, pp]]), mean=mean)


def gaussianity_witness(state: FockState) -> float:
    """Fourth-moment defect ⟨Δx⁴⟩ − 3⟨Δx²⟩², zero for any Gaussian state."""
    x, _ = quadratures(state.dim)
    shift = state.expectation(x).real
    dx = (x - shift * sparse.identity(state.dim, format="csr")).tocsr()
    dx2 = (dx @ dx).tocsr()
    return state.expectation(dx2 @ dx2).real - 3.0 * state.expectation(dx2).real ** 2


def _sqrt_psd(rho: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(rho)
    if values[0] < -EIGEN_TOL:
        raise UnphysicalStateError(f"Density matrix has negative eigenvalue {float(values[0])!r}")
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.conj().T


def fidelity(first: FockState, second: FockState) -> float:
    """Root fidelity Tr√(√ρ₁ ρ₂ √ρ₁)."""
    if first.dim != second.dim:
        raise InvalidParameterError(f"Dimension mismatch: {first.dim} vs {second.dim}")
    if first.is_pure and second.is_pure:
        return float(abs(np.vdot(first.data, second.data)))
    root = _sqrt_psd(first.density_matrix())
    inner = root @ second.density_matrix() @ root
    values = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    if values[0] < -EIGEN_TOL:
        raise UnphysicalStateError(f"Fidelity operator has negative eigenvalue {float(values[0])!r}")
    return float(np.sum(np.sqrt(np.clip(values, 0.0, None))))


def bures_qfi(rho_minus: FockState, rho_plus: FockState, eps: float) -> float:
    """QFI from the Bures distance between the states at x ∓ ε: I = 4·(d_B/2ε)²."""
    if eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps!r}")
    distance_sq = max(0.0, 2.0 * (1.0 - min(fidelity(rho_minus, rho_plus), 1.0)))
    return distance_sq / eps**2


def oracle_qfi(
    initial: FockState,
    schedule: ProtocolSchedule,
    omega: float = 1.0,
    noise: Optional[NoiseParams] = None,
    eps_rel: float = ORACLE_EPS_REL,
    convention: DerivativeConvention = DerivativeConvention.FIXED_COUPLING,
    step: Optional[float] = None,
) -> float:
    """Bures-distance QFI for ω at T, with the same perturbation convention as the Gaussian path."""
    eps = eps_rel * omega
    step = default_step(schedule.tau, omega, ORACLE_STEP_DIVISOR) if step is None else step
    lower = evolve_fock(initial, perturbed_schedule(schedule, omega, omega - eps, convention), omega - eps, noise, step)
    upper = evolve_fock(initial, perturbed_schedule(schedule, omega, omega + eps, convention), omega + eps, noise, step)
    return bures_qfi(lower, upper, eps)


@dataclass(frozen=True)
class DimensionCheck:
    dim: int
    values: Dict[str, float]
    doubled: Dict[str, float]
    max_rel_change: float

    @property
    def converged(self) -> bool:
        return self.max_rel_change < CONVERGENCE_TOL


def _scalars(state: FockState) -> Dict[str, float]:
    cov = covariance_of(state)
    return {
        "N": 0.25 * (cov.R[0, 0] + cov.R[1, 1] - 2.0),
        "R00": float(cov.R[0, 0]),
        "R01": float(cov.R[0, 1]),
        "R11": float(cov.R[1, 1]),
    }


def dimension_convergence(
    initial: Callable[[int], FockState],
    dim: int,
    schedule: ProtocolSchedule,
    omega: float = 1.0,
    noise: Optional[NoiseParams] = None,
    step: Optional[float] = None,
) -> DimensionCheck:
    """Compare final-state scalars at truncations *dim* and 2·*dim*; *initial* builds the state per dimension."""
    values = _scalars(evolve_fock(initial(dim), schedule, omega, noise, step))
    doubled = _scalars(evolve_fock(initial(2 * dim), schedule, omega, noise, step))
    change = max(abs(values[k] - doubled[k]) / max(abs(doubled[k]), 1.0) for k in values)
    if change >= CONVERGENCE_TOL:
        logger.warning("fock_dimension_unconverged", dim=dim, max_rel_change=change)
    return DimensionCheck(dim=dim, values=values, doubled=doubled, max_rel_change=change)
