"""
Frequency estimation figures of merit.

The quantum Fisher information of a zero-mean Gaussian state with covariance R and
purity P reads

    I_ω = ½·Tr[(R⁻¹∂_ωR)²]/(1 + P²) + 2(∂_ωP)²/(1 − P⁴),

with the ω-derivatives taken by central differences over two trajectories at ω ± ε.
The second term vanishes for pure states and is dropped there. Noiseless runs have
constant purity, so the term is absent and the first one is evaluated through the
symplectic matrices of the three runs (see ``symplectic_qfi``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from multiprocessing import Pool
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from critcycle.core.gaussian import CovarianceState, vacuum_state
from critcycle.core.propagator import NoiseParams, Trajectory, default_step, evolve
from critcycle.core.protocol import LOG3, ProtocolSchedule
from critcycle.errors import InvalidParameterError, NumericalError
from critcycle.observability.logger import get_logger, traced

logger = get_logger(__name__)

DEFAULT_EPS_REL = 1e-8
DEFAULT_FIT_WINDOW = (5, 10)
PURE_STATE_THRESHOLD = 1.0 - 1e-9
EPS_CHANGE_LIMIT = 0.01
MAX_KAPPA_2TAU = 4.0
# relative QFI error tolerated before the covariance-based formula is reported as degraded
PRECISION_WARN_LEVEL = 1e-4


class DerivativeConvention(str, Enum):
    """What is held fixed while ω is perturbed."""

    FIXED_COUPLING = "fixed_coupling"  # physical λ fixed: g_τ scales as √(ω/ω')
    FIXED_RESCALED = "fixed_rescaled"  # rescaled g_τ fixed


def perturbed_schedule(
    schedule: ProtocolSchedule,
    omega: float,
    shifted_omega: float,
    convention: DerivativeConvention = DerivativeConvention.FIXED_COUPLING,
) -> ProtocolSchedule:
    """Schedule driving a mode of frequency *shifted_omega* with the same physical ramp."""
    if DerivativeConvention(convention) is DerivativeConvention.FIXED_RESCALED:
        return schedule
    return schedule.rescaled(math.sqrt(omega / shifted_omega))


@dataclass(frozen=True)
class FisherInformation:
    """QFI for ω on the trajectory grid, with the central run it was computed on."""

    times: np.ndarray
    values: np.ndarray
    central: Trajectory
    eps: float
    convention: DerivativeConvention
    eps_flagged: bool = False
    eps_change: Optional[float] = None

    @property
    def per_cycle(self) -> np.ndarray:
        """I_ω at t = 2mτ for m = 1 … cycles."""
        return self.values[self.central.boundary_indices[1:]]

    @property
    def snr(self) -> np.ndarray:
        """Q_ω = ω²·I_ω on the grid."""
        return self.central.omega**2 * self.values


def _inverse2(R: np.ndarray) -> np.ndarray:
    det = R[..., 0, 0] * R[..., 1, 1] - R[..., 0, 1] * R[..., 1, 0]
    return _adjugate2(R) / det[..., None, None]


def _adjugate2(M: np.ndarray) -> np.ndarray:
    adj = np.empty_like(M)
    adj[..., 0, 0] = M[..., 1, 1]
    adj[..., 1, 1] = M[..., 0, 0]
    adj[..., 0, 1] = -M[..., 0, 1]
    adj[..., 1, 0] = -M[..., 1, 0]
    return adj


def gaussian_qfi(R: np.ndarray, dR: np.ndarray, P: np.ndarray, dP: np.ndarray, drop_purity_term: bool = False) -> np.ndarray:
    """Gaussian QFI from stacked R, ∂R, P, ∂P (shapes (n,2,2) and (n,))."""
    generator = _inverse2(R) @ dR
    symmetric = 0.5 * np.einsum("...ij,...ji->...", generator, generator) / (1.0 + P**2)
    if drop_purity_term:
        return np.maximum(symmetric, 0.0)
    mixed = P <= PURE_STATE_THRESHOLD
    purity_term = np.zeros_like(symmetric)
    purity_term[mixed] = 2.0 * dP[mixed] ** 2 / (1.0 - P[mixed] ** 4)
    return np.maximum(symmetric + purity_term, 0.0)


def symplectic_qfi(
    S: np.ndarray, dS: np.ndarray, det_S: np.ndarray, initial: np.ndarray, P: np.ndarray
) -> np.ndarray:
    """
    QFI of R = S·R₀·Sᵀ when only S depends on ω (noiseless runs).

    With R₀ = LLᵀ and X = L⁻¹S⁻¹(∂S)L, R⁻¹∂R is similar to X + Xᵀ, so
    I_ω = ½·Tr[(X + Xᵀ)²]/(1 + P²). Unlike R⁻¹∂R this involves no cancellation
    between entries of size e^{4|s|}.
    """
    factor = np.linalg.cholesky(initial)
    inv_factor = np.linalg.inv(factor)
    X = inv_factor @ (_adjugate2(S) @ dS) @ factor / det_S[:, None, None]
    generator = X + np.swapaxes(X, -1, -2)
    return np.maximum(0.5 * np.einsum("...ij,...ji->...", generator, generator) / (1.0 + P**2), 0.0)


def _covariance_conditioning(trajectory: Trajectory) -> float:
    """Largest cond(R) on the grid; QFI from R⁻¹∂R loses about that factor of precision."""
    R = trajectory.covariances
    half_sum = 0.5 * (R[:, 0, 0] + R[:, 1, 1])
    lam_max = half_sum + np.hypot(0.5 * (R[:, 0, 0] - R[:, 1, 1]), R[:, 0, 1])
    return float(np.max(lam_max**2 / np.maximum(trajectory.determinants, 1.0)))


def _qfi_values(
    initial: CovarianceState,
    schedule: ProtocolSchedule,
    omega: float,
    noise: NoiseParams,
    eps: float,
    convention: DerivativeConvention,
    step: float,
) -> Tuple[np.ndarray, Trajectory]:
    central = evolve(initial, schedule, omega, noise, step)
    lower = evolve(initial, perturbed_schedule(schedule, omega, omega - eps, convention), omega - eps, noise, step)
    upper = evolve(initial, perturbed_schedule(schedule, omega, omega + eps, convention), omega + eps, noise, step)

    P = central.purities
    if central.symplectic is not None:
        dS = (upper.symplectic - lower.symplectic) / (2.0 * eps)
        det_S = np.sqrt(central.determinants / central.determinants[0])
        values = symplectic_qfi(central.symplectic, dS, det_S, initial.R, P)
    else:
        dR = (upper.covariances - lower.covariances) / (2.0 * eps)
        dP = (upper.purities - lower.purities) / (2.0 * eps)
        values = gaussian_qfi(central.covariances, dR, P, dP)
        conditioning = _covariance_conditioning(central)
        if conditioning * np.finfo(float).eps > PRECISION_WARN_LEVEL:
            logger.warning("qfi_precision_limited", condition_number=conditioning, kappa=noise.kappa)
    if not np.all(np.isfinite(values)):
        bad = int(np.argmin(np.isfinite(values)))
        time = float(central.times[bad])
        raise NumericalError(f"Non-finite Fisher information at t={time!r}", time=time)
    return values, central


def qfi_frequency(
    initial: CovarianceState,
    schedule: ProtocolSchedule,
    omega: float = 1.0,
    noise: Optional[NoiseParams] = None,
    eps_rel: float = DEFAULT_EPS_REL,
    convention: DerivativeConvention = DerivativeConvention.FIXED_COUPLING,
    step: Optional[float] = None,
    verify_eps: bool = False,
) -> FisherInformation:
    """
    Quantum Fisher information for ω along the whole protocol.

    All three runs (ω, ω ± ε) share one integration step so their grids coincide.
    With *verify_eps* the computation is repeated at ε/10; a per-cycle relative change
    above 1% marks the result as ``eps_flagged``.
    """
    noise = noise or NoiseParams()
    convention = DerivativeConvention(convention)
    if not 0 < eps_rel < 1:
        raise InvalidParameterError(f"eps_rel must lie in (0, 1), got {eps_rel!r}")
    eps = eps_rel * omega
    step = default_step(schedule.tau, omega) if step is None else step

    with traced("qfi_frequency", cycles=schedule.cycles, omega_tau=omega * schedule.tau, convention=convention.value):
        values, central = _qfi_values(initial, schedule, omega, noise, eps, convention, step)
        result = FisherInformation(times=central.times, values=values, central=central, eps=eps, convention=convention)
        if not verify_eps:
            return result

        finer, _ = _qfi_values(initial, schedule, omega, noise, eps / 10.0, convention, step)
        coarse_cycles = result.per_cycle
        fine_cycles = finer[central.boundary_indices[1:]]
        scale = np.maximum(np.abs(fine_cycles), np.finfo(float).tiny)
        significant = np.abs(fine_cycles) > 1e-12 * max(float(np.max(np.abs(fine_cycles))), 1.0)
        change = float(np.max(np.abs(coarse_cycles - fine_cycles)[significant] / scale[significant], initial=0.0))
        flagged = change > EPS_CHANGE_LIMIT
        if flagged:
            logger.warning("qfi_eps_unstable", eps=eps, max_rel_change=change)
        return FisherInformation(
            times=central.times,
            values=values,
            central=central,
            eps=eps,
            convention=convention,
            eps_flagged=flagged,
            eps_change=change,
        )


def qfi_bound(trajectory: Trajectory, dense: bool = False, chi: float = 0.5, phi: float = 0.5) -> np.ndarray:
    """
    Upper bound I^B = 8(χ² + φ²)·[∫₀ᵗ (2N + 1) dt']² for active interferometric protocols.

    Trapezoidal quadrature on the trajectory grid. Returns values at the cycle
    boundaries m = 1 … cycles, or on every grid point when *dense*.
    """
    integral = cumulative_trapezoid(2.0 * trajectory.boson_numbers + 1.0, trajectory.times, initial=0.0)
    bound = 8.0 * (chi**2 + phi**2) * integral**2
    return bound if dense else bound[trajectory.boundary_indices[1:]]


def qfi_bound_approx(tau: float, m: int) -> float:
    """Exponential estimate of the bound after *m* cycles, 4τ²·3^{2m}."""
    if m < 1:
        raise InvalidParameterError(f"m must be at least 1, got {m!r}")
    return 4.0 * tau**2 * 3.0 ** (2 * m)


def qfi_bound_approx_at(tau: float, t):
    """Bound estimate at time(s) *t*, 4τ²·3^{t/τ}; equals qfi_bound_approx at t = 2mτ."""
    return 4.0 * tau**2 * np.power(3.0, np.asarray(t, dtype=float) / tau)


@dataclass(frozen=True)
class AlphaFit:
    alpha: float
    residual: float
    window: Tuple[int, int]
    intercept: float


def fit_alpha(q_per_cycle: Sequence[float], window: Tuple[int, int] = DEFAULT_FIT_WINDOW) -> AlphaFit:
    """
    Fit Q ∝ 3^{αm} by least squares of log₃Q against m over the inclusive *window*.

    ``q_per_cycle[0]`` belongs to m = 1.
    """
    lo, hi = int(window[0]), int(window[1])
    q = np.asarray(q_per_cycle, dtype=float)
    if not 1 <= lo < hi:
        raise InvalidParameterError(f"Fit window must satisfy 1 <= lo < hi, got {window!r}")
    if hi > len(q):
        raise InvalidParameterError(f"Fit window {window!r} exceeds the {len(q)} available cycles")
    ms = np.arange(lo, hi + 1, dtype=float)
    sample = q[lo - 1 : hi]
    if np.any(~(sample > 0)):
        raise InvalidParameterError(f"Non-positive values inside the fit window: {sample.tolist()}")
    y = np.log(sample) / LOG3
    slope, intercept = np.polyfit(ms, y, 1)
    residual = float(np.sqrt(np.mean((np.polyval([slope, intercept], ms) - y) ** 2)))
    return AlphaFit(alpha=float(slope), residual=residual, window=(lo, hi), intercept=float(intercept))


def scaling_exponent(times: Sequence[float], values: Sequence[float]) -> float:
    """Log-log slope of *values* against *times* (2 for Heisenberg-like T² growth)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(t <= 0) or np.any(v <= 0):
        raise InvalidParameterError("Log-log fit needs positive times and values")
    slope, _ = np.polyfit(np.log(t), np.log(v), 1)
    return float(slope)


@dataclass(frozen=True)
class MetrologyReport:
    """Per-cycle metrology arrays for m = 1 … cycles plus the exponential fits."""

    cycles: np.ndarray
    I_omega: np.ndarray
    Q_omega: np.ndarray
    I_bound: np.ndarray
    I_bound_approx: np.ndarray
    alpha_fit: Optional[AlphaFit]
    alpha_bound: Optional[AlphaFit]
    fisher: FisherInformation = field(repr=False)

    @property
    def bound_dominated(self) -> bool:
        dense_bound = qfi_bound(self.fisher.central, dense=True)
        return bool(np.all(self.fisher.values <= dense_bound * (1.0 + 1e-9) + 1e-12))


def analyze(
    initial: CovarianceState,
    schedule: ProtocolSchedule,
    omega: float = 1.0,
    noise: Optional[NoiseParams] = None,
    eps_rel: float = DEFAULT_EPS_REL,
    convention: DerivativeConvention = DerivativeConvention.FIXED_COUPLING,
    window: Tuple[int, int] = DEFAULT_FIT_WINDOW,
    step: Optional[float] = None,
    verify_eps: bool = False,
) -> MetrologyReport:
    """QFI, bound, bound estimate and α fits for one protocol run."""
    fisher = qfi_frequency(initial, schedule, omega, noise, eps_rel, convention, step, verify_eps)
    q_omega = omega**2 * fisher.per_cycle
    bound = qfi_bound(fisher.central)
    cycles = np.arange(1, schedule.cycles + 1)
    approx = np.array([qfi_bound_approx(schedule.tau, int(m)) for m in cycles])

    alpha = alpha_bound = None
    if schedule.cycles >= window[1]:
        try:
            alpha = fit_alpha(q_omega, window)
        except InvalidParameterError as exc:
            logger.warning("alpha_fit_skipped", reason=str(exc))
        alpha_bound = fit_alpha(omega**2 * bound, window)

    return MetrologyReport(
        cycles=cycles,
        I_omega=fisher.per_cycle,
        Q_omega=q_omega,
        I_bound=bound,
        I_bound_approx=approx,
        alpha_fit=alpha,
        alpha_bound=alpha_bound,
        fisher=fisher,
    )


@dataclass(frozen=True)
class AlphaPoint:
    kappa_2tau: float
    alpha: float
    residual: float
    alpha_bound: float
    q_omega: Tuple[float, ...]


def _alpha_point(args: Tuple) -> AlphaPoint:
    kappa_2tau, omega_tau, n_th, omega, g_tau, cycles, window, eps_rel, convention, step = args
    tau = omega_tau / omega
    noise = NoiseParams(kappa=kappa_2tau / (2.0 * tau), n_th=n_th)
    schedule = ProtocolSchedule(tau=tau, g_tau=g_tau, cycles=cycles)
    report = analyze(vacuum_state(), schedule, omega, noise, eps_rel, convention, window, step)
    if report.alpha_fit is None or report.alpha_bound is None:
        raise InvalidParameterError(f"No alpha fit possible for 2*tau*kappa={kappa_2tau!r}")
    return AlphaPoint(
        kappa_2tau=float(kappa_2tau),
        alpha=report.alpha_fit.alpha,
        residual=report.alpha_fit.residual,
        alpha_bound=report.alpha_bound.alpha,
        q_omega=tuple(float(q) for q in report.Q_omega),
    )


def alpha_vs_kappa(
    grid: Sequence[float],
    omega_tau: float,
    n_th: float = 0.0,
    omega: float = 1.0,
    g_tau: float = 1.0,
    cycles: int = 10,
    window: Tuple[int, int] = DEFAULT_FIT_WINDOW,
    eps_rel: float = DEFAULT_EPS_REL,
    convention: DerivativeConvention = DerivativeConvention.FIXED_COUPLING,
    step: Optional[float] = None,
    workers: int = 1,
) -> List[AlphaPoint]:
    """
    Exact and bound-derived α as a function of the dissipation strength 2τκ.

    Grid points are independent; with ``workers > 1`` they run in a process pool and
    come back in grid order.
    """
    values = [float(v) for v in grid]
    if any(not 0.0 <= v <= MAX_KAPPA_2TAU for v in values):
        raise InvalidParameterError(f"2*tau*kappa grid must lie in [0, {MAX_KAPPA_2TAU}], got {values}")
    if cycles < window[1]:
        raise InvalidParameterError(f"Need at least {window[1]} cycles for the fit window {window!r}")
    tasks = [
        (v, omega_tau, n_th, omega, g_tau, cycles, tuple(window), eps_rel, DerivativeConvention(convention), step)
        for v in values
    ]
    logger.info("alpha_sweep_start", points=len(tasks), omega_tau=omega_tau, n_th=n_th, workers=workers)
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=min(workers, len(tasks))) as pool:
            points = pool.map(_alpha_point, tasks)
    else:
        points = [_alpha_point(task) for task in tasks]
    logger.info("alpha_sweep_done", alphas=[round(p.alpha, 4) for p in points])
    return points
