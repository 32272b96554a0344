"""
Single-mode zero-mean Gaussian states in the quadrature convention x = a + a†, p = i(a† − a).

A state is fully described by its 2×2 covariance matrix R and first moments ⟨X⟩.
Vacuum has R = I, so det(R) ≥ 1 is the uncertainty relation and N = (Tr R − 2)/4.

Besides the scalar operations on one CovarianceState, the module offers stacked
variants (``boson_numbers``, ``purities``) that work on arrays of shape (n, 2, 2)
produced by the propagator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from critcycle.errors import InvalidParameterError, UnphysicalStateError

SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9
REJECT_TOL = 1e-6
DEGENERATE_TOL = 1e-12
# det(R) computed in float64 carries an absolute error of order eps·‖R‖²_F
_DET_RESOLUTION = 4096 * np.finfo(float).eps


def det_tolerance(R: np.ndarray) -> np.ndarray:
    """Tolerance below 1 that det(R) may reach before R is rejected as unphysical."""
    R = np.asarray(R, dtype=float)
    return REJECT_TOL + _DET_RESOLUTION * np.sum(R * R, axis=(-2, -1))


def _det2(R: np.ndarray) -> np.ndarray:
    return R[..., 0, 0] * R[..., 1, 1] - R[..., 0, 1] * R[..., 1, 0]


@dataclass(frozen=True)
class CovarianceState:
    """Immutable Gaussian state: covariance matrix ``R`` and mean vector ``mean``."""

    R: np.ndarray
    mean: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self) -> None:
        R = np.array(self.R, dtype=float)
        mean = np.array(self.mean, dtype=float)
        if R.shape != (2, 2):
            raise UnphysicalStateError(f"Covariance matrix must be 2x2, got shape {R.shape}")
        if mean.shape != (2,):
            raise UnphysicalStateError(f"Mean vector must have shape (2,), got {mean.shape}")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(mean))):
            raise UnphysicalStateError("Covariance state contains non-finite entries")
        if abs(R[0, 1] - R[1, 0]) > SYMMETRY_TOL:
            raise UnphysicalStateError(f"Covariance matrix is not symmetric: R01={R[0, 1]!r}, R10={R[1, 0]!r}")
        det = float(_det2(R))
        if det < 1.0 - float(det_tolerance(R)) or R[0, 0] <= 0:
            raise UnphysicalStateError(f"Covariance matrix violates the uncertainty relation: det(R)={det!r}")
        R.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "mean", mean)

    @property
    def det(self) -> float:
        return float(_det2(self.R))

    @property
    def is_centered(self) -> bool:
        return bool(np.all(self.mean == 0.0))

    def is_physical(self, tol: float = PHYSICAL_TOL) -> bool:
        """Strict check of symmetry and det(R) ≥ 1 − tol."""
        return abs(self.R[0, 1] - self.R[1, 0]) <= SYMMETRY_TOL and self.det >= 1.0 - tol

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CovarianceState):
            return NotImplemented
        return bool(np.array_equal(self.R, other.R) and np.array_equal(self.mean, other.mean))

    def __hash__(self) -> int:
        return hash((self.R.tobytes(), self.mean.tobytes()))


@dataclass(frozen=True)
class SqueezingDecomposition:
    """Squeezed thermal form of a centred state: R = (2n_κ+1)·S(s)S(s)ᵀ."""

    s_mag: float
    theta: float
    n_kappa: float

    @property
    def minor_variance(self) -> float:
        """Variance along the squeezed axis, (2n_κ+1)e^{−2|s|}."""
        return (2.0 * self.n_kappa + 1.0) * math.exp(-2.0 * self.s_mag)

    @property
    def major_variance(self) -> float:
        """Variance along the anti-squeezed axis, (2n_κ+1)e^{2|s|}."""
        return (2.0 * self.n_kappa + 1.0) * math.exp(2.0 * self.s_mag)

    @property
    def minor_axis(self) -> np.ndarray:
        half = 0.5 * self.theta
        return np.array([math.cos(half), math.sin(half)])

    def reconstruct(self) -> np.ndarray:
        """Covariance matrix with the minor axis at angle θ/2 from x."""
        half = 0.5 * self.theta
        rot = np.array([[math.cos(half), -math.sin(half)], [math.sin(half), math.cos(half)]])
        return rot @ np.diag([self.minor_variance, self.major_variance]) @ rot.T


def vacuum_state() -> CovarianceState:
    return CovarianceState(np.eye(2))


def thermal_state(n_beta: float) -> CovarianceState:
    """Thermal state with mean occupation *n_beta*: R = (2N_β+1)·I."""
    if not n_beta >= 0:
        raise InvalidParameterError(f"Thermal occupation must be non-negative, got {n_beta!r}")
    return CovarianceState((2.0 * n_beta + 1.0) * np.eye(2))


def thermal_state_from_inverse_temperature(beta: float, omega: float) -> CovarianceState:
    """Thermal state of a mode of frequency *omega* at inverse temperature *beta*."""
    if beta <= 0 or omega <= 0:
        raise InvalidParameterError(f"beta and omega must be positive, got beta={beta!r}, omega={omega!r}")
    return thermal_state(1.0 / math.expm1(beta * omega))


def boson_number(state: CovarianceState) -> float:
    """Mean occupation N = (Tr R − 2)/4."""
    return float(boson_numbers(state.R))


def purity(state: CovarianceState) -> float:
    """Gaussian purity P = det(R)^{−1/2}, clamped to 1."""
    return float(purities(state.R))


def boson_numbers(R: np.ndarray) -> np.ndarray:
    """Occupations of a stack of covariance matrices (shape (..., 2, 2))."""
    R = np.asarray(R, dtype=float)
    _require_physical(R)
    n = 0.25 * (R[..., 0, 0] + R[..., 1, 1] - 2.0)
    if np.any(n < -PHYSICAL_TOL):
        raise UnphysicalStateError(f"Negative boson number {float(np.min(n))!r}")
    return np.maximum(n, 0.0)


def purities(R: np.ndarray) -> np.ndarray:
    """Purities of a stack of covariance matrices (shape (..., 2, 2))."""
    R = np.asarray(R, dtype=float)
    return purities_from_det(_require_physical(R))


def purities_from_det(det: np.ndarray) -> np.ndarray:
    """P = det(R)^{−1/2} for known determinants, clamped to 1."""
    det = np.asarray(det, dtype=float)
    return np.minimum(1.0 / np.sqrt(np.maximum(det, 1.0 - PHYSICAL_TOL)), 1.0)


def _require_physical(R: np.ndarray) -> np.ndarray:
    det = _det2(R)
    bad = det < 1.0 - det_tolerance(R)
    if np.any(bad):
        raise UnphysicalStateError(f"Covariance matrix violates the uncertainty relation: det(R)={float(np.min(det))!r}")
    return det


def squeezing_decomposition(state: CovarianceState, det: Optional[float] = None) -> SqueezingDecomposition:
    """
    Decompose a centred state into squeezing magnitude, angle and thermal occupancy.

    θ is twice the polar angle of the eigenvector belonging to the smaller eigenvalue,
    with the eigenvector sign fixed by v_x ≥ 0 (v_y > 0 when v_x = 0), so θ ∈ (−π, π].
    Isotropic states report θ = 0.

    *det* overrides det(R) as recomputed from the entries, which loses all digits once
    the squeezing is strong; propagated trajectories know it more accurately.
    """
    if not state.is_centered:
        raise InvalidParameterError("Squeezing decomposition requires a state with zero first moments")
    a, b, d = state.R[0, 0], state.R[0, 1], state.R[1, 1]
    half_sum = 0.5 * (a + d)
    radius = math.hypot(0.5 * (a - d), b)
    lam_max = half_sum + radius
    det = max(state.det if det is None else float(det), 1.0)
    lam_min = det / lam_max

    n_kappa = 0.5 * (math.sqrt(det) - 1.0)
    s_mag = 0.25 * math.log(lam_max / lam_min)
    if 2.0 * radius < DEGENERATE_TOL:
        return SqueezingDecomposition(s_mag=0.0, theta=0.0, n_kappa=n_kappa)

    # 2·angle of the major axis; the minor axis sits a quarter turn away
    major = math.atan2(2.0 * b, a - d)
    theta = major + math.pi if major <= 0.0 else major - math.pi
    return SqueezingDecomposition(s_mag=s_mag, theta=theta, n_kappa=n_kappa)


def wigner_at(state: CovarianceState, point) -> float:
    """Gaussian Wigner function P/(2π)·exp(−ΔXᵀR⁻¹ΔX) at phase-space *point*."""
    if state.det <= 0.0:
        raise UnphysicalStateError("Singular covariance matrix has no Wigner function")
    delta = np.asarray(point, dtype=float) - state.mean
    exponent = float(delta @ np.linalg.solve(state.R, delta))
    return purity(state) / (2.0 * math.pi) * math.exp(-exponent)
