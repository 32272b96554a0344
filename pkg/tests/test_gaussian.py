"""Tests for Gaussian covariance states."""

import math

import numpy as np
import pytest

from critcycle.core.gaussian import (
    CovarianceState,
    SqueezingDecomposition,
    boson_number,
    boson_numbers,
    purity,
    squeezing_decomposition,
    thermal_state,
    thermal_state_from_inverse_temperature,
    vacuum_state,
    wigner_at,
)
from critcycle.errors import InvalidParameterError, UnphysicalStateError


def _squeezed(s: float, theta: float = 0.0, n_kappa: float = 0.0) -> CovarianceState:
    return CovarianceState(SqueezingDecomposition(s_mag=s, theta=theta, n_kappa=n_kappa).reconstruct())


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def test_vacuum():
    state = vacuum_state()
    assert np.array_equal(state.R, np.eye(2))
    assert boson_number(state) == 0.0
    assert purity(state) == 1.0
    assert state.is_centered


def test_thermal_state():
    state = thermal_state(2.0)
    assert np.allclose(state.R, 5.0 * np.eye(2))
    assert boson_number(state) == pytest.approx(2.0)
    assert purity(state) == pytest.approx(0.2)


def test_thermal_state_rejects_negative_occupation():
    with pytest.raises(InvalidParameterError, match="non-negative"):
        thermal_state(-0.1)


def test_thermal_state_from_inverse_temperature():
    # e^{βω} = 2 gives one boson
    state = thermal_state_from_inverse_temperature(math.log(2.0), 1.0)
    assert boson_number(state) == pytest.approx(1.0)


def test_asymmetric_matrix_rejected():
    with pytest.raises(UnphysicalStateError, match="symmetric"):
        CovarianceState(np.array([[2.0, 0.1], [0.0, 2.0]]))


def test_uncertainty_violation_rejected():
    with pytest.raises(UnphysicalStateError, match="uncertainty"):
        CovarianceState(0.5 * np.eye(2))


def test_wrong_shapes_rejected():
    with pytest.raises(UnphysicalStateError):
        CovarianceState(np.eye(3))
    with pytest.raises(UnphysicalStateError):
        CovarianceState(np.eye(2), mean=np.zeros(3))


def test_state_is_immutable():
    source = np.eye(2)
    state = CovarianceState(source)
    source[0, 0] = 7.0
    assert state.R[0, 0] == 1.0
    with pytest.raises(ValueError):
        state.R[0, 0] = 3.0


def test_is_physical_uses_strict_tolerance():
    state = CovarianceState(np.diag([1.0, 1.0 - 1e-7]))
    assert not state.is_physical()
    assert state.is_physical(tol=1e-6)


# ---------------------------------------------------------------------------
# Stacked observables
# ---------------------------------------------------------------------------

def test_stacked_boson_numbers():
    stack = np.stack([np.eye(2), 3.0 * np.eye(2), 5.0 * np.eye(2)])
    assert np.allclose(boson_numbers(stack), [0.0, 1.0, 2.0])


def test_stacked_rejects_unphysical_member():
    stack = np.stack([np.eye(2), 0.5 * np.eye(2)])
    with pytest.raises(UnphysicalStateError):
        boson_numbers(stack)


# ---------------------------------------------------------------------------
# Squeezing decomposition
# ---------------------------------------------------------------------------

def test_squeezed_along_x():
    s = 0.3
    state = CovarianceState(np.diag([math.exp(-2 * s), math.exp(2 * s)]))
    squeeze = squeezing_decomposition(state)
    assert squeeze.s_mag == pytest.approx(s, abs=1e-12)
    assert squeeze.theta == pytest.approx(0.0, abs=1e-12)
    assert squeeze.n_kappa == pytest.approx(0.0, abs=1e-12)


def test_squeezed_along_p():
    state = CovarianceState(np.diag([math.exp(0.8), math.exp(-0.8)]))
    assert squeezing_decomposition(state).theta == pytest.approx(math.pi)


def test_isotropic_state_reports_zero_angle():
    squeeze = squeezing_decomposition(thermal_state(1.5))
    assert squeeze.s_mag == 0.0
    assert squeeze.theta == 0.0
    assert squeeze.n_kappa == pytest.approx(1.5)


@pytest.mark.parametrize("theta", [1.0, -2.5, 0.3, 3.0])
def test_decomposition_recovers_parameters(theta):
    state = _squeezed(0.4, theta, n_kappa=0.5)
    squeeze = squeezing_decomposition(state)
    assert squeeze.s_mag == pytest.approx(0.4, abs=1e-12)
    assert squeeze.theta == pytest.approx(theta, abs=1e-10)
    assert squeeze.n_kappa == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(squeeze.reconstruct(), state.R, atol=1e-12)


def test_axis_variances():
    squeeze = squeezing_decomposition(_squeezed(0.5, 1.0, n_kappa=1.0))
    assert squeeze.minor_variance == pytest.approx(3.0 * math.exp(-1.0))
    assert squeeze.major_variance == pytest.approx(3.0 * math.exp(1.0))
    assert squeeze.minor_variance * squeeze.major_variance == pytest.approx(9.0)


def test_decomposition_requires_zero_mean():
    state = CovarianceState(np.eye(2), mean=np.array([1.0, 0.0]))
    with pytest.raises(InvalidParameterError, match="zero first moments"):
        squeezing_decomposition(state)


# ---------------------------------------------------------------------------
# Wigner function
# ---------------------------------------------------------------------------

def test_wigner_at_origin():
    state = thermal_state(1.0)
    assert wigner_at(state, [0.0, 0.0]) == pytest.approx(1.0 / (3.0 * 2.0 * math.pi))


def test_wigner_normalisation():
    # the Gaussian form integrates to 1/2 over dx dp with [x, p] = 2i
    state = CovarianceState(np.array([[2.0, 0.5], [0.5, 1.0]]))
    axis = np.linspace(-10.0, 10.0, 161)
    spacing = axis[1] - axis[0]
    total = sum(wigner_at(state, (x, p)) for x in axis for p in axis) * spacing**2
    assert 2.0 * total == pytest.approx(1.0, abs=1e-6)


def test_wigner_is_centred_on_mean():
    state = CovarianceState(np.eye(2), mean=np.array([1.0, -2.0]))
    assert wigner_at(state, [1.0, -2.0]) == pytest.approx(1.0 / (2.0 * math.pi))
