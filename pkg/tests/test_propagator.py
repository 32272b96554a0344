"""Tests for covariance propagation."""

import math

import numpy as np
import pytest
from structlog.testing import capture_logs

from critcycle.core import propagator
from critcycle.core.gaussian import CovarianceState, thermal_state, vacuum_state
from critcycle.core.propagator import NoiseParams, cycle_samples, default_step, drift_matrices, evolve
from critcycle.core.protocol import LOG3, ProtocolSchedule
from critcycle.errors import InvalidParameterError, NumericalError


def _schedule(omega_tau: float = 8.0, g_tau: float = 1.0, cycles: int = 1, omega: float = 1.0) -> ProtocolSchedule:
    return ProtocolSchedule(tau=omega_tau / omega, g_tau=g_tau, cycles=cycles)


# ---------------------------------------------------------------------------
# Drift and noise
# ---------------------------------------------------------------------------

def test_drift_free_rotation():
    drift, diffusion = drift_matrices(0.0, 2.0)
    assert np.array_equal(drift, [[0.0, 2.0], [-2.0, 0.0]])
    assert np.array_equal(diffusion, np.zeros((2, 2)))


def test_drift_at_critical_point():
    drift, _ = drift_matrices(1.0, 1.0)
    assert np.array_equal(drift, [[0.0, 0.0], [-1.0, 0.0]])


def test_drift_with_noise():
    drift, diffusion = drift_matrices(0.0, 1.0, NoiseParams(kappa=0.1, n_th=2.0))
    assert np.allclose(np.diag(drift), [-0.05, -0.05])
    assert np.allclose(diffusion, 0.5 * np.eye(2))


def test_drift_rejects_nonpositive_omega():
    with pytest.raises(InvalidParameterError):
        drift_matrices(0.0, 0.0)


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(kappa=-1.0)
    with pytest.raises(ValueError):
        NoiseParams(n_th=-0.5)
    assert NoiseParams().is_noiseless
    assert NoiseParams().diffusion == 0.0


def test_noise_from_inverse_temperature():
    noise = NoiseParams.from_inverse_temperature(kappa=0.2, beta=math.log(3.0), omega=1.0)
    assert noise.n_th == pytest.approx(0.5)
    assert noise.kappa == 0.2


# ---------------------------------------------------------------------------
# Grid and step handling
# ---------------------------------------------------------------------------

def test_trajectory_grid():
    schedule = _schedule(cycles=2)
    trajectory = evolve(vacuum_state(), schedule)
    assert trajectory.times[0] == 0.0
    assert trajectory.times[-1] == schedule.duration
    assert np.allclose(np.diff(trajectory.times), trajectory.step)
    assert trajectory.step <= default_step(schedule.tau, 1.0)
    assert np.array_equal(trajectory.covariances[0], np.eye(2))
    assert list(trajectory.boundary_indices) == [0, trajectory.steps_per_cycle, 2 * trajectory.steps_per_cycle]
    assert len(trajectory) == 2 * trajectory.steps_per_cycle + 1


def test_default_step_capped_by_frequency():
    assert default_step(8.0, 1.0) == pytest.approx(8.0 / 5000)
    assert default_step(100.0, 1.0) == pytest.approx(0.002)


def test_step_too_large_rejected():
    with pytest.raises(InvalidParameterError, match="Step"):
        evolve(vacuum_state(), _schedule(), step=0.05)


def test_sub_threshold_cycle_warns():
    with capture_logs() as logs:
        evolve(vacuum_state(), _schedule(omega_tau=0.5))
    assert any(entry["event"] == "sub_threshold_cycle" for entry in logs)


def test_displaced_initial_state_rejected():
    displaced = CovarianceState(np.eye(2), mean=np.array([0.5, 0.0]))
    with pytest.raises(InvalidParameterError, match="first moments"):
        evolve(displaced, _schedule())


def test_non_finite_values_abort(mocker):
    original = propagator._rk4_affine

    def poisoned(*args):
        transfer, offset = original(*args)
        return np.full_like(transfer, np.nan), offset

    mocker.patch.object(propagator, "_rk4_affine", side_effect=poisoned)
    with pytest.raises(NumericalError, match="Non-finite") as info:
        evolve(vacuum_state(), _schedule())
    assert info.value.time is not None


# ---------------------------------------------------------------------------
# Noiseless dynamics
# ---------------------------------------------------------------------------

def test_free_rotation_fixes_vacuum():
    trajectory = evolve(vacuum_state(), _schedule(g_tau=0.0, cycles=3))
    assert np.allclose(trajectory.covariances, np.eye(2), atol=1e-12)


def test_single_phase_matched_cycle():
    trajectory = evolve(vacuum_state(), _schedule())
    n1 = trajectory.boson_numbers[-1]
    # finite-time correction keeps N_1 a little below 1/3
    assert abs(n1 - 1.0 / 3.0) <= 0.05
    assert n1 < 1.0 / 3.0


def test_symmetry_is_exact():
    trajectory = evolve(vacuum_state(), _schedule(cycles=3))
    assert np.array_equal(trajectory.covariances[:, 0, 1], trajectory.covariances[:, 1, 0])


def test_purity_conserved_while_well_conditioned():
    trajectory = evolve(vacuum_state(), _schedule(cycles=4))
    dets = np.linalg.det(trajectory.covariances)
    assert np.max(np.abs(dets - 1.0)) <= 1e-7


def test_purity_at_ten_cycles():
    samples = cycle_samples(evolve(vacuum_state(), _schedule(cycles=10)))
    assert all(abs(s.purity - 1.0) <= 1e-7 for s in samples)


def test_purity_survives_long_runs():
    trajectory = evolve(vacuum_state(), _schedule(cycles=20))
    assert np.max(np.abs(trajectory.determinants - 1.0)) <= 1e-7
    assert all(abs(s.purity - 1.0) <= 1e-7 for s in cycle_samples(trajectory))


def test_long_run_keeps_symplectic_form():
    trajectory = evolve(thermal_state(1.0), _schedule(cycles=20))
    S = trajectory.symplectic
    rebuilt = 3.0 * S @ np.swapaxes(S, -1, -2)
    scale = np.max(np.abs(rebuilt), axis=(1, 2))
    assert np.all(np.max(np.abs(trajectory.covariances - rebuilt), axis=(1, 2)) <= 1e-12 * scale)
    assert np.allclose(trajectory.determinants, 9.0, atol=1e-6)


def test_dissipative_run_has_no_symplectic_matrix():
    trajectory = evolve(vacuum_state(), _schedule(), noise=NoiseParams(kappa=0.01))
    assert trajectory.symplectic is None
    assert np.allclose(trajectory.determinants, np.linalg.det(trajectory.covariances), rtol=1e-10)


def test_step_halving_is_fourth_order():
    schedule = _schedule()
    final = {d: evolve(vacuum_state(), schedule, step=schedule.tau / d).boson_numbers[-1] for d in (1000, 2000, 4000)}
    ratio = (final[1000] - final[2000]) / (final[2000] - final[4000])
    assert 12.0 <= ratio <= 20.0


def test_default_step_is_converged():
    schedule = _schedule()
    coarse = evolve(vacuum_state(), schedule).boson_numbers[-1]
    fine = evolve(vacuum_state(), schedule, step=default_step(schedule.tau, 1.0) / 2).boson_numbers[-1]
    assert abs(coarse - fine) / fine <= 1e-8


# ---------------------------------------------------------------------------
# Cycle samples
# ---------------------------------------------------------------------------

def test_exponential_growth_when_phase_matched():
    samples = cycle_samples(evolve(vacuum_state(), _schedule(cycles=10)))
    s1 = samples[0].s_mag
    for sample in samples:
        assert sample.N == pytest.approx(math.sinh(sample.m * s1) ** 2, rel=0.1)
        ideal = math.sinh(sample.m * LOG3 / 2) ** 2
        assert 0.5 <= sample.N / ideal <= 1.05


def test_squeezing_accumulates_linearly():
    samples = cycle_samples(evolve(vacuum_state(), _schedule(cycles=10)))
    slope = np.polyfit([s.m for s in samples], [s.s_mag for s in samples], 1)[0]
    assert slope == pytest.approx(samples[0].s_mag, rel=0.05)


def test_single_cycle_squeezing_wide():
    sample = cycle_samples(evolve(vacuum_state(), _schedule(omega_tau=200.0)))[0]
    assert abs(sample.s_mag - LOG3 / 2) <= 0.01


def test_phase_matched_angle():
    samples = cycle_samples(evolve(vacuum_state(), _schedule(cycles=2)))
    for sample in samples:
        assert abs(sample.theta - math.pi / 2) <= 0.05


def test_anti_phase_cancellation():
    samples = cycle_samples(evolve(vacuum_state(), _schedule(omega_tau=9.0, cycles=6)))
    for sample in samples:
        if sample.m % 2:
            assert abs(sample.N - 1.0 / 3.0) <= 0.05
        else:
            assert sample.N <= 0.05


def test_axis_variances_of_pure_state():
    sample = cycle_samples(evolve(vacuum_state(), _schedule()))[0]
    assert sample.var_minor < 1.0 < sample.var_major
    assert sample.var_minor * sample.var_major == pytest.approx(1.0, abs=1e-6)


def test_cycle_samples_match_boundaries():
    trajectory = evolve(vacuum_state(), _schedule(cycles=3))
    samples = cycle_samples(trajectory)
    assert [s.m for s in samples] == [1, 2, 3]
    assert [s.t for s in samples] == pytest.approx([16.0, 32.0, 48.0])
    last = trajectory.decomposition(-1)
    assert samples[-1].s_mag == last.s_mag


# ---------------------------------------------------------------------------
# Dissipative dynamics
# ---------------------------------------------------------------------------

def test_relaxation_to_environment():
    noise = NoiseParams(kappa=5.0, n_th=2.0)
    trajectory = evolve(vacuum_state(), _schedule(omega_tau=4.0, g_tau=0.0, cycles=2), noise=noise)
    assert np.allclose(trajectory.covariances[-1], 5.0 * np.eye(2), atol=1e-6)


def test_thermal_fixed_point():
    noise = NoiseParams(kappa=0.3, n_th=2.0)
    trajectory = evolve(thermal_state(2.0), _schedule(g_tau=0.0, cycles=2), noise=noise)
    assert np.allclose(trajectory.covariances, 5.0 * np.eye(2), atol=1e-10)


def test_monotone_contraction_to_n_th():
    noise = NoiseParams(kappa=0.5, n_th=2.0)
    trajectory = evolve(vacuum_state(), _schedule(g_tau=0.0, cycles=2), noise=noise)
    numbers = trajectory.boson_numbers
    assert np.all(np.diff(numbers) >= -1e-12)
    assert numbers[-1] <= 2.0


def test_dissipation_mixes_state():
    noise = NoiseParams(kappa=0.1 / 16.0, n_th=2.0)
    samples = cycle_samples(evolve(vacuum_state(), _schedule(cycles=2), noise=noise))
    assert samples[0].purity < 1.0
    assert samples[1].purity < samples[0].purity
