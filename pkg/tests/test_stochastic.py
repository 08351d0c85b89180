import cmath
import math

import numpy as np
import pytest
from conftest import ConstantDrive, make_spec

from sta_thermalizer import DomainError, PreconditionError, synthesize_schedule
from sta_thermalizer.dynamics import (
    PureGaussianTrajectoryState,
    ensemble_average,
    integrate_consistency,
    integrate_covariance_oracle,
    simulate_measurement_trajectory,
    simulate_noise_trajectory,
)
from sta_thermalizer.dynamics.stochastic import ensemble_centers, trajectory_rng
from sta_thermalizer.gaussian_core import Moments, moments_arrays
from sta_thermalizer.oracles import coherent_state_center

SIMULATORS = {"noise": simulate_noise_trajectory, "measurement": simulate_measurement_trajectory}


@pytest.fixture(scope="module")
def heating():
    return synthesize_schedule(make_spec(0.25, 2.0, 6.0))


def test_rng_streams_are_independent_of_layout():
    a = trajectory_rng(7, 3).standard_normal(5)
    b = trajectory_rng(7, 3).standard_normal(5)
    c = trajectory_rng(7, 4).standard_normal(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("unraveling", ["noise", "measurement"])
def test_seed_reproducibility(heating, unraveling):
    sim = SIMULATORS[unraveling]
    a = sim(heating, 11, n_steps=2000)
    b = sim(heating, 11, n_steps=2000)
    c = sim(heating, 12, n_steps=2000)
    assert np.array_equal(a.xc, b.xc) and np.array_equal(a.pc, b.pc) and np.array_equal(a.phase, b.phase)
    assert not np.array_equal(a.xc, c.xc)


@pytest.mark.parametrize("unraveling", ["noise", "measurement"])
def test_non_markovian_schedule_rejected(unraveling):
    sch = synthesize_schedule(make_spec(3.0, 2.0, 6.0))
    assert sch.non_markovian
    with pytest.raises(PreconditionError, match="non-Markovian"):
        SIMULATORS[unraveling](sch, 1, n_steps=1000)
    with pytest.raises(PreconditionError):
        ensemble_average(sch, 10, 1, unraveling, n_steps=1000, n_samples=10)


@pytest.mark.parametrize("unraveling", ["noise", "measurement"])
def test_coherent_state_in_static_trap(unraveling):
    w = 1.3
    drive = ConstantDrive(w * w, 0.0, 6.0, n_steps=60000)
    init = PureGaussianTrajectoryState.coherent(w, 1.0, 0.5)
    tr = SIMULATORS[unraveling](drive, 5, n_steps=60000, init=init)
    x, p = coherent_state_center(w, 1.0, 0.5, tr.times)
    assert np.max(np.abs(tr.xc - x)) < 1e-4
    assert np.max(np.abs(tr.pc - p)) < 1e-4
    # width is stationary
    assert np.max(np.abs(tr.alpha - 0.5 * w)) < 1e-12


def test_noise_free_trajectories_coincide():
    drive = ConstantDrive(1.0, 0.0, 2.0)
    init = PureGaussianTrajectoryState.coherent(1.0, 0.3, -0.2)
    a = simulate_noise_trajectory(drive, 1, n_steps=1000, init=init)
    b = simulate_noise_trajectory(drive, 2, n_steps=1000, init=init)
    assert np.array_equal(a.xc, b.xc) and np.array_equal(a.pc, b.pc)


def test_norm_preserved(heating):
    tr = simulate_noise_trajectory(heating, 3, n_steps=2000)
    for i in (0, 500, 1000, 2000):
        assert tr.state(i).norm == pytest.approx(1.0, abs=1e-12)
    tr = simulate_measurement_trajectory(heating, 3, n_steps=2000)
    assert tr.state(-1).norm == pytest.approx(1.0, abs=1e-12)


def test_invalid_inputs(heating):
    with pytest.raises(DomainError):
        PureGaussianTrajectoryState(0.0, 0.0, -1 + 0j)
    with pytest.raises(DomainError):
        ensemble_average(heating, 10, 1, "homodyne", n_steps=1000, n_samples=10)
    with pytest.raises(DomainError, match="multiple"):
        ensemble_average(heating, 10, 1, "noise", n_steps=1001, n_samples=10)
    with pytest.raises(DomainError):
        ensemble_average(heating, 0, 1, "noise", n_steps=1000, n_samples=10)


@pytest.mark.parametrize("unraveling", ["noise", "measurement"])
def test_ensemble_member_matches_single_trajectory(heating, unraveling):
    n = 4000
    _, samples, z = ensemble_centers(heating, 1, 99, unraveling, n_steps=n, n_samples=40)
    tr = SIMULATORS[unraveling](heating, 99, n_steps=n)
    assert np.allclose(z[0, :, 0], tr.xc[samples], atol=1e-11)
    assert np.allclose(z[0, :, 1], tr.pc[samples], atol=1e-11)


def test_worker_count_does_not_change_results(heating):
    a = ensemble_average(heating, 200, 5, "noise", n_steps=2000, n_samples=20, workers=1)
    b = ensemble_average(heating, 200, 5, "noise", n_steps=2000, n_samples=20, workers=3)
    for name in ("xx", "pp", "xp", "se_xx", "mean_x"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_single_trajectory_is_degenerate(heating):
    stats = ensemble_average(heating, 1, 5, "noise", n_steps=1000, n_samples=10)
    assert stats.degenerate
    assert np.all(np.isnan(stats.se_xx))


def test_standard_error_scaling(heating):
    a = ensemble_average(heating, 100, 21, "noise", n_steps=2000, n_samples=20)
    b = ensemble_average(heating, 400, 21, "noise", n_steps=2000, n_samples=20)
    ratio = np.median(a.se_xx / b.se_xx)
    assert ratio == pytest.approx(2.0, rel=0.3)


@pytest.mark.parametrize("unraveling", ["noise", "measurement"])
def test_ensemble_reproduces_deterministic_moments(heating, unraveling):
    stats = ensemble_average(heating, 2000, 2024, unraveling, n_steps=20000, n_samples=50)
    traj = integrate_consistency(heating, heating.spec.initial)
    idx = np.rint(stats.times / traj.dt).astype(int)
    xx, pp, xp = moments_arrays(traj.A[idx], traj.B[idx], traj.C[idx])
    z = np.abs([(stats.xx - xx) / stats.se_xx, (stats.pp - pp) / stats.se_pp, (stats.xp - xp) / stats.se_xp])
    assert np.mean(np.max(z, axis=0) < 3.0) >= 0.9
    assert np.max(z) < 5.0


def test_measurement_width_reaches_conditional_steady_state():
    gamma = 0.8
    drive = ConstantDrive(1.0, gamma, 10.0)
    tr = simulate_measurement_trajectory(drive, 1, n_steps=20000)
    alpha_ss = cmath.sqrt(0.25 - 1j * gamma)
    assert tr.alpha[-1] == pytest.approx(alpha_ss, abs=1e-8)
    vx = 0.25 / tr.alpha[-1].real
    # unconditioned spread keeps growing under the same dephasing
    out = integrate_covariance_oracle(drive, Moments(0.5, 0.5, 0.0), 2000)
    assert vx < 0.5 < out.xx[-1]


def test_moments_of_trajectory(heating):
    tr = simulate_noise_trajectory(heating, 4, n_steps=1000)
    xx, pp, xp = tr.moments()
    vx, vp, cxp = tr.state(10).width_moments
    assert xx[10] == pytest.approx(vx + tr.xc[10] ** 2)
    assert vx * vp - cxp**2 == pytest.approx(0.25, rel=1e-12)
    assert math.isfinite(pp[-1]) and math.isfinite(xp[-1])
