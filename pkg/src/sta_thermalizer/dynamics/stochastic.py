"""Stochastic unravelings of the dephasing master equation.

Each realization is a pure Gaussian wavepacket

    psi(x) = exp(phase - alpha (x - xc)^2 + i pc (x - xc)).

Under the quadratic Hamiltonian the width parameter ``alpha`` obeys a
deterministic Riccati equation and only the center (xc, pc) is stochastic:

noise unraveling, H_st = H_t + sqrt(2 gamma_t) xi_t x
    d alpha = (-2i alpha^2 + i w^2 / 2) dt
    dxc = pc dt,  dpc = -w^2 xc dt - sqrt(2 gamma) dW

continuous position measurement with 1 / (8 tau_m) = gamma_t
    d alpha = (-2i alpha^2 + i w^2 / 2 + 2 gamma) dt
    dxc = pc dt + 2 sqrt(2 gamma) Vx dW,  dpc = -w^2 xc dt + 2 sqrt(2 gamma) Cxp dW

with the conditional covariances Vx = 1 / (4 Re alpha) and
Cxp = -Im alpha / (2 Re alpha).  The width is advanced with RK4 and the center
with Euler-Maruyama in its symplectic (momentum first) ordering, which keeps
the drift area-preserving so oscillation amplitudes do not creep.  A thermal initial state is unraveled as a Gaussian
mixture of coherent states of the initial trap whose centers are drawn from the
excess covariance.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, IntegrationError, PreconditionError
from ..gaussian_core import covariance_moments, thermal_coeffs
from ..protocol import GAMMA_ZERO, ControlSchedule

DEFAULT_SDE_STEPS = 100_000
UNRAVELINGS = ("noise", "measurement")
_CHUNK = 32


def trajectory_rng(base_seed, index):
    """Private generator of trajectory ``index``; independent of any worker layout."""
    seq = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.SFC64(seq))


@dataclass(frozen=True)
class PureGaussianTrajectoryState:
    xc: float
    pc: float
    alpha: complex
    phase: complex = 0j

    def __post_init__(self):
        if not self.alpha.real > 0:
            raise DomainError(f"Re(alpha) must be positive, got {self.alpha!r}")

    @classmethod
    def coherent(cls, omega, xc=0.0, pc=0.0):
        alpha = complex(0.5 * omega)
        return cls(xc, pc, alpha, complex(0.25 * math.log(2.0 * alpha.real / math.pi)))

    @property
    def width_moments(self):
        """``(Vx, Vp, Cxp)`` of the wavepacket about its center."""
        return _width_moments(self.alpha)

    @property
    def norm(self):
        a = self.alpha.real
        return math.exp(2.0 * self.phase.real) * math.sqrt(math.pi / (2.0 * a))


def _width_moments(alpha):
    a = np.real(alpha)
    b = np.imag(alpha)
    return 0.25 / a, (a * a + b * b) / a, -0.5 * b / a


@dataclass(frozen=True)
class Trajectory:
    """One realization: ``xc``, ``pc``, ``alpha`` and ``phase`` at every step."""

    times: np.ndarray
    xc: np.ndarray
    pc: np.ndarray
    alpha: np.ndarray
    phase: np.ndarray
    unraveling: str
    seed: int

    def state(self, i) -> PureGaussianTrajectoryState:
        return PureGaussianTrajectoryState(
            float(self.xc[i]), float(self.pc[i]), complex(self.alpha[i]), complex(self.phase[i])
        )

    def moments(self):
        """Quantum ``(xx, pp, xp)`` of the pure state at every step."""
        vx, vp, cxp = _width_moments(self.alpha)
        return vx + self.xc**2, vp + self.pc**2, cxp + self.xc * self.pc


@dataclass(frozen=True)
class EnsembleStats:
    times: np.ndarray
    mean_x: np.ndarray
    mean_p: np.ndarray
    xx: np.ndarray
    pp: np.ndarray
    xp: np.ndarray
    se_mean_x: np.ndarray
    se_mean_p: np.ndarray
    se_xx: np.ndarray
    se_pp: np.ndarray
    se_xp: np.ndarray
    n_traj: int
    seed: int
    unraveling: str

    @property
    def degenerate(self):
        """Standard errors are undefined for a single trajectory."""
        return self.n_traj < 2


class _Drive:
    """Controls and width evolution sampled on the SDE grid."""

    def __init__(self, schedule: ControlSchedule, unraveling: str, n_steps: int, alpha0=None):
        if unraveling not in UNRAVELINGS:
            raise DomainError(f"unknown unraveling {unraveling!r}, expected one of {UNRAVELINGS}")
        if int(n_steps) != n_steps or n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {n_steps!r}")
        self.n = n = int(n_steps)
        self.unraveling = unraveling
        self.t_f = t_f = schedule.t_f
        self.dt = dt = t_f / n
        self.times = np.linspace(0.0, t_f, n + 1)
        mid = self.times[:-1] + 0.5 * dt
        w2, g = schedule.controls_at(self.times)
        w2_mid, g_mid = schedule.controls_at(mid)
        if np.min(g) < -GAMMA_ZERO or np.min(g_mid) < -GAMMA_ZERO:
            i = int(np.argmin(g))
            raise PreconditionError(
                f"gamma_t < 0 (min {float(np.min(g)):.3g} at t = {self.times[i]:.6g}): "
                "a non-Markovian schedule has no stochastic realization"
            )
        g = np.where(g < GAMMA_ZERO, 0.0, g)
        g_mid = np.where(g_mid < GAMMA_ZERO, 0.0, g_mid)
        self.w2, self.gamma = w2, g
        measured = unraveling == "measurement"
        if alpha0 is None:
            alpha0 = complex(0.5 * schedule.spec.start.omega)
        self.alpha = _riccati(complex(alpha0), w2, w2_mid, g, g_mid, dt, measured)
        vx, _, cxp = _width_moments(self.alpha)
        root = np.sqrt(2.0 * g[:-1])
        if measured:
            self.kick = np.stack([2.0 * root * vx[:-1], 2.0 * root * cxp[:-1]], axis=1)
        else:
            self.kick = np.stack([np.zeros(n), -root], axis=1)
        # excess covariance of the thermal start over the coherent state
        start = covariance_moments(thermal_coeffs(schedule.spec.start))
        w0 = schedule.spec.start.omega
        self.init_sd = (math.sqrt(start.xx - 0.5 / w0), math.sqrt(start.pp - 0.5 * w0))


def _riccati(alpha0, w2, w2_mid, g, g_mid, dt, measured):
    n = len(w2) - 1
    out = np.empty(n + 1, dtype=complex)
    a = out[0] = alpha0
    c = 2.0 if measured else 0.0
    for i in range(n):
        f0 = -2j * a * a + 0.5j * w2[i] + c * g[i]
        fm = 0.5j * w2_mid[i] + c * g_mid[i]
        a1 = a + 0.5 * dt * f0
        k2 = -2j * a1 * a1 + fm
        a2 = a + 0.5 * dt * k2
        k3 = -2j * a2 * a2 + fm
        a3 = a + dt * k3
        k4 = -2j * a3 * a3 + 0.5j * w2[i + 1] + c * g[i + 1]
        a = a + (dt / 6.0) * (f0 + 2.0 * (k2 + k3) + k4)
        out[i + 1] = a
    if not np.all(out.real > 0):
        i = int(np.argmax(~(out.real > 0)))
        raise IntegrationError("Re(alpha) <= 0: width step failed, reduce dt", i * dt)
    return out


def _draws(rng, n):
    z0 = rng.standard_normal(2)
    dw = rng.standard_normal(n)
    return z0, dw


def _simulate(schedule, seed, unraveling, n_steps, init):
    drive = _Drive(schedule, unraveling, n_steps, None if init is None else init.alpha)
    n, dt = drive.n, drive.dt
    rng = trajectory_rng(seed, 0)
    z0, dw = _draws(rng, n)
    dw *= math.sqrt(dt)
    alpha = drive.alpha
    if init is None:
        xc, pc = z0[0] * drive.init_sd[0], z0[1] * drive.init_sd[1]
    else:
        xc, pc = init.xc, init.pc
    xs = np.empty(n + 1)
    ps = np.empty(n + 1)
    theta = np.empty(n + 1)
    xs[0], ps[0], theta[0] = xc, pc, 0.0 if init is None else init.phase.imag
    w2, kick = drive.w2, drive.kick
    track_phase = unraveling == "noise"
    th = theta[0]
    for i in range(n):
        if track_phase:
            # global phase of a wavepacket: Lagrangian of the center minus Re(alpha)
            th += (-alpha[i].real + 0.5 * pc * pc - 0.5 * w2[i] * xc * xc) * dt + kick[i, 1] * xc * dw[i]
        pc = pc - w2[i] * xc * dt + kick[i, 1] * dw[i]
        xc = xc + pc * dt + kick[i, 0] * dw[i]
        xs[i + 1], ps[i + 1], theta[i + 1] = xc, pc, th
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ps))):
        raise IntegrationError("non-finite wavepacket center")
    phase = 0.25 * np.log(2.0 * alpha.real / np.pi) + 1j * theta
    return Trajectory(drive.times, xs, ps, alpha, phase, unraveling, int(seed))


def simulate_noise_trajectory(
    schedule: ControlSchedule,
    seed: int,
    n_steps: int = DEFAULT_SDE_STEPS,
    init: PureGaussianTrajectoryState | None = None,
) -> Trajectory:
    """One realization of the stochastic-Hamiltonian unraveling.

    Without ``init`` the start is drawn from the thermal initial state using
    the same random stream as ensemble member 0 of ``base_seed = seed``.
    """
    return _simulate(schedule, seed, "noise", n_steps, init)


def simulate_measurement_trajectory(
    schedule: ControlSchedule,
    seed: int,
    n_steps: int = DEFAULT_SDE_STEPS,
    init: PureGaussianTrajectoryState | None = None,
) -> Trajectory:
    """One realization of unit-efficiency continuous position measurement."""
    return _simulate(schedule, seed, "measurement", n_steps, init)


def _sample_indices(n, n_samples):
    if n % n_samples:
        raise DomainError(f"SDE steps ({n}) must be a multiple of the number of samples ({n_samples})")
    stride = n // n_samples
    return np.arange(1, n_samples + 1) * stride


class _LinearPropagator:
    """Closed form of the Euler-Maruyama recursion for the center.

    One step p' = p - w^2 x dt + b_p dW, x' = x + p' dt + b_x dW is
    z_{k+1} = T_k z_k + e_k dW_k with T_k = [[1 - c dt, dt], [-c, 1]],
    c = w_k^2 dt, det T_k = 1 and e_k = (b_x + dt b_p, b_p).  Hence
    z_j = Phi_j (z_0 + sum_{k<j} Phi_{k+1}^{-1} e_k dW_k) exactly, with
    Phi_j = T_{j-1} ... T_0, and the sum over a block of steps is a single
    matrix product over a whole batch of trajectories.
    """

    def __init__(self, drive: _Drive, samples):
        n, dt, w2 = drive.n, drive.dt, drive.w2
        gains = np.empty((n, 2))
        phi = np.empty((len(samples), 2, 2))
        # Psi = Phi^{-1}, tracked as a running product of inverse steps
        p00, p01, p10, p11 = 1.0, 0.0, 0.0, 1.0
        f00, f01, f10, f11 = 1.0, 0.0, 0.0, 1.0
        kick = drive.kick
        j = 0
        for k in range(n):
            c = w2[k] * dt
            a = 1.0 - c * dt
            # Phi <- T Phi
            f00, f01, f10, f11 = a * f00 + dt * f10, a * f01 + dt * f11, f10 - c * f00, f11 - c * f01
            # Psi <- Psi T^{-1}, T^{-1} = [[1, -dt], [c, a]]
            p00, p01, p10, p11 = p00 + c * p01, a * p01 - dt * p00, p10 + c * p11, a * p11 - dt * p10
            ex = kick[k, 0] + dt * kick[k, 1]
            ep = kick[k, 1]
            gains[k, 0] = p00 * ex + p01 * ep
            gains[k, 1] = p10 * ex + p11 * ep
            if j < len(samples) and k + 1 == samples[j]:
                phi[j] = ((f00, f01), (f10, f11))
                j += 1
        self.gains = gains * math.sqrt(dt)
        self.phi = phi
        self.samples = np.asarray(samples)
        self.init_sd = np.asarray(drive.init_sd)

    def centers(self, z0, dw):
        """Centers at the sample steps: ``z0`` (batch, 2), ``dw`` (batch, n) unit normals."""
        out = np.empty((z0.shape[0], len(self.samples), 2))
        acc = z0.copy()
        start = 0
        for j, stop in enumerate(self.samples):
            acc += dw[:, start:stop] @ self.gains[start:stop]
            out[:, j] = acc @ self.phi[j].T
            start = stop
        return out


def _run_chunk(args):
    prop, base_seed, first, count, n = args
    z0 = np.empty((count, 2))
    dw = np.empty((count, n))
    for r in range(count):
        rng = trajectory_rng(base_seed, first + r)
        z0[r] = rng.standard_normal(2)
        rng.standard_normal(out=dw[r])
    return prop.centers(z0 * prop.init_sd, dw)


def ensemble_centers(
    schedule: ControlSchedule,
    n_traj: int,
    base_seed: int,
    unraveling: str = "noise",
    n_steps: int = DEFAULT_SDE_STEPS,
    n_samples: int = 100,
    workers: int = 1,
):
    """Wavepacket centers of ``n_traj`` trajectories at ``n_samples`` times.

    Returns ``(drive, sample_indices, centers)`` with centers of shape
    ``(n_traj, n_samples, 2)``.  The result does not depend on ``workers``.
    """
    if int(n_traj) != n_traj or n_traj < 1:
        raise DomainError(f"n_traj must be a positive integer, got {n_traj!r}")
    drive = _Drive(schedule, unraveling, n_steps)
    samples = _sample_indices(drive.n, n_samples)
    prop = _LinearPropagator(drive, samples)
    jobs = [
        (prop, base_seed, first, min(_CHUNK, n_traj - first), drive.n)
        for first in range(0, n_traj, _CHUNK)
    ]
    workers = max(1, min(int(workers), len(jobs)))
    if workers == 1:
        parts = [_run_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    return drive, samples, np.concatenate(parts, axis=0)


def _mean_se(values):
    n = values.shape[0]
    mean = values.mean(axis=0)
    if n < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, values.std(axis=0, ddof=1) / math.sqrt(n)


def ensemble_average(
    schedule: ControlSchedule,
    n_traj: int,
    base_seed: int,
    unraveling: str = "noise",
    n_steps: int = DEFAULT_SDE_STEPS,
    n_samples: int = 100,
    workers: int = 1,
) -> EnsembleStats:
    """Moments of rho_t = <|psi_t><psi_t|> estimated from a trajectory ensemble.

    All trajectories share the deterministic width, so e.g.
    xx = Vx + mean(xc^2); standard errors come from the scatter of the
    centers across trajectories.
    """
    drive, samples, z = ensemble_centers(
        schedule, n_traj, base_seed, unraveling, n_steps, n_samples, workers
    )
    vx, vp, cxp = _width_moments(drive.alpha[samples])
    xc, pc = z[..., 0], z[..., 1]
    mx, sx = _mean_se(xc)
    mp, sp = _mean_se(pc)
    mxx, sxx = _mean_se(xc * xc)
    mpp, spp = _mean_se(pc * pc)
    mxp, sxp = _mean_se(xc * pc)
    return EnsembleStats(
        times=drive.times[samples],
        mean_x=mx,
        mean_p=mp,
        xx=vx + mxx,
        pp=vp + mpp,
        xp=cxp + mxp,
        se_mean_x=sx,
        se_mean_p=sp,
        se_xx=sxx,
        se_pp=spp,
        se_xp=sxp,
        n_traj=int(n_traj),
        seed=int(base_seed),
        unraveling=unraveling,
    )


def default_workers():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
