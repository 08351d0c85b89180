"""Deterministic propagation of the dephasing master equation.

Two independent routes:

* the consistency equations for the Gaussian coefficients (A, B, C),
* the closed linear system for the second moments (xx, xp, pp), obtained from
  d<O>/dt = Tr(O L[rho]) with the double commutator -gamma [x, [x, rho]]
  feeding only <p^2> at rate 2 gamma.

Both use the same fixed-step classical Runge-Kutta scheme, with the controls
evaluated analytically at every stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, IntegrationError
from ..gaussian_core import (
    HEISENBERG_SLACK,
    GaussianCoeffs,
    Moments,
    moments_arrays,
    spectral_params,
)
from ..protocol import ControlSchedule

DEFAULT_STEPS = 4000


def rk4(rhs, y0, t0, t1, n_steps, check=None, params=None):
    """Classical fixed-step Runge-Kutta on a uniform grid.

    ``rhs(t, y, p)`` returns dy/dt as a sequence, where ``p`` is the row of
    ``params(times)`` at the stage time (``None`` without ``params``).  The
    parameters are evaluated once, vectorized, at the nodes and midpoints.
    ``check(t, y)`` may raise to abort.  Returns ``(times, ys)`` with ``ys`` of
    shape ``(n_steps + 1, len(y0))``.
    """
    times = np.linspace(t0, t1, n_steps + 1)
    h = (t1 - t0) / n_steps
    if params is None:
        nodes = mids = [None] * (n_steps + 1)
    else:
        nodes = np.column_stack(params(times)).tolist()
        mids = np.column_stack(params(times[:-1] + 0.5 * h)).tolist()
    y = [float(v) for v in y0]
    out = [y]
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n_steps):
        t = float(times[i])
        tm = t + half
        pm = mids[i]
        k1 = rhs(t, y, nodes[i])
        k2 = rhs(tm, [a + half * b for a, b in zip(y, k1)], pm)
        k3 = rhs(tm, [a + half * b for a, b in zip(y, k2)], pm)
        k4 = rhs(float(times[i + 1]), [a + h * b for a, b in zip(y, k3)], nodes[i + 1])
        y = [a + sixth * (b1 + 2.0 * (b2 + b3) + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        if check is not None:
            check(times[i + 1], y)
        out.append(y)
    return times, np.array(out)


@dataclass(frozen=True)
class CoeffTrajectory:
    times: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt: float
    order: int = 4
    method: str = "rk4"

    def __len__(self):
        return len(self.times)

    def at(self, i) -> GaussianCoeffs:
        return GaussianCoeffs(float(self.A[i]), float(self.B[i]), float(self.C[i]))

    @property
    def final(self) -> GaussianCoeffs:
        return self.at(-1)

    def moments(self):
        """``(xx, pp, xp)`` arrays of the Gaussian state at every stored time."""
        return moments_arrays(self.A, self.B, self.C)

    def spectral(self):
        """``(k, u, eps_tilde, omega_tilde)`` arrays."""
        return spectral_params(self.A, self.C)


@dataclass(frozen=True)
class MomentTrajectory:
    times: np.ndarray
    xx: np.ndarray
    pp: np.ndarray
    xp: np.ndarray
    dt: float

    def at(self, i) -> Moments:
        return Moments(float(self.xx[i]), float(self.pp[i]), float(self.xp[i]))


def _steps(schedule, n_steps):
    n = schedule.spec.n_steps if n_steps is None else n_steps
    if int(n) != n or n < 1:
        raise DomainError(f"n_steps must be a positive integer, got {n!r}")
    return int(n)


def integrate_consistency(
    schedule: ControlSchedule, init: GaussianCoeffs, n_steps: int | None = None
) -> CoeffTrajectory:
    """Integrate dB = 2(A^2 - B^2 - C^2) - w^2/2, dA = g - 4AB, dC = -g - 4BC."""
    n = _steps(schedule, n_steps)

    def rhs(t, y, controls):
        A, B, C = y
        w2, g = controls
        return (g - 4.0 * A * B, 2.0 * (A * A - B * B - C * C) - 0.5 * w2, -g - 4.0 * B * C)

    def check(t, y):
        if not all(math.isfinite(v) for v in y):
            raise IntegrationError("non-finite Gaussian coefficients", t)
        if y[0] + y[2] <= 0:
            raise IntegrationError("A + C <= 0: Gaussian state blew up", t)

    times, ys = rk4(rhs, [init.A, init.B, init.C], 0.0, schedule.t_f, n, check, schedule.controls_at)
    return CoeffTrajectory(times, ys[:, 0], ys[:, 1], ys[:, 2], dt=schedule.t_f / n)


def _moment_rhs(xx, xp, pp, w2, g):
    return (2.0 * xp, pp - w2 * xx, -2.0 * w2 * xp + 2.0 * g)


def integrate_covariance_oracle(
    schedule: ControlSchedule, init: Moments, n_steps: int | None = None
) -> MomentTrajectory:
    n = _steps(schedule, n_steps)

    def rhs(t, y, controls):
        return _moment_rhs(y[0], y[1], y[2], controls[0], controls[1])

    def check(t, y):
        xx, xp, pp = y
        if not all(math.isfinite(v) for v in y):
            raise IntegrationError("non-finite moments", t)
        if xx * pp - xp * xp < 0.25 - HEISENBERG_SLACK:
            raise IntegrationError("moment oracle violates the Heisenberg bound", t)

    times, ys = rk4(rhs, [init.xx, init.xp, init.pp], 0.0, schedule.t_f, n, check, schedule.controls_at)
    return MomentTrajectory(times, ys[:, 0], ys[:, 2], ys[:, 1], dt=schedule.t_f / n)
