"""Control schedules for shortcuts to thermalization.

The Gaussian coefficients A_t and C_t are interpolated between two thermal
endpoints with a smooth ansatz f(t / t_f).  Requiring that the Gaussian form
solve the dephasing master equation exactly then fixes the trap frequency
omega_t**2 and the dephasing strength gamma_t pointwise in time, so a schedule
is a closed-form function of t and the time grid is only used for export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, SingularDenominatorError
from .gaussian_core import (
    GaussianCoeffs,
    ThermalEndpoint,
    entropy_array,
    spectral_params,
    thermal_coeffs,
)

BOUNDARY_TOL = 1e-9
# |gamma| below this counts as zero when flagging non-Markovian schedules
GAMMA_ZERO = 1e-12


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0) or np.any(tau > 1.0) or np.any(np.isnan(tau)):
        raise DomainError("ansatz argument must lie in [0, 1]")
    return tau


def smoothstep5(tau):
    """Quintic ramp 10 tau^3 - 15 tau^4 + 6 tau^5 and its first three derivatives."""
    t = _check_tau(tau)
    t2 = t * t
    f = t2 * t * (10.0 + t * (-15.0 + 6.0 * t))
    f1 = 30.0 * t2 * (1.0 + t * (-2.0 + t))
    f2 = 60.0 * t * (1.0 + t * (-3.0 + 2.0 * t))
    f3 = 60.0 + t * (-360.0 + 360.0 * t)
    return f, f1, f2, f3


def smoothstep7(tau):
    """Septic ramp 35 t^4 - 84 t^5 + 70 t^6 - 20 t^7; third derivative also
    vanishes at the ends."""
    t = _check_tau(tau)
    t2 = t * t
    t3 = t2 * t
    f = t3 * t * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    f1 = 140.0 * t3 * (1.0 + t * (-3.0 + t * (3.0 - t)))
    f2 = 420.0 * t2 * (1.0 + t * (-4.0 + t * (5.0 - 2.0 * t)))
    f3 = 840.0 * t * (1.0 + t * (-6.0 + t * (10.0 - 5.0 * t)))
    return f, f1, f2, f3


@dataclass(frozen=True)
class Ansatz:
    """Interpolating ramp f on [0, 1] with f(0) = 0, f(1) = 1 and vanishing
    first and second derivatives at both ends."""

    name: str
    ramp: Callable

    def __post_init__(self):
        f, f1, f2, _ = self.ramp(np.array([0.0, 1.0]))
        ok = (
            abs(f[0]) < 1e-14
            and abs(f[1] - 1.0) < 1e-14
            and np.all(np.abs(f1) < 1e-12)
            and np.all(np.abs(f2) < 1e-12)
        )
        if not ok:
            raise DomainError(f"ansatz {self.name!r} violates the stationary boundary conditions")

    def __call__(self, tau):
        return self.ramp(tau)


QUINTIC = Ansatz("quintic", smoothstep5)
SEPTIC = Ansatz("septic", smoothstep7)
ANSATZE = {a.name: a for a in (QUINTIC, SEPTIC)}


@dataclass(frozen=True)
class ProtocolSpec:
    start: ThermalEndpoint
    end: ThermalEndpoint
    t_f: float
    n_steps: int = 4000
    ansatz: Ansatz = field(default=QUINTIC)

    def __post_init__(self):
        if not (math.isfinite(self.t_f) and self.t_f > 0):
            raise DomainError(f"t_f must be finite and positive, got {self.t_f!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps must be an integer >= 2, got {self.n_steps!r}")

    @property
    def initial(self) -> GaussianCoeffs:
        return thermal_coeffs(self.start)

    @property
    def final(self) -> GaussianCoeffs:
        return thermal_coeffs(self.end)

    def times(self):
        return np.linspace(0.0, self.t_f, self.n_steps + 1)


class Interpolated(NamedTuple):
    A: np.ndarray
    C: np.ndarray
    dA: np.ndarray
    dC: np.ndarray
    ddA: np.ndarray
    ddC: np.ndarray


def interpolate_coeffs(spec: ProtocolSpec, t) -> Interpolated:
    """A_t, C_t and their first two time derivatives (scalar or array ``t``)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > spec.t_f):
        raise DomainError(f"t must lie in [0, {spec.t_f!r}]")
    c0, c1 = spec.initial, spec.final
    dA, dC = c1.A - c0.A, c1.C - c0.C
    f, f1, f2, _ = spec.ansatz(t / spec.t_f)
    r1 = 1.0 / spec.t_f
    r2 = r1 * r1
    # exact at both ends and constant for identical endpoints
    return Interpolated(
        np.where(f == 1.0, c1.A, c0.A + dA * f),
        np.where(f == 1.0, c1.C, c0.C + dC * f),
        dA * f1 * r1,
        dC * f1 * r1,
        dA * f2 * r2,
        dC * f2 * r2,
    )


def _sum_checked(A, C):
    s = np.asarray(A + C, dtype=float)
    if np.any(s <= 0):
        raise SingularDenominatorError("A + C <= 0 in control formula")
    return s


def control_frequency(A, C, dA, dC, ddA, ddC):
    """Trap frequency squared that keeps the Gaussian form exact."""
    s = _sum_checked(A, C)
    r = (dA + dC) / s
    return 4.0 * (A - C) * s - 0.75 * r * r + 0.5 * (ddA + ddC) / s


def control_dephasing(A, C, dA, dC):
    s = _sum_checked(A, C)
    return (dA * C - A * dC) / s


def dephasing_rate_of_change(A, C, dA, dC, ddA, ddC):
    """Analytic time derivative of :func:`control_dephasing`."""
    s = _sum_checked(A, C)
    num = dA * C - A * dC
    return ((ddA * C - A * ddC) * s - num * (dA + dC)) / (s * s)


def effective_Omega(A, C, dA, dC):
    """Omega_t = -(A' + C') / (2 (A + C)); the exact trajectory has B_t = Omega_t / 2."""
    s = _sum_checked(A, C)
    return -0.5 * (dA + dC) / s


def reference_frequency_sq(A, C):
    """omega_tilde**2 of the instantaneous thermal state sigma_t."""
    return 4.0 * (A - C) * (A + C)


def scaling_eta(spec: ProtocolSpec, t):
    """eta_t = N_0 / N_t from the normalization ratio sqrt((A_0 + C_0) / (A_t + C_t))."""
    c0 = spec.initial
    ip = interpolate_coeffs(spec, t)
    return np.sqrt((c0.A + c0.C) / _sum_checked(ip.A, ip.C))


def scaling_eta_thermal(spec: ProtocolSpec, t):
    """eta_t from the scaling factor kappa_t = sqrt(omega_0 / omega_tilde_t) and
    the effective temperatures.

    With N_t = k_t sqrt(tanh(eps_t / 2) / pi) the ratio N_0 / N_t is
    kappa_t * sqrt(tanh(eps_0 / 2) * coth(eps_t / 2)).
    """
    c0 = spec.initial
    ip = interpolate_coeffs(spec, t)
    _, _, eps0, w0 = spectral_params(c0.A, c0.C)
    _, _, eps, w = spectral_params(ip.A, ip.C)
    kappa = np.sqrt(w0 / w)
    return kappa * np.sqrt(np.tanh(0.5 * eps0) / np.tanh(0.5 * eps))


@dataclass(frozen=True)
class ControlSchedule:
    """A synthesized protocol sampled on a uniform grid.

    The arrays are exports; :meth:`omega_sq_at` and :meth:`gamma_at` evaluate
    the controls analytically at any time, which is what the integrators use.
    """

    spec: ProtocolSpec
    times: np.ndarray
    A: np.ndarray
    C: np.ndarray
    dA: np.ndarray
    dC: np.ndarray
    ddA: np.ndarray
    ddC: np.ndarray
    omega_sq: np.ndarray
    gamma: np.ndarray
    Omega: np.ndarray
    eta: np.ndarray

    @property
    def t_f(self):
        return self.spec.t_f

    @property
    def B_implied(self):
        return 0.5 * self.Omega

    @property
    def non_markovian(self):
        """True when gamma_t < 0 somewhere, i.e. no stochastic realization exists."""
        return bool(np.any(self.gamma < -GAMMA_ZERO))

    def controls_at(self, t):
        ip = interpolate_coeffs(self.spec, t)
        return control_frequency(*ip), control_dephasing(ip.A, ip.C, ip.dA, ip.dC)

    def omega_sq_at(self, t):
        return control_frequency(*interpolate_coeffs(self.spec, t))

    def gamma_at(self, t):
        ip = interpolate_coeffs(self.spec, t)
        return control_dephasing(ip.A, ip.C, ip.dA, ip.dC)

    def spectral(self):
        """``(k, u, eps_tilde, omega_tilde)`` of sigma_t along the grid."""
        return spectral_params(self.A, self.C)

    def entropy(self):
        return entropy_array(self.spectral()[1])


def synthesize_schedule(spec: ProtocolSpec) -> ControlSchedule:
    t = spec.times()
    ip = interpolate_coeffs(spec, t)
    s = _sum_checked(ip.A, ip.C)
    c0 = spec.initial
    return ControlSchedule(
        spec=spec,
        times=t,
        A=ip.A,
        C=ip.C,
        dA=ip.dA,
        dC=ip.dC,
        ddA=ip.ddA,
        ddC=ip.ddC,
        omega_sq=control_frequency(*ip),
        gamma=control_dephasing(ip.A, ip.C, ip.dA, ip.dC),
        Omega=effective_Omega(ip.A, ip.C, ip.dA, ip.dC),
        eta=np.sqrt((c0.A + c0.C) / s),
    )


class GammaMax(NamedTuple):
    t_max: float
    gamma_max: float
    degenerate: bool = False

    @property
    def sign(self):
        return int(np.sign(self.gamma_max))


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(fun, a, b, tol):
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def gamma_max(spec: ProtocolSpec) -> GammaMax:
    """Location and signed value of the extremum of |gamma_t| on (0, t_f).

    The search runs in reduced time tau = t / t_f: a grid scan, golden-section
    refinement to 1e-12, then a Brent polish on the root of d gamma / d tau
    (golden section alone only resolves a smooth maximum to ~sqrt(machine eps)).
    """
    t_f = spec.t_f

    def gamma_tau(tau):
        ip = interpolate_coeffs(spec, np.clip(tau, 0.0, 1.0) * t_f)
        return control_dephasing(ip.A, ip.C, ip.dA, ip.dC)

    def slope_tau(tau):
        ip = interpolate_coeffs(spec, tau * t_f)
        return float(dephasing_rate_of_change(*ip))

    n = max(int(spec.n_steps), 64)
    tau = np.linspace(0.0, 1.0, n + 1)
    g = np.abs(gamma_tau(tau))
    i = int(np.argmax(g))
    if g[i] == 0.0:
        return GammaMax(0.5 * t_f, 0.0, True)
    lo, hi = tau[max(i - 1, 0)], tau[min(i + 1, n)]
    best = _golden_max(lambda x: abs(float(gamma_tau(x))), lo, hi, 1e-12 / t_f)
    s_lo, s_hi = slope_tau(lo), slope_tau(hi)
    if 0.0 < lo and hi < 1.0 and s_lo * s_hi < 0:
        # |gamma| is flat at the peak, so comparing values there only compares rounding noise
        best = brentq(slope_tau, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return GammaMax(best * t_f, float(gamma_tau(best)), False)
