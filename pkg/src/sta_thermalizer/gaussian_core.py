"""Gaussian density matrices of a harmonic oscillator.

A state is described in coordinate space by

    rho(x, x') = N exp(-A (x^2 + x'^2) + i B (x^2 - x'^2) - 2 C x x'),
    N = sqrt(2 (A + C) / pi),

in natural units hbar = m = 1.  The same state can be written as a thermal
state sigma of an oscillator of frequency ``omega_tilde`` rotated by
exp(-i B x^2); its spectrum is p_n = u**n (1 - u) with u = exp(-eps_tilde).
This module converts between the thermal, coefficient, spectral and
second-moment pictures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, DomainError, SingularDenominatorError

# -A/C must exceed 1 by this much before acosh is taken
ACOSH_MARGIN = 1e-14
# below this, u is treated as an exact pure state in the entropy
PURE_STATE_U = 1e-15
HEISENBERG_SLACK = 1e-10


@dataclass(frozen=True)
class ThermalEndpoint:
    """Equilibrium state of an oscillator with frequency ``omega`` at inverse
    temperature ``beta``."""

    omega: float
    beta: float

    def __post_init__(self):
        for name in ("omega", "beta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and positive, got {value!r}")

    @property
    def phase_space_density(self):
        """beta * omega, conserved by phase-space preserving processes."""
        return self.beta * self.omega


@dataclass(frozen=True)
class GaussianCoeffs:
    A: float
    B: float
    C: float

    def __post_init__(self):
        A, B, C = self.A, self.B, self.C
        if not all(math.isfinite(v) for v in (A, B, C)):
            raise DomainError(f"non-finite Gaussian coefficients {(A, B, C)!r}")
        if A + C <= 0:
            raise SingularDenominatorError(f"A + C = {A + C!r} <= 0, state not normalizable")
        if A <= abs(C):
            raise DomainError(f"A = {A!r} <= |C| = {abs(C)!r}, spectrum not positive")

    @property
    def N(self):
        return math.sqrt(2.0 * (self.A + self.C) / math.pi)

    def kernel(self, x, xp):
        """Evaluate rho(x, x') (broadcasts over numpy arrays)."""
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        return self.N * np.exp(
            -self.A * (x * x + xp * xp) + 1j * self.B * (x * x - xp * xp) - 2.0 * self.C * x * xp
        )


@dataclass(frozen=True)
class SpectralData:
    """Instantaneous diagonalization of a Gaussian state.

    ``k`` is the inverse length of the eigenbasis, ``u = exp(-eps_tilde)`` the
    Boltzmann weight of the spectrum and ``omega_tilde = k**2`` the frequency
    of the equivalent thermal oscillator.  ``B`` is carried through unchanged.
    """

    k: float
    u: float
    eps_tilde: float
    omega_tilde: float
    B: float = 0.0

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise DomainError(f"k must be finite and positive, got {self.k!r}")
        if not 0.0 <= self.u < 1.0:
            raise DomainError(f"u must lie in [0, 1), got {self.u!r}")
        if not self.eps_tilde > 0:
            raise DomainError(f"eps_tilde must be positive, got {self.eps_tilde!r}")

    @property
    def beta_tilde(self):
        return self.eps_tilde / self.omega_tilde

    @classmethod
    def from_weight(cls, k, u, B=0.0):
        eps = math.inf if u == 0 else -math.log(u)
        return cls(k=k, u=u, eps_tilde=eps, omega_tilde=k * k, B=B)


@dataclass(frozen=True)
class Moments:
    """Second moments <x^2>, <p^2> and the symmetrized <{x, p}>/2."""

    xx: float
    pp: float
    xp: float

    def __post_init__(self):
        if not (self.xx > 0 and self.pp > 0):
            raise DomainError(f"variances must be positive, got xx={self.xx!r}, pp={self.pp!r}")

    @property
    def uncertainty(self):
        """Determinant xx*pp - xp**2 of the covariance matrix."""
        return self.xx * self.pp - self.xp * self.xp

    @property
    def heisenberg_defect(self):
        """Positive when the Robertson-Schroedinger bound 1/4 is violated."""
        return 0.25 - self.uncertainty

    def as_array(self):
        return np.array([self.xx, self.pp, self.xp])


def thermal_coeffs(endpoint: ThermalEndpoint) -> GaussianCoeffs:
    w = endpoint.omega
    x = endpoint.beta * w
    try:
        A = 0.5 * w / math.tanh(x)
        C = -0.5 * w / math.sinh(x)
    except OverflowError:
        raise DomainError(f"thermal coefficients overflow for beta*omega = {x!r}") from None
    if C == 0.0:
        raise DomainError(f"thermal coefficient C underflows to 0 for beta*omega = {x!r}")
    return GaussianCoeffs(A, 0.0, C)


def spectral_params(A, C):
    """Vectorized core of :func:`spectral_decompose`.

    Returns ``(k, u, eps_tilde, omega_tilde)``; no validation.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    s = A + C
    omega_tilde = 2.0 * np.sqrt((A - C) * s)
    # acosh(r) = 2 asinh(sqrt((r - 1)/2)), exact near r = 1; C -> 0 gives u = 0
    with np.errstate(over="ignore", divide="ignore"):
        eps = 2.0 * np.arcsinh(np.sqrt(-s / (2.0 * C)))
    return np.sqrt(omega_tilde), np.exp(-eps), eps, omega_tilde


def spectral_decompose(coeffs: GaussianCoeffs) -> SpectralData:
    A, C = coeffs.A, coeffs.C
    if C >= 0:
        raise DegenerateSpectrumError(f"C = {C!r} >= 0: pure or unphysical state, no thermal spectrum")
    ratio = -A / C
    if not ratio >= 1.0 + ACOSH_MARGIN:
        raise DegenerateSpectrumError(f"-A/C = {ratio!r} too close to (or below) 1")
    k, u, eps, omega_tilde = (float(v) for v in spectral_params(A, C))
    return SpectralData(k=k, u=u, eps_tilde=eps, omega_tilde=omega_tilde, B=coeffs.B)


def coeffs_from_spectral(s: SpectralData) -> GaussianCoeffs:
    k2, u = s.k * s.k, s.u
    one_minus_u2 = (1.0 - u) * (1.0 + u)
    A = k2 * (1.0 + u * u) / (2.0 * one_minus_u2)
    C = -k2 * u / one_minus_u2
    return GaussianCoeffs(A, s.B, C)


def _check_weight(u):
    if not (0.0 <= u < 1.0):
        raise DomainError(f"u must lie in [0, 1), got {u!r}")


def von_neumann_entropy(u: float) -> float:
    """Entropy in nats of the spectrum u**n (1 - u)."""
    _check_weight(u)
    if u < PURE_STATE_U:
        return 0.0
    return -u * math.log(u) / (1.0 - u) - math.log1p(-u)


def mean_phonon(u: float) -> float:
    _check_weight(u)
    return u / (1.0 - u)


def purity(u: float) -> float:
    """Tr(rho^2) = sum of p_n^2."""
    _check_weight(u)
    return (1.0 - u) / (1.0 + u)


def entropy_array(u):
    """Vectorized :func:`von_neumann_entropy` without domain checks."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    mask = u >= PURE_STATE_U
    v = u[mask]
    out[mask] = -v * np.log(v) / (1.0 - v) - np.log1p(-v)
    return out


def covariance_moments(coeffs: GaussianCoeffs) -> Moments:
    # Gaussian integrals of rho(x,x) and of the first derivatives of the kernel at x = x'
    A, B, C = coeffs.A, coeffs.B, coeffs.C
    s = A + C
    return Moments(xx=0.25 / s, pp=A - C + B * B / s, xp=0.5 * B / s)


def moments_arrays(A, B, C):
    """Vectorized :func:`covariance_moments`; returns ``(xx, pp, xp)``."""
    A, B, C = (np.asarray(v, dtype=float) for v in (A, B, C))
    s = A + C
    return 0.25 / s, A - C + B * B / s, 0.5 * B / s


def coeffs_from_moments(m: Moments) -> GaussianCoeffs:
    s = 0.25 / m.xx
    B = 2.0 * s * m.xp
    d = m.pp - B * B / s  # A - C
    return GaussianCoeffs(0.5 * (s + d), B, 0.5 * (s - d))
