"""Independent numerical oracles.

Brute-force quadrature and dense-grid routes that share no closed forms with
the production code.  They are slow and only meant for verification.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad, trapezoid

from .diagnostics import hermite_eval
from .errors import DomainError
from .gaussian_core import GaussianCoeffs, Moments

# sixth-order central first-derivative stencil at offsets 1, 2, 3
_D1 = np.array([45.0, -9.0, 1.0]) / 60.0


def _ddx(f, h):
    """Derivative at 0 of ``f(offset)`` by the sixth-order central stencil."""
    total = 0.0
    for j, c in enumerate(_D1, start=1):
        total = total + c * (f(j * h) - f(-j * h))
    return total / h


def moments_by_quadrature(coeffs: GaussianCoeffs, n_points: int = 4001, span: float = 12.0) -> Moments:
    """Second moments from the coordinate kernel rho(x, x').

    <x^2> = int x^2 rho(x, x) dx, <p^2> = int d_x d_x' rho |_{x' = x} dx and
    Re <x p> = Re int x (-i d_x rho)|_{x' = x} dx, with trapezoid quadrature on
    [-span sigma, span sigma] and finite-difference derivatives of the kernel.
    """
    s = coeffs.A + coeffs.C
    sigma = 0.5 / math.sqrt(s)  # width of the diagonal rho(x, x)
    x = np.linspace(-span * sigma, span * sigma, n_points)
    # resolve the phase exp(i B x^2) and the cross width over the stencil
    q = abs(coeffs.B) * span * sigma + math.sqrt(abs(coeffs.A) + abs(coeffs.C))
    h = min(2e-3 * sigma, 0.05 / q)
    rho = coeffs.kernel
    diag = rho(x, x).real
    xx = trapezoid(x * x * diag, x)
    mixed = _ddx(lambda a: _ddx(lambda b: rho(x + a, x + b), h), h)
    pp = trapezoid(mixed.real, x)
    dx_rho = _ddx(lambda a: rho(x + a, x), h)
    xp = trapezoid((x * (-1j) * dx_rho).real, x)
    return Moments(float(xx), float(pp), float(xp))


def purity_by_quadrature(coeffs: GaussianCoeffs, n_points: int = 801, span: float = 10.0) -> float:
    """Tr(rho^2) = int int |rho(x, x')|^2 by a 2-D trapezoid rule."""
    wide = 1.0 / math.sqrt(coeffs.A + coeffs.C)
    x = np.linspace(-span * wide, span * wide, n_points)
    X, Y = np.meshgrid(x, x, indexing="ij")
    val = np.abs(coeffs.kernel(X, Y)) ** 2
    return float(trapezoid(trapezoid(val, x, axis=1), x))


def overlap_integral_quadrature(n: int, m: int, b: complex, limit: float = 15.0) -> complex:
    """int exp(-b x^2) H_n(x) H_m(x) dx by adaptive quadrature on [-limit, limit]."""
    if not b.real > 0:
        raise DomainError(f"Re(b) must be positive, got {b!r}")

    def integrand(fn):
        return lambda x: fn(np.exp(-b * x * x) * hermite_eval(n, x) * hermite_eval(m, x))

    # absolute tolerance tied to int |integrand|, since a part may cancel to ~0
    scale = quad(integrand(np.abs), -limit, limit, limit=400)[0]

    def part(fn):
        return quad(integrand(fn), -limit, limit, limit=400, epsabs=1e-13 * scale, epsrel=1e-12)[0]

    return complex(part(np.real), part(np.imag))


def rotated_thermal_coeffs(u: float, B: float, k: float) -> GaussianCoeffs:
    """Kernel coefficients of exp(-i B x^2) sigma exp(i B x^2) for the thermal
    state sigma of inverse length k and Boltzmann weight u, written out from
    the Mehler kernel."""
    # sigma(x, x') = sum_n (1 - u) u^n psi_n(x) psi_n(x'); Mehler gives the Gaussian form
    d = 1.0 - u * u
    A = 0.5 * k * k * (1.0 + u * u) / d
    C = -k * k * u / d
    return GaussianCoeffs(A, B, C)


def _kinetic_matrix(n, dx):
    """Dense P^2 on a periodic grid via the discrete Fourier transform."""
    p = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    eye = np.eye(n)
    return np.real(np.fft.ifft(p[:, None] ** 2 * np.fft.fft(eye, axis=0), axis=0))


def relative_entropy_grid(u: float, B: float, k: float, span: float = 12.0, max_points: int = 3000):
    """S(rho || sigma) by dense-grid linear algebra.

    rho and sigma are discretized as matrices K_ij dx.  Tr(rho ln rho) comes
    from the numerical eigenvalues of rho.  The spectrum of sigma is far below
    machine precision for high levels, so ln sigma is not taken eigenvalue by
    eigenvalue; instead its two leading numerical eigenvalues mu_0, mu_1 fix
    ln sigma = ln mu_0 + ln(mu_1 / mu_0) N on the grid, with
    N = (k^2 X^2 + P^2 / k^2) / 2 - 1/2 and P^2 spectral.
    """
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie in (0, 1), got {u!r}")
    rho_c = rotated_thermal_coeffs(u, B, k)
    sig_c = rotated_thermal_coeffs(u, 0.0, k)
    s = rho_c.A + rho_c.C
    sx = 0.5 / math.sqrt(s)
    sp = math.sqrt(rho_c.A - rho_c.C + B * B / s)
    half = span * sx
    dx = math.pi / (span * sp)
    n = int(math.ceil(2.0 * half / dx))
    if n > max_points:
        raise DomainError(f"grid oracle needs {n} points > {max_points}")
    x = -half + dx * np.arange(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    rho = rho_c.kernel(X, Y) * dx
    sigma = sig_c.kernel(X, Y).real * dx
    p = np.linalg.eigvalsh(rho)
    p = p[p > 1e-300]
    tr_rho_ln_rho = float(np.sum(p * np.log(p)))
    mu = np.linalg.eigvalsh(sigma)[::-1]
    ln_u = math.log(mu[1] / mu[0])
    number = 0.5 * (k * k * np.diag(x * x) + _kinetic_matrix(n, dx) / (k * k)) - 0.5 * np.eye(n)
    mean_n = float(np.real(np.sum(rho * number.T)))
    tr_rho_ln_sigma = math.log(mu[0]) + ln_u * mean_n
    return tr_rho_ln_rho - tr_rho_ln_sigma


def coherent_state_center(omega: float, xc0: float, pc0: float, t):
    """Exact center of a wavepacket in a static trap of frequency ``omega``."""
    t = np.asarray(t, dtype=float)
    c, s = np.cos(omega * t), np.sin(omega * t)
    return xc0 * c + pc0 * s / omega, pc0 * c - omega * xc0 * s
