"""Spectral diagnostics: Hermite polynomials, eigenbasis overlaps and the
relative entropy between the evolving state and its instantaneous thermal
reference.

rho_t and sigma_t share the spectrum p_n = u**n (1 - u) and the inverse length
k; their eigenbases differ by the rotation exp(-i B x^2).  The overlaps are

    <m|n> = I_{n,m}(1 + i B / k^2) / sqrt(2^(n+m) n! m! pi),
    I_{n,m}(b) = integral exp(-b x^2) H_n(x) H_m(x) dx.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .errors import DomainError, NumericalError, TruncationError
from .gaussian_core import entropy_array, spectral_params

HERMITE_MAX_ORDER = 400
TAIL_TOL = 1e-10
UNITARITY_TOL = 1e-8
MAX_LEVELS = 2_000_000


def hermite_eval(n: int, x):
    """Physicists' Hermite polynomial H_n(x) by the three-term recurrence."""
    if int(n) != n or n < 0:
        raise DomainError(f"Hermite order must be a non-negative integer, got {n!r}")
    if n > HERMITE_MAX_ORDER:
        raise DomainError(f"order {n} > {HERMITE_MAX_ORDER} requires a scaled recurrence")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if x.ndim else float(h_prev)
    h = 2.0 * x
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, int(n)):
            h_prev, h = h, 2.0 * x * h - 2.0 * j * h_prev
    if not np.all(np.isfinite(h)):
        raise NumericalError(f"H_{n} overflows at |x| = {np.max(np.abs(x)):.3g}; use scaled Hermite functions")
    return h if x.ndim else float(h)


def _check_b(b):
    b = complex(b)
    if not b.real > 0:
        raise DomainError(f"Re(b) must be positive for a convergent integral, got {b!r}")
    return b


def _finite_sum_exact(n, p, b):
    """sum_l C(n,l) 2^(n-l) z^(p+l) (2p+n)! (2p+2l)! / ((2p+l)! (l+p)!) with
    z = (1 - b) / b, as an exact rational pair (re, im).

    The terms alternate in phase and cancel heavily, so they are summed in
    exact arithmetic; a float b is a dyadic rational, which keeps every
    denominator a power of two.
    """
    x, y = Fraction(b.real), Fraction(b.imag)
    d = x * x + y * y
    # z = w / d with w = (x - d) - i y
    wr, wi = x - d, -y
    pr, pi = Fraction(1), Fraction(0)
    for _ in range(p):
        pr, pi = pr * wr - pi * wi, pr * wi + pi * wr
    tr, ti = Fraction(0), Fraction(0)
    lead = math.factorial(2 * p + n)
    for l in range(n + 1):
        c = Fraction(
            math.comb(n, l) * 2 ** (n - l) * lead * math.factorial(2 * p + 2 * l),
            math.factorial(2 * p + l) * math.factorial(l + p),
        )
        scale = c * d ** (n - l)
        tr += scale * pr
        ti += scale * pi
        pr, pi = pr * wr - pi * wi, pr * wi + pi * wr
    den = d ** (p + n)
    return tr / den, ti / den


def _scaled_float(q: Fraction, log_scale: float) -> float:
    """q * exp(log_scale) without overflow in the intermediate."""
    if q == 0:
        return 0.0
    e = q.numerator.bit_length() - q.denominator.bit_length()
    mant = float(q / Fraction(2) ** e) if e >= 0 else float(q * Fraction(2) ** (-e))
    return mant * math.exp(e * math.log(2.0) + log_scale)


def _log_overlap_integral(n, m, b, offset=0.0):
    """I_{n,m}(b) * exp(-offset); exactly 0 for odd m - n."""
    b = _check_b(b)
    if (m - n) % 2:
        return 0j
    n, m = (n, m) if n <= m else (m, n)
    re, im = _finite_sum_exact(n, (m - n) // 2, b)
    total = complex(_scaled_float(re, -offset), _scaled_float(im, -offset))
    return cmath.sqrt(math.pi / b) * total


def overlap_integral(n: int, m: int, b: complex) -> complex:
    """I_{n,m}(b) from the terminating finite sum (exact zero for odd m - n).

    The sum is accumulated exactly, so the only rounding is in the final
    conversion and the prefactor sqrt(pi / b).  Cost grows with the order;
    :func:`overlap_table` is the fast route for whole tables.
    """
    if min(n, m) < 0:
        raise DomainError("Hermite orders must be non-negative")
    return _log_overlap_integral(int(n), int(m), complex(b))


def _poch_series_2f1(a, c, n, x):
    """Terminating 2F1(a, -n; c; x) = sum_j (a)_j (-n)_j / ((c)_j j!) x^j."""
    term = 1.0 + 0j
    total = term
    for j in range(n):
        term *= (a + j) * (-n + j) / ((c + j) * (j + 1)) * x
        total += term
    return total


def overlap_integral_hyp2f1(n: int, m: int, b: complex) -> complex:
    """Cross-check of :func:`overlap_integral` through the Gauss
    hypergeometric form, with the terminating series for 2F1."""
    b = _check_b(b)
    if (m - n) % 2:
        return 0j
    n, m = (n, m) if n <= m else (m, n)
    p = (m - n) // 2
    z = (1.0 - b) / b
    f = _poch_series_2f1(0.5 + p, 1.0 + 2 * p, n, 2.0 - 2.0 / b)
    scale = math.exp(n * math.log(2.0) + gammaln(2 * p + n + 1) - gammaln(p + 1))
    return scale * cmath.sqrt(math.pi / b) * z**p * f


def eigen_overlap(n: int, m: int, B: float, k: float) -> complex:
    """<m|n> between the rotated eigenfunction psi_n of rho and the Fock state
    |m> of sigma, via the normalized finite sum."""
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    n, m = int(n), int(m)
    if min(n, m) < 0:
        raise DomainError("Hermite orders must be non-negative")
    norm = 0.5 * ((n + m) * math.log(2.0) + gammaln(n + 1) + gammaln(m + 1) + math.log(math.pi))
    return _log_overlap_integral(n, m, 1.0 + 1j * B / (k * k), offset=norm)


@dataclass(frozen=True)
class OverlapTable:
    """Overlaps ``entries[m, n] = <m|n>`` for n <= n_max, m <= m_max."""

    n_max: int
    m_max: int
    b: complex
    entries: np.ndarray

    def __getitem__(self, nm):
        n, m = nm
        return self.entries[m, n]

    def row_norms(self):
        """sum_m |<m|n>|^2 for every n (1 up to truncation)."""
        return np.sum(np.abs(self.entries) ** 2, axis=0)

    def unitarity_defect(self):
        return np.abs(1.0 - self.row_norms())


def _rows(n_max, beta):
    """Yield ``(m, row)`` with ``row[c] = <m|c>`` for c <= min(m, n_max), for
    m = 0, 1, 2, ... (unbounded), for the rotation exp(-i beta X^2), X = k x.

    Uses the annihilation-operator relation

        M[m+1,n] = (sqrt(n) M[m,n-1] - i beta sqrt(m) M[m-1,n]) / ((1 + i beta) sqrt(m+1))

    with <0|0> = (1 + i beta)^(-1/2), only in the triangle m >= n where both
    coefficients are bounded by one in modulus; entries above the diagonal
    follow from the symmetry <m|n> = <n|m>.  Unlike the finite sum this stays
    accurate at large orders.
    """
    b = 1.0 + 1j * beta
    width = n_max + 1
    sq = np.sqrt(np.arange(width, dtype=float))
    older = np.zeros(width, dtype=complex)
    row = np.zeros(width, dtype=complex)
    row[0] = 1.0 / cmath.sqrt(b)
    yield 0, row[:1]
    m = 0
    while True:
        scale = 1.0 / (b * math.sqrt(m + 1))
        new = np.zeros(width, dtype=complex)
        lim = min(m - 1, n_max)
        if lim >= 0:
            new[: lim + 1] = -1j * beta * math.sqrt(m) * older[: lim + 1]
            new[1 : lim + 1] += sq[1 : lim + 1] * row[:lim]
            new[: lim + 1] *= scale
        if 1 <= m <= n_max:
            # <m-1|m> = <m|m-1>
            new[m] = math.sqrt(m) * (1.0 - 1j * beta) * row[m - 1] * scale
        if m + 1 <= n_max:
            # <m-1|m+1> = <m+1|m-1>, computed above
            upper = new[m - 1] if m >= 1 else 0.0
            new[m + 1] = (math.sqrt(m + 1) * row[m] - 1j * beta * math.sqrt(m) * upper) * scale
        older, row = row, new
        m += 1
        yield m, row[: min(m, n_max) + 1]


def overlap_table(n_max: int, B: float, k: float, m_max: int | None = None) -> OverlapTable:
    """Overlap matrix <m|n> for n <= n_max, m <= m_max (default n_max), built
    by the stable ladder recurrence."""
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    n_max = int(n_max)
    m_max = max(n_max, int(m_max) if m_max is not None else n_max)
    beta = B / (k * k)
    M = np.zeros((m_max + 1, n_max + 1), dtype=complex)
    for m, row in _rows(n_max, beta):
        M[m, : len(row)] = row
        if m == m_max:
            break
    # fill the block above the diagonal by symmetry
    upper = np.triu_indices(n_max + 1, 1)
    M[upper] = M[upper[1], upper[0]]
    return OverlapTable(n_max, m_max, 1.0 + 1j * beta, M)


def unitarity_levels(n: int, B: float, k: float, tol: float = UNITARITY_TOL):
    """Smallest M with |1 - sum_{m<=M} |<m|n>|^2| < tol, and that partial sum.

    Streams the ladder recurrence, so it is meant for moderate ``n``.
    """
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    n = int(n)
    total = 0.0
    for m, row in _rows(n, B / (k * k)):
        # <m|n> sits in row m when m >= n, otherwise equals <n|m> from row n
        if m >= n:
            total += abs(row[n]) ** 2
        if m == n:
            total += float(np.sum(np.abs(row[:n]) ** 2))
        if total > 1.0 + tol:
            raise NumericalError(f"overlap recurrence lost precision for n = {n}")
        if m >= n and abs(1.0 - total) < tol:
            return m, total
        if m > MAX_LEVELS:
            raise TruncationError(f"row {n} not unitary to {tol:g} within {MAX_LEVELS} levels")


def _sector(parity, size, beta):
    """Tridiagonal of exp(-i beta X^2) N exp(i beta X^2) on the Fock states of
    one parity, after a constant gauge removing the phase of the off-diagonal."""
    m = np.arange(parity, size, 2, dtype=float)
    diag = (1.0 + 2.0 * beta * beta) * m + beta * beta
    off = abs(beta) * math.sqrt(1.0 + beta * beta) * np.sqrt((m[:-1] + 1.0) * (m[:-1] + 2.0))
    return m, diag, off


def overlap_weights(n_max: int, B: float, k: float, tol: float = UNITARITY_TOL):
    """Moduli |<m|n>|^2 for n <= n_max as eigenvectors of the rotated number
    operator.

    exp(-i B x^2)|n> is the eigenvector with eigenvalue n of
    U N U^dagger = (1 + 2 beta^2) N + beta^2 + (beta^2 + i beta) a^dagger^2 + h.c.,
    beta = B / k^2, which is tridiagonal within each parity sector.  Selected
    eigenpairs are found by bisection and inverse iteration, which stays
    accurate where the ladder recurrence does not.  The Fock cutoff doubles
    until the top quarter of every eigenvector carries less than ``tol``.

    Returns ``(weights, levels, size, leak)``: ``weights[n]`` holds the
    moduli on ``levels[n % 2]``, ``leak`` the largest mass in the top quarter.
    """
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    n_max = int(n_max)
    beta = B / (k * k)
    if beta == 0.0:
        size = n_max + 1
        levels = [np.arange(p, size, 2) for p in (0, 1)]
        weights = [(levels[n % 2] == n).astype(float) for n in range(size)]
        return weights, levels, size, 0.0
    size = int(4 * (n_max + 1) * (1.0 + 2.0 * beta * beta)) + 64
    while True:
        weights = [None] * (n_max + 1)
        levels = []
        leak = 0.0
        for parity in (0, 1):
            m, diag, off = _sector(parity, size, beta)
            levels.append(m.astype(int))
            top = (n_max - parity) // 2
            if top < 0:
                continue
            vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, top))
            drift = np.max(np.abs(vals - (parity + 2.0 * np.arange(top + 1))))
            if drift > 1e-6 * (1.0 + n_max):
                leak = math.inf
            w = vecs.T**2
            cut = 3 * len(m) // 4
            leak = max(leak, float(np.max(np.sum(w[:, cut:], axis=1))))
            for i in range(top + 1):
                weights[parity + 2 * i] = w[i]
        if leak < tol:
            return weights, levels, size, leak
        if size > MAX_LEVELS:
            raise TruncationError(f"overlap eigenvectors not resolved within {MAX_LEVELS} levels")
        size *= 2


class RelativeEntropy(NamedTuple):
    value: float
    truncation_error: float
    n_max: int
    m_max: int


def levels_for_tail(u, tol=TAIL_TOL):
    """Smallest n_max with sum_{n > n_max} p_n = u^(n_max + 1) below ``tol``."""
    if u <= 0.0:
        return 0
    return max(int(math.ceil(math.log(tol) / math.log(u))) - 1, 0)


def relative_entropy(u: float, B: float, k: float, n_max: int | None = None) -> RelativeEntropy:
    """S(rho || sigma) = sum_n p_n ln p_n - sum_{n,m} p_n ln p_m |<m|n>|^2.

    ``n_max`` defaults to the adaptive choice with tail probability below
    1e-10; the Fock cutoff for m grows until every retained row is unitary to
    1e-8 (see :func:`overlap_weights`).
    """
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie in (0, 1), got {u!r}")
    if n_max is None:
        n_max = levels_for_tail(u)
    n_max = int(n_max)
    tail = u ** (n_max + 1)
    if tail > TAIL_TOL:
        raise TruncationError(f"n_max = {n_max} leaves tail probability {tail:.3g} > {TAIL_TOL:g}")
    weights, levels, size, leak = overlap_weights(n_max, B, k)
    ln_u, ln_1mu = math.log(u), math.log1p(-u)
    n = np.arange(n_max + 1)
    p = np.exp(n * ln_u + ln_1mu)
    # sum_m |<m|n>|^2 ln p_m = ln(1 - u) + ln(u) sum_m m |<m|n>|^2
    mean_m = np.array([weights[i] @ levels[i % 2] for i in n])
    cross = float(p @ (ln_1mu + ln_u * mean_m))
    self_term = float(p @ (n * ln_u + ln_1mu))
    value = self_term - cross
    # dropped rows n > n_max contribute p_n |ln u| (mean_m(n) - n), and mean_m
    # grows with slope 1 + 2 beta^2; summed over the geometric tail:
    beta = B / (k * k)
    excess = float(mean_m[-1]) - n_max + 2.0 * beta * beta / (1.0 - u)
    err = tail * abs(ln_u) * max(excess, 0.0) + leak * abs(ln_u) * size
    return RelativeEntropy(float(value), err, n_max, size - 1)


def relative_entropy_closed_form(u, B, k):
    """Closed form of S(rho || sigma) through the mean phonon number.

    ln sigma = ln(1 - u) + ln(u) N_k, so S = eps (Tr(rho N_k) - <n>) and
    Tr(rho N_k) - <n> is the extra momentum variance B^2 / (A + C) over 2 k^2.
    """
    u = np.asarray(u, dtype=float)
    return -np.log(u) * np.asarray(B) ** 2 * (1.0 + u) / (np.asarray(k) ** 4 * (1.0 - u))


def mehler_check(u: float, x: float, y: float, N: int):
    """Partial Mehler sum sum_{n<=N} u^n H_n(x) H_n(y) / (2^n n!) against its
    closed form; returns ``(partial_sum, closed_form, abs_err)``."""
    if not abs(u) < 1:
        raise DomainError(f"|u| must be < 1, got {u!r}")
    partial = 0.0
    for n in range(int(N) + 1):
        if u == 0 and n > 0:
            break
        hx, hy = hermite_eval(n, x), hermite_eval(n, y)
        if hx == 0.0 or hy == 0.0:
            continue
        weight = math.exp(n * math.log(abs(u) / 2.0) - gammaln(n + 1)) if n else 1.0
        sign = -1.0 if (u < 0 and n % 2) else 1.0
        partial += sign * weight * hx * hy
    d = 1.0 - u * u
    closed = math.exp((2.0 * u * x * y - u * u * (x * x + y * y)) / d) / math.sqrt(d)
    return partial, closed, abs(partial - closed)


def entropy_rate_identity(times, A, C, gamma):
    """Centered finite difference of the von Neumann entropy against
    gamma_t eps_t / k_t^2 on the interior points."""
    k, u, eps, _ = spectral_params(A, C)
    S = entropy_array(u)
    h = times[1] - times[0]
    lhs = (S[2:] - S[:-2]) / (2.0 * h)
    rhs = np.asarray(gamma)[1:-1] * eps[1:-1] / k[1:-1] ** 2
    return lhs, rhs
