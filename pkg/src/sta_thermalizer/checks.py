"""Self-verification battery.

Each check compares two independent routes to the same quantity and reports
the measured discrepancy against its tolerance.  Informational entries record
rejected alternatives (e.g. a different sinh argument) and never fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics as dg
from .dynamics import deterministic as det
from .dynamics.stochastic import ensemble_average
from .errors import StaError
from .gaussian_core import (
    GaussianCoeffs,
    ThermalEndpoint,
    covariance_moments,
    moments_arrays,
    spectral_decompose,
    spectral_params,
    thermal_coeffs,
)
from .oracles import moments_by_quadrature, overlap_integral_quadrature, relative_entropy_grid
from .protocol import (
    ProtocolSpec,
    control_frequency,
    effective_Omega,
    interpolate_coeffs,
    reference_frequency_sq,
    scaling_eta,
    scaling_eta_thermal,
    synthesize_schedule,
)

# (omega_f, beta_f, t_f) from omega_0 = beta_0 = 1
REFERENCE_PROTOCOLS = ((3.0, 2.0, 2.0), (3.0, 2.0, 6.0), (0.25, 2.0, 2.0), (0.25, 2.0, 6.0))


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""
    informational: bool = False

    def line(self):
        status = "INFO" if self.informational else ("PASS" if self.passed else "FAIL")
        text = f"[{status}] {self.name}: measured {self.measured:.3e} (tolerance {self.tolerance:.0e})"
        return text + (f"  {self.detail}" if self.detail else "")


def reference_spec(omega_f, beta_f, t_f, n_steps=4000, omega_0=1.0, beta_0=1.0):
    return ProtocolSpec(ThermalEndpoint(omega_0, beta_0), ThermalEndpoint(omega_f, beta_f), t_f, n_steps)


def _derivative(fun, t, h):
    """Fourth-order central difference of a vectorized ``fun`` at ``t``."""
    return (8.0 * (fun(t + h) - fun(t - h)) - (fun(t + 2 * h) - fun(t - 2 * h))) / (12.0 * h)


def _interior(spec, n=401):
    return np.linspace(0.0, spec.t_f, n)[1:-1]


def _spectral_along(spec):
    def k_u_eps(t):
        ip = interpolate_coeffs(spec, t)
        return spectral_params(ip.A, ip.C)

    return k_u_eps


# -- individual checks: each returns (measured, tolerance[, detail]) --------


def check_mehler():
    err = 0.0
    for u in (0.1, 0.3, 0.5, -0.4):
        for x, y in ((0.7, -0.2), (1.5, 0.3), (0.0, 0.0), (-2.0, 1.1)):
            err = max(err, dg.mehler_check(u, x, y, 60)[2])
    return err, 1e-12


def check_orthogonality():
    err = 0.0
    for n in range(11):
        for m in range(11):
            ref = math.exp(n * math.log(2.0) + math.lgamma(n + 1)) * math.sqrt(math.pi) if n == m else 0.0
            val = dg.overlap_integral(n, m, 1.0)
            err = max(err, abs(val - ref) / (ref if ref else 1.0))
    return err, 1e-10


def check_hypergeometric_form():
    rng = np.random.default_rng(11)
    err = 0.0
    for _ in range(12):
        b = complex(rng.uniform(0.1, 3.0), rng.uniform(-2.0, 2.0))
        for n in range(11):
            for p in range(11):
                s = dg.overlap_integral(n, n + 2 * p, b)
                h = dg.overlap_integral_hyp2f1(n, n + 2 * p, b)
                err = max(err, abs(s - h) / max(abs(s), 1e-300))
    return err, 1e-10


def check_overlap_quadrature():
    b = 1.3 + 0.4j
    err = 0.0
    for n in range(9):
        for m in range(n % 2, 9, 2):
            s = dg.overlap_integral(n, m, b)
            q = overlap_integral_quadrature(n, m, b)
            err = max(err, abs(s - q) / abs(q))
    return err, 1e-9


def check_overlap_unitarity():
    err = 0.0
    for B in (0.1, 1.0, 5.0):
        for n in range(11):
            _, total = dg.unitarity_levels(n, B, 1.0)
            err = max(err, abs(1.0 - total))
    return err, 1e-8


def check_relative_entropy_grid():
    err = 0.0
    for u, B, k in ((0.3, 0.5, 1.0), (0.1, 4.0, 1.2), (0.45, -2.0, 0.8)):
        err = max(err, abs(dg.relative_entropy(u, B, k).value - relative_entropy_grid(u, B, k)))
    return err, 1e-5


def check_thermal_round_trip():
    err = 0.0
    for w, b in ((1.0, 1.0), (3.0, 2.0), (0.25, 2.0), (0.2, 0.2), (4.0, 4.0)):
        s = spectral_decompose(thermal_coeffs(ThermalEndpoint(w, b)))
        err = max(err, abs(s.omega_tilde - w) / w, abs(s.eps_tilde - b * w) / (b * w))
    return err, 1e-12


def check_moments_quadrature():
    err = 0.0
    for A, B, C in ((0.656517642749666, 0.0, -0.425459064119661), (1.3, 0.8, -0.5), (2.0, -1.5, -1.9)):
        c = GaussianCoeffs(A, B, C)
        m, q = covariance_moments(c), moments_by_quadrature(c)
        err = max(err, float(np.max(np.abs(m.as_array() - q.as_array()))))
    return err, 1e-8


def _gamma_forms(spec):
    t = _interior(spec)
    ip = interpolate_coeffs(spec, t)
    gamma = (ip.dA * ip.C - ip.A * ip.dC) / (ip.A + ip.C)
    k_u_eps = _spectral_along(spec)
    k, u, eps, _ = k_u_eps(t)
    h = 1e-4 * spec.t_f
    du = _derivative(lambda s: k_u_eps(s)[1], t, h)
    deps = _derivative(lambda s: k_u_eps(s)[2], t, h)
    u_form = k * k * du / (1.0 - u) ** 2
    half = -k * k * deps / (4.0 * np.sinh(0.5 * eps) ** 2)
    full = -k * k * deps / (4.0 * np.sinh(eps) ** 2)
    return gamma, u_form, half, full


def check_gamma_forms():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        gamma, u_form, half, _ = _gamma_forms(reference_spec(w, b, tf))
        err = max(err, float(np.max(np.abs(gamma - u_form))), float(np.max(np.abs(gamma - half))))
    return err, 1e-8, "u-form and eps-form with sinh^2(eps/2) both match (A'C - AC')/(A + C)"


def check_gamma_printed_argument():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        gamma, _, _, full = _gamma_forms(reference_spec(w, b, tf))
        err = max(err, float(np.max(np.abs(gamma - full))))
    return err, 1e-8, "sinh^2(eps) in place of sinh^2(eps/2) does not reproduce gamma; rejected"


def check_omega_forms():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec = reference_spec(w, b, tf)
        t = _interior(spec)

        def omega(s):
            ip = interpolate_coeffs(spec, s)
            return effective_Omega(ip.A, ip.C, ip.dA, ip.dC)

        ip = interpolate_coeffs(spec, t)
        direct = control_frequency(*ip)
        om = omega(t)
        alt = reference_frequency_sq(ip.A, ip.C) - om * om - _derivative(omega, t, 1e-4 * tf)
        err = max(err, float(np.max(np.abs(direct - alt))))
    return err, 1e-8


def check_eta_forms():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec = reference_spec(w, b, tf)
        t = np.linspace(0.0, tf, 201)
        err = max(err, float(np.max(np.abs(scaling_eta(spec, t) - scaling_eta_thermal(spec, t)))))
    return err, 1e-10, "kappa sqrt(tanh(eps_0/2) coth(eps_t/2)) matches N_0/N_t"


def check_eta_printed_order():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec = reference_spec(w, b, tf)
        t = np.linspace(0.0, tf, 201)
        c0 = spec.initial
        _, _, eps0, w0 = spectral_params(c0.A, c0.C)
        ip = interpolate_coeffs(spec, t)
        _, _, eps, wt = spectral_params(ip.A, ip.C)
        swapped = np.sqrt(w0 / wt) * np.sqrt(np.tanh(0.5 * eps) / np.tanh(0.5 * eps0))
        err = max(err, float(np.max(np.abs(scaling_eta(spec, t) - swapped))))
    return err, 1e-10, "coth(eps_0/2) tanh(eps_t/2) ordering does not reproduce N_0/N_t; rejected"


def check_omega_alternatives():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec = reference_spec(w, b, tf)
        t = _interior(spec)
        h = 1e-4 * tf
        ip = interpolate_coeffs(spec, t)
        om = effective_Omega(ip.A, ip.C, ip.dA, ip.dC)
        k_u_eps = _spectral_along(spec)
        _, u, _, wt = k_u_eps(t)
        dw = _derivative(lambda s: k_u_eps(s)[3], t, h)
        du = _derivative(lambda s: k_u_eps(s)[1], t, h)
        deta = _derivative(lambda s: scaling_eta(spec, s), t, h)
        alt = -0.5 * dw / wt + du / (1.0 - u * u)
        via_eta = deta / scaling_eta(spec, t)
        err = max(err, float(np.max(np.abs(om - alt))), float(np.max(np.abs(om - via_eta))))
    return err, 1e-8


def _propagated(w, b, tf):
    spec = reference_spec(w, b, tf)
    schedule = synthesize_schedule(spec)
    return spec, schedule, det.integrate_consistency(schedule, spec.initial)


def check_target_attainment():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec, _, traj = _propagated(w, b, tf)
        f, target = traj.final, spec.final
        err = max(err, abs(f.A - target.A), abs(f.B - target.B), abs(f.C - target.C))
    return err, 1e-6


def check_B_follows_Omega():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        _, schedule, traj = _propagated(w, b, tf)
        err = max(err, float(np.max(np.abs(traj.B - schedule.B_implied))))
    return err, 1e-6


def check_oracle_equivalence():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec, schedule, traj = _propagated(w, b, tf)
        oracle = det.integrate_covariance_oracle(schedule, covariance_moments(spec.initial))
        xx, pp, xp = traj.moments()
        err = max(
            err,
            float(np.max(np.abs(xx - oracle.xx))),
            float(np.max(np.abs(pp - oracle.pp))),
            float(np.max(np.abs(xp - oracle.xp))),
        )
    return err, 1e-8


def check_entropy_rate():
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        _, schedule, traj = _propagated(w, b, tf)
        lhs, rhs = dg.entropy_rate_identity(traj.times, traj.A, traj.C, schedule.gamma)
        err = max(err, float(np.max(np.abs(lhs - rhs))))
    return err, 1e-5, "rate gamma eps_tilde / k^2 (tilde quantity)"


def check_unraveling(unraveling):
    spec = reference_spec(0.25, 2.0, 6.0)
    schedule = synthesize_schedule(spec)
    traj = det.integrate_consistency(schedule, spec.initial)
    stats = ensemble_average(schedule, 2000, 20240601, unraveling, n_steps=20_000, n_samples=100)
    idx = np.rint(stats.times / traj.dt).astype(int)
    xx, pp, xp = moments_arrays(traj.A[idx], traj.B[idx], traj.C[idx])
    z = np.max(
        np.abs([(stats.xx - xx) / stats.se_xx, (stats.pp - pp) / stats.se_pp, (stats.xp - xp) / stats.se_xp]),
        axis=0,
    )
    frac_bad = float(np.mean(z >= 3.0))
    return frac_bad, 1e-2, f"2000 trajectories, max |z| = {z.max():.2f}"


CHECKS = (
    ("Mehler partial sums (N = 60)", check_mehler),
    ("Hermite orthogonality I_nm(1)", check_orthogonality),
    ("finite sum vs 2F1 form", check_hypergeometric_form),
    ("finite sum vs adaptive quadrature", check_overlap_quadrature),
    ("overlap row unitarity", check_overlap_unitarity),
    ("relative entropy vs dense grid", check_relative_entropy_grid),
    ("thermal spectral round trip", check_thermal_round_trip),
    ("moments vs kernel quadrature", check_moments_quadrature),
    ("gamma forms (sinh argument eps/2)", check_gamma_forms),
    ("omega^2 direct vs omega_tilde^2 - Omega^2 - Omega'", check_omega_forms),
    ("eta normalization vs thermal form", check_eta_forms),
    ("Omega alternatives", check_omega_alternatives),
    ("target attainment", check_target_attainment),
    ("B_t = Omega_t / 2", check_B_follows_Omega),
    ("covariance oracle equivalence", check_oracle_equivalence),
    ("entropy rate identity", check_entropy_rate),
    ("noise unraveling |z| >= 3 fraction", lambda: check_unraveling("noise")),
    ("measurement unraveling |z| >= 3 fraction", lambda: check_unraveling("measurement")),
)

FINDINGS = (
    ("gamma with printed sinh^2(eps) argument", check_gamma_printed_argument),
    ("eta with coth/tanh in printed order", check_eta_printed_order),
)


def _evaluate(name, fn, informational=False):
    try:
        out = fn()
    except StaError as exc:
        return CheckResult(name, math.nan, math.nan, False, f"{type(exc).__name__}: {exc}", informational)
    measured, tol = out[0], out[1]
    detail = out[2] if len(out) > 2 else ""
    passed = bool(measured < tol) if not informational else bool(measured >= tol)
    return CheckResult(name, float(measured), tol, passed, detail, informational)


def run_checks(skip_stochastic=False):
    """Run the battery; returns a list of :class:`CheckResult`."""
    results = []
    for name, fn in CHECKS:
        if skip_stochastic and "unraveling" in name:
            continue
        results.append(_evaluate(name, fn))
    for name, fn in FINDINGS:
        results.append(_evaluate(name, fn, informational=True))
    return results
