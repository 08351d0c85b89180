"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the criterion lines are
printed even when output capture is on.
"""

import math
import time

import numpy as np
import pytest
from conftest import REFERENCE_PROTOCOLS, make_spec

from sta_thermalizer import covariance_moments, gamma_max, synthesize_schedule
from sta_thermalizer import diagnostics as dg
from sta_thermalizer.dynamics import ensemble_average, integrate_consistency, integrate_covariance_oracle
from sta_thermalizer.gaussian_core import entropy_array, moments_arrays
from sta_thermalizer.oracles import overlap_integral_quadrature, relative_entropy_grid


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, budget):
        in_time = elapsed < budget
        status = "PASS" if ok and in_time else "FAIL"
        line = f"CRITERION {number} [{status}] {title}: {detail}; runtime {elapsed:.2f} s (budget {budget:g} s)"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert in_time, line

    return emit


def test_criterion_1_target_attainment(report):
    worst_dev, worst_time = 0.0, 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        t0 = time.perf_counter()
        spec = make_spec(w, b, tf)
        sch = synthesize_schedule(spec)
        f = integrate_consistency(sch, spec.initial).final
        worst_time = max(worst_time, time.perf_counter() - t0)
        target = spec.final
        worst_dev = max(worst_dev, abs(f.A - target.A), abs(f.B - target.B), abs(f.C - target.C))
    report(1, "target attainment", worst_dev < 1e-6, f"max |dA|,|dB|,|dC| = {worst_dev:.2e} (< 1e-6)",
           worst_time, 1.0)


def test_criterion_2_gamma_max_scaling(report):
    t0 = time.perf_counter()
    durations = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    spread = tspread = 0.0
    for w, b in ((3.0, 2.0), (0.25, 2.0)):
        res = [gamma_max(make_spec(w, b, tf)) for tf in durations]
        scaled = np.array([r.gamma_max * tf for r, tf in zip(res, durations)])
        frac = np.array([r.t_max / tf for r, tf in zip(res, durations)])
        spread = max(spread, float(np.ptp(scaled) / np.abs(scaled).mean()))
        tspread = max(tspread, float(np.ptp(frac)))
    elapsed = time.perf_counter() - t0
    ok = spread < 1e-6 and tspread < 1e-9
    report(2, "gamma_max scaling", ok,
           f"relative spread of gamma_max*t_f = {spread:.1e} (< 1e-6), spread of t_max/t_f = {tspread:.1e} (< 1e-9)",
           elapsed, 1.0)


def test_criterion_3_sign_structure(report):
    t0 = time.perf_counter()
    grid = np.linspace(0.2, 4.0, 21)
    wrong, checked = 0, 0
    for w in grid:
        for b in grid:
            g = gamma_max(make_spec(w, b, 6.0)).gamma_max
            if abs(w * b - 1.0) < 0.02:
                continue
            checked += 1
            wrong += (g < 0) != (w * b > 1.0)
    elapsed = time.perf_counter() - t0
    report(3, "gamma_max sign structure", wrong == 0,
           f"{wrong} of {checked} non-boundary cells with wrong sign", elapsed, 10.0)


def test_criterion_4_trap_inversion(report):
    t0 = time.perf_counter()
    fast = float(np.min(synthesize_schedule(make_spec(3.0, 2.0, 2.0)).omega_sq))
    slow = float(np.min(synthesize_schedule(make_spec(3.0, 2.0, 6.0)).omega_sq))
    elapsed = time.perf_counter() - t0
    report(4, "trap inversion for (omega_f, beta_f) = (3, 2)", fast < 0 and slow > 0,
           f"min omega^2 = {fast:.4f} at t_f = 2 (need < 0), {slow:.4f} at t_f = 6 (need > 0)", elapsed, 1.0)


@pytest.mark.parametrize("unraveling", ["noise", "measurement"])
def test_criterion_5_unraveling_equivalence(report, unraveling):
    t0 = time.perf_counter()
    spec = make_spec(0.25, 2.0, 6.0)
    sch = synthesize_schedule(spec)
    markovian = not sch.non_markovian
    stats = ensemble_average(sch, 10_000, 20240917, unraveling, n_samples=100)
    traj = integrate_consistency(sch, spec.initial)
    idx = np.rint(stats.times / traj.dt).astype(int)
    xx, pp, xp = moments_arrays(traj.A[idx], traj.B[idx], traj.C[idx])
    z = np.abs([(stats.xx - xx) / stats.se_xx, (stats.pp - pp) / stats.se_pp, (stats.xp - xp) / stats.se_xp])
    frac = float(np.mean(np.max(z, axis=0) < 3.0))
    elapsed = time.perf_counter() - t0
    report(5, f"unraveling equivalence ({unraveling})", markovian and frac >= 0.99,
           f"{100 * frac:.0f}% of 100 sampled times with all |z| < 3 (need >= 99%), max |z| = {z.max():.2f}",
           elapsed, 60.0)


def test_criterion_6_oracle_equivalence(report):
    t0 = time.perf_counter()
    err = 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec = make_spec(w, b, tf)
        sch = synthesize_schedule(spec)
        traj = integrate_consistency(sch, spec.initial)
        oracle = integrate_covariance_oracle(sch, covariance_moments(spec.initial))
        for a, o in zip(traj.moments(), (oracle.xx, oracle.pp, oracle.xp)):
            err = max(err, float(np.max(np.abs(a - o))))
    elapsed = time.perf_counter() - t0
    report(6, "covariance oracle equivalence", err < 1e-8, f"max pointwise moment difference {err:.2e} (< 1e-8)",
           elapsed, 2.0)


def test_criterion_7_entropy_identities(report):
    t0 = time.perf_counter()
    rate_err, decrease = 0.0, 0.0
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec = make_spec(w, b, tf)
        sch = synthesize_schedule(spec)
        traj = integrate_consistency(sch, spec.initial)
        lhs, rhs = dg.entropy_rate_identity(traj.times, traj.A, traj.C, sch.gamma)
        rate_err = max(rate_err, float(np.max(np.abs(lhs - rhs))))
        S = entropy_array(traj.spectral()[1])
        heating = (sch.gamma[:-1] >= 0) & (sch.gamma[1:] >= 0)
        if np.any(heating):
            decrease = max(decrease, float(np.max(-np.diff(S)[heating])))
    dS = 0.0
    for w in (0.5, 0.8, 1.5, 2.0, 4.0):
        spec = make_spec(w, 1.0 / w, 2.0)
        traj = integrate_consistency(synthesize_schedule(spec), spec.initial)
        S = entropy_array(traj.spectral()[1])
        dS = max(dS, abs(float(S[-1] - S[0])))
    elapsed = time.perf_counter() - t0
    ok = rate_err < 1e-5 and dS < 1e-10 and decrease <= 1e-13
    report(7, "entropy identities", ok,
           f"(a) rate error {rate_err:.1e} (< 1e-5), (b) max |dS| on contour {dS:.1e} (< 1e-10), "
           f"(c) largest entropy drop while heating {decrease:.1e}", elapsed, 2.0)


def test_criterion_8_spectral_battery(report):
    t0 = time.perf_counter()
    mehler = max(dg.mehler_check(u, x, y, 60)[2]
                 for u in (0.1, 0.25, 0.4, 0.5) for x, y in ((0.7, -0.2), (1.5, 0.3), (-2.0, 1.1)))
    structure_ok, ortho = True, 0.0
    for n in range(11):
        for m in range(11):
            v = dg.overlap_integral(n, m, 1.0)
            if n != m:
                structure_ok &= v == 0
            else:
                ref = 2.0**n * math.factorial(n) * math.sqrt(math.pi)
                ortho = max(ortho, abs(v - ref) / ref)
    quad = 0.0
    b = 1.1 + 0.5j
    for n in range(9):
        for m in range(n % 2, 9, 2):
            q = overlap_integral_quadrature(n, m, b)
            quad = max(quad, abs(dg.overlap_integral(n, m, b) - q) / abs(q))
    rng = np.random.default_rng(8)
    grid = 0.0
    for _ in range(10):
        u, B, k = rng.uniform(0.05, 0.5), rng.uniform(-5.0, 5.0), rng.uniform(0.7, 1.5)
        grid = max(grid, abs(dg.relative_entropy(u, B, k).value - relative_entropy_grid(u, B, k)))
    elapsed = time.perf_counter() - t0
    ok = mehler < 1e-12 and structure_ok and ortho < 1e-10 and quad < 1e-9 and grid < 1e-5
    report(8, "spectral and overlap battery", ok,
           f"Mehler {mehler:.1e}, orthogonality zeros exact = {structure_ok} and norm {ortho:.1e}, "
           f"finite sum vs quadrature {quad:.1e}, relative entropy vs grid {grid:.1e}", elapsed, 30.0)


def test_criterion_9_relative_entropy_profile(report):
    t0 = time.perf_counter()
    peaks, ends, ok = {}, 0.0, True
    for w, b in ((3.0, 2.0), (0.25, 2.0)):
        for tf in (2.0, 6.0):
            spec = make_spec(w, b, tf)
            traj = integrate_consistency(synthesize_schedule(spec), spec.initial)
            k, u, _, _ = traj.spectral()
            rows = np.arange(0, len(traj), 10)
            rel = np.array([dg.relative_entropy(float(u[i]), float(traj.B[i]), float(k[i])).value for i in rows])
            ends = max(ends, abs(rel[0]), abs(rel[-1]))
            peaks[(w, b, tf)] = float(rel.max())
        ok &= peaks[(w, b, 2.0)] > peaks[(w, b, 6.0)]
    elapsed = time.perf_counter() - t0
    ok &= ends < 1e-8
    detail = ", ".join(f"({w:g},{b:g}) peak {peaks[(w, b, 2.0)]:.4f} at t_f=2 vs {peaks[(w, b, 6.0)]:.4f} at t_f=6"
                       for w, b in ((3.0, 2.0), (0.25, 2.0)))
    report(9, "relative entropy profile", ok, f"endpoint values <= {ends:.1e} (< 1e-8); {detail}", elapsed, 10.0)
