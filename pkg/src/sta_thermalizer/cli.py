"""Command-line front end: ``sta-thermalizer <command> [flags]``.

Commands
--------
synthesize  control schedule on a uniform grid
propagate   integrate the consistency equations and export diagnostics
ensemble    stochastic unraveling against the deterministic moments
sweep       gamma_max and entropy change over an (omega_f, beta_f) grid
check       run the self-verification battery

Every command writes CSV (``#`` metadata block, header row, 17 significant
digits) to ``--out`` or standard output.  Flags override values from a JSON
file given with ``--config``.  Exit codes: 0 success, 1 usage, 2 domain or
precondition violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .checks import run_checks
from .diagnostics import entropy_rate_identity, relative_entropy
from .dynamics.deterministic import integrate_consistency
from .dynamics.stochastic import DEFAULT_SDE_STEPS, UNRAVELINGS, default_workers, ensemble_average
from .errors import DomainError, StaError
from .gaussian_core import (
    ThermalEndpoint,
    entropy_array,
    moments_arrays,
    von_neumann_entropy,
)
from .protocol import ANSATZE, ProtocolSpec, gamma_max, synthesize_schedule

log = logging.getLogger("sta_thermalizer")

COMMANDS = ("synthesize", "propagate", "ensemble", "sweep", "check")
MIN_ENSEMBLE = 100


class UsageError(Exception):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    omega0: float = 1.0
    beta0: float = 1.0
    omegaf: float = 3.0
    betaf: float = 2.0
    tf: float = 6.0
    steps: int = 4000
    ansatz: str = "quintic"
    out: str | None = None
    seed: int = 12345
    workers: int = 0
    ntraj: int = 10_000
    unraveling: str = "noise"
    samples: int = 100
    sde_steps: int = DEFAULT_SDE_STEPS
    omegaf_range: str = "0.2:4:21"
    betaf_range: str = "0.2:4:21"
    skip_stochastic: bool = False

    def validate(self):
        for name in ("omega0", "beta0", "omegaf", "betaf", "tf"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"--{name} must be finite and positive, got {value!r}")
        for name in ("steps", "samples", "sde_steps"):
            if getattr(self, name) < 2:
                raise DomainError(f"--{name.replace('_', '-')} must be at least 2")
        if self.ansatz not in ANSATZE:
            raise UsageError(f"unknown ansatz {self.ansatz!r}; choose from {sorted(ANSATZE)}")
        if self.unraveling not in UNRAVELINGS:
            raise UsageError(f"unknown unraveling {self.unraveling!r}; choose from {UNRAVELINGS}")
        if self.workers < 0:
            raise DomainError("--workers must be non-negative (0 = all available cores)")

    @property
    def n_workers(self):
        return self.workers or default_workers()

    def spec(self, omegaf=None, betaf=None) -> ProtocolSpec:
        return ProtocolSpec(
            ThermalEndpoint(self.omega0, self.beta0),
            ThermalEndpoint(self.omegaf if omegaf is None else omegaf, self.betaf if betaf is None else betaf),
            self.tf,
            self.steps,
            ANSATZE[self.ansatz],
        )

    def metadata(self, *names):
        return {name: getattr(self, name) for name in names}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_range(text: str):
    """``a:b:n`` -> n evenly spaced values from a to b inclusive."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise UsageError(f"range must be a:b:n, got {text!r}") from None
    if n < 1:
        raise UsageError(f"range needs at least one point, got {text!r}")
    return np.linspace(a, b, n)


def _build_parser():
    parser = _Parser(prog="sta-thermalizer", description="Shortcuts to thermalization of a harmonic oscillator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    shared = _Parser(add_help=False)
    for flag, typ, text in (
        ("--omega0", float, "initial trap frequency"),
        ("--beta0", float, "initial inverse temperature"),
        ("--omegaf", float, "final trap frequency"),
        ("--betaf", float, "final inverse temperature"),
        ("--tf", float, "protocol duration"),
        ("--steps", int, "time grid intervals"),
        ("--seed", int, "base random seed"),
        ("--workers", int, "worker processes (0 = all cores)"),
    ):
        shared.add_argument(flag, type=typ, default=None, help=text)
    shared.add_argument("--ansatz", choices=sorted(ANSATZE), default=None)
    shared.add_argument("--out", default=None, help="output CSV path (default: standard output)")
    shared.add_argument("--config", default=None, help="JSON file of defaults; flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synthesize", parents=[shared], help="export a control schedule")
    sub.add_parser("propagate", parents=[shared], help="integrate and export diagnostics")
    ens = sub.add_parser("ensemble", parents=[shared], help="stochastic unraveling check")
    ens.add_argument("--ntraj", type=int, default=None)
    ens.add_argument("--unraveling", choices=UNRAVELINGS, default=None)
    ens.add_argument("--samples", type=int, default=None, help="number of sampled times")
    ens.add_argument("--sde-steps", dest="sde_steps", type=int, default=None)
    sweep = sub.add_parser("sweep", parents=[shared], help="gamma_max over an endpoint grid")
    sweep.add_argument("--omegaf-range", dest="omegaf_range", default=None, help="a:b:n")
    sweep.add_argument("--betaf-range", dest="betaf_range", default=None, help="a:b:n")
    chk = sub.add_parser("check", parents=[shared], help="run the verification battery")
    chk.add_argument("--skip-stochastic", dest="skip_stochastic", action="store_true", default=None)
    return parser


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path}: expected a JSON object")
    out = {}
    for key, value in data.items():
        name = key.replace("-", "_")
        if name not in _FIELD_TYPES:
            raise UsageError(f"config {path}: unknown key {key!r}")
        out[name] = value
    return out


def make_config(args) -> RunConfig:
    values = _load_config(args.config) if args.config else {}
    for name in _FIELD_TYPES:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    try:
        cfg = RunConfig(**values)
        for f in fields(RunConfig):
            value = getattr(cfg, f.name)
            if value is not None and f.type in ("float", "int") and not isinstance(value, (int, float)):
                raise TypeError(f"{f.name} must be numeric, got {value!r}")
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    cfg.validate()
    return cfg


# -- output -------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, meta: dict, columns, data):
    """Write a ``#`` metadata block, the header row and ``data`` (rows x columns)."""
    lines = [f"# {key}: {_fmt(value)}" for key, value in meta.items()]
    lines.append(",".join(columns))
    for row in np.asarray(data, dtype=float):
        lines.append(",".join(format(v, ".17g") for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _report(cfg, message):
    """Summaries go to stdout unless the CSV itself does."""
    print(message, file=sys.stderr if cfg.out is None else sys.stdout)


def _header(command, cfg, *names):
    meta = {"command": command, "version": __version__}
    meta.update(cfg.metadata("omega0", "beta0", "omegaf", "betaf", "tf", "steps", "ansatz", *names))
    return meta


# -- commands -----------------------------------------------------------------


def cmd_synthesize(cfg: RunConfig) -> int:
    spec = cfg.spec()
    sch = synthesize_schedule(spec)
    _, u, eps, _ = sch.spectral()
    gm = gamma_max(spec)
    meta = _header("synthesize", cfg)
    meta.update(
        non_markovian=sch.non_markovian,
        gamma_max=gm.gamma_max,
        t_max=gm.t_max,
        min_omega_sq=float(np.min(sch.omega_sq)),
        trap_inversion=bool(np.min(sch.omega_sq) < 0),
    )
    cols = ["t", "omega_sq", "gamma", "A", "B_implied", "C", "Omega", "eta", "u", "eps_tilde", "entropy"]
    data = np.column_stack(
        [sch.times, sch.omega_sq, sch.gamma, sch.A, sch.B_implied, sch.C, sch.Omega, sch.eta, u, eps, entropy_array(u)]
    )
    write_csv(cfg.out, meta, cols, data)
    log.info("schedule with %d rows written", len(sch.times))
    return 0


def cmd_propagate(cfg: RunConfig) -> int:
    spec = cfg.spec()
    sch = synthesize_schedule(spec)
    traj = integrate_consistency(sch, spec.initial)
    xx, pp, xp = traj.moments()
    k, u, _, _ = traj.spectral()
    S = entropy_array(u)
    rel = np.array([relative_entropy(float(ui), float(b), float(ki)).value for ui, b, ki in zip(u, traj.B, k)])
    lhs, rhs = entropy_rate_identity(traj.times, traj.A, traj.C, sch.gamma)
    pad = np.full(1, np.nan)
    lhs, rhs = np.concatenate([pad, lhs, pad]), np.concatenate([pad, rhs, pad])
    target = spec.final
    f = traj.final
    dev = max(abs(f.A - target.A), abs(f.B - target.B), abs(f.C - target.C))
    meta = _header("propagate", cfg)
    meta.update(integrator="rk4", final_deviation=dev, final_B=f.B)
    cols = [
        "t", "A", "B", "C", "xx", "pp", "xp", "entropy", "relative_entropy",
        "entropy_rate_lhs", "entropy_rate_rhs",
    ]
    data = np.column_stack([traj.times, traj.A, traj.B, traj.C, xx, pp, xp, S, rel, lhs, rhs])
    write_csv(cfg.out, meta, cols, data)
    rate_err = float(np.nanmax(np.abs(lhs - rhs)))
    _report(
        cfg,
        f"final deviation from target: {dev:.3e} (|B_f| = {abs(f.B):.3e}); "
        f"entropy-rate identity max error {rate_err:.3e}",
    )
    return 0


def cmd_ensemble(cfg: RunConfig) -> int:
    if cfg.ntraj < MIN_ENSEMBLE:
        raise DomainError(f"--ntraj must be at least {MIN_ENSEMBLE}, got {cfg.ntraj}")
    spec = cfg.spec()
    sch = synthesize_schedule(spec)
    stats = ensemble_average(
        sch, cfg.ntraj, cfg.seed, cfg.unraveling, n_steps=cfg.sde_steps, n_samples=cfg.samples, workers=cfg.n_workers
    )
    # deterministic reference on a grid containing the sample times
    det_steps = cfg.samples * math.ceil(cfg.steps / cfg.samples)
    traj = integrate_consistency(sch, spec.initial, det_steps)
    idx = np.rint(stats.times / traj.dt).astype(int)
    xx, pp, xp = moments_arrays(traj.A[idx], traj.B[idx], traj.C[idx])
    z = np.abs(np.stack([(stats.xx - xx) / stats.se_xx, (stats.pp - pp) / stats.se_pp, (stats.xp - xp) / stats.se_xp]))
    z_max = np.max(z, axis=0)
    frac = float(np.mean(z_max < 3.0))
    meta = _header("ensemble", cfg, "ntraj", "seed", "unraveling", "samples", "sde_steps")
    meta.update(fraction_rows_within_3se=frac)
    cols = ["t", "xx_det", "xx_ens", "xx_se", "pp_det", "pp_ens", "pp_se", "xp_det", "xp_ens", "xp_se", "z_max"]
    data = np.column_stack(
        [stats.times, xx, stats.xx, stats.se_xx, pp, stats.pp, stats.se_pp, xp, stats.xp, stats.se_xp, z_max]
    )
    write_csv(cfg.out, meta, cols, data)
    _report(cfg, f"{cfg.unraveling} unraveling: {100 * frac:.1f}% of sampled times with all |z| < 3")
    return 0


def _sweep_cell(job):
    cfg, omegaf, betaf = job
    ratio = (betaf * omegaf) / (cfg.beta0 * cfg.omega0)
    try:
        spec = cfg.spec(omegaf, betaf)
        gm = gamma_max(spec)
        u0 = math.exp(-cfg.beta0 * cfg.omega0)
        uf = math.exp(-betaf * omegaf)
        dS = von_neumann_entropy(uf) - von_neumann_entropy(u0)
        return (omegaf, betaf, gm.gamma_max, gm.t_max / spec.t_f, dS, ratio), None
    except StaError as exc:
        return (omegaf, betaf, math.nan, math.nan, math.nan, ratio), f"{type(exc).__name__}: {exc}"


def cmd_sweep(cfg: RunConfig) -> int:
    jobs = [(cfg, w, b) for w in parse_range(cfg.omegaf_range) for b in parse_range(cfg.betaf_range)]
    workers = max(1, min(cfg.n_workers, len(jobs)))
    if workers == 1:
        results = [_sweep_cell(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    rows = np.array([r for r, _ in results], dtype=float)
    errors = [(job[1], job[2], e) for job, (_, e) in zip(jobs, results) if e]
    for w, b, e in errors:
        log.warning("cell omega_f=%g beta_f=%g failed: %s", w, b, e)
    meta = _header("sweep", cfg, "omegaf_range", "betaf_range")
    meta.pop("omegaf")
    meta.pop("betaf")
    meta.update(cells=len(rows), error_cells=len(errors))
    cols = ["omega_f", "beta_f", "gamma_max", "t_max_frac", "delta_S", "phase_space_ratio"]
    write_csv(cfg.out, meta, cols, rows)
    ok = np.isfinite(rows[:, 2])
    neg = rows[ok, 2] < 0
    hot = rows[ok, 5] > 1.0
    _report(
        cfg,
        f"{len(rows)} cells, {len(errors)} errors; gamma_max < 0 in {int(neg.sum())} cells, "
        f"phase-space ratio > 1 in {int(hot.sum())}",
    )
    return 0


def cmd_check(cfg: RunConfig) -> int:
    results = run_checks(skip_stochastic=cfg.skip_stochastic)
    failed = [r for r in results if not r.informational and not r.passed]
    lines = [r.line() for r in results]
    lines.append(f"{len(results) - len(failed)} of {len(results)} entries ok, {len(failed)} failed")
    text = "\n".join(lines) + "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(lines[-1])
    return 3 if failed else 0


_DISPATCH = {
    "synthesize": cmd_synthesize,
    "propagate": cmd_propagate,
    "ensemble": cmd_ensemble,
    "sweep": cmd_sweep,
    "check": cmd_check,
}

_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO, "warn": logging.WARNING, "warning": logging.WARNING}


def _setup_logging():
    level = _LEVELS.get(os.environ.get("STA_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = _build_parser().parse_args(argv)
        cfg = make_config(args)
        log.debug("configuration %s", asdict(cfg))
        return _DISPATCH[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return exc.exit_code
    except StaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
