"""Config-driven experiment runner.

    acoustic-lab run <config> [--output-dir D] [--threads N]

Exit status: 0 all audits pass, 1 an audit failed, 2 config error,
3 runtime or I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .attractor import (compare_series, epsilon_sweep, make_seeds, sample_omega_limit,
                        seed_state, upper_semicontinuity_report)
from .config import Config, ConfigError, parse_config
from .diagnostics import (EnergyLedger, check_diff_inequality, eventual_energy_bound, fit_decay,
                          max_step_residual, saturation_ratio, utt_boundary_integral,
                          verify_abs_entry)
from .integrator import StepFailure, Stepper, run, run_split
from .mesh import build_mesh
from .model import functional_constants, make_nonlinearity, norm_Heps, norm_Heps_sq, project

EXIT_PASS, EXIT_AUDIT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

CONVENTION = ("epsilon convention: first power (eps*delta_tt in the boundary ODE, "
              "eps*|gamma|^2 in the H_eps norm); the eps^2-weighted variant of the same "
              "family is not simulated")

STEP_RESIDUAL_TOL = 1e-7
ORDER_RANGE = (3.5, 4.5)
ROUNDOFF_FLOOR = 1e-9   # rate residuals below this are rounding noise, no order to measure
DISSIPATIVITY_TOL = 1e-9


@dataclass
class Outcome:
    files: dict[str, str] = field(default_factory=dict)
    info: list[str] = field(default_factory=list)
    audits: list[tuple[str, bool, str]] = field(default_factory=list)

    def audit(self, name: str, ok: bool, detail: str) -> None:
        self.audits.append((name, bool(ok), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.audits)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _tag(eps: float) -> str:
    return f"eps{eps:g}"


def _setup(cfg: Config):
    mesh = build_mesh(cfg.n, cfg.L)
    nl = make_nonlinearity(cfg.nonlinearity, L=cfg.L, k=cfg.k, coeffs=cfg.coeffs)
    return mesh, nl


def _base_seeds(cfg: Config, mesh):
    return make_seeds(mesh, cfg.seeds, cfg.radius, rng_seed=cfg.rng_seed)


# --- experiments ------------------------------------------------------------------

def _audit_ledger(out: Outcome, name: str, stp: Stepper, st0, cfg: Config, eta: float):
    led = EnergyLedger(eta=eta)
    run(stp, st0, cfg.horizon, cfg.sample_dt, ledger=led)
    half = EnergyLedger(eta=eta)
    run(replace(stp, dt=stp.dt / 2), st0, cfg.horizon, cfg.sample_dt, ledger=half)
    step_res = max_step_residual(led)
    coarse = float(np.max(np.abs(led.identity_residual)))
    fine = float(np.max(np.abs(half.identity_residual)))
    out.audit(f"{name} per-step residual <= {STEP_RESIDUAL_TOL:g}", step_res <= STEP_RESIDUAL_TOL,
              f"{step_res:.3e}")
    if coarse > ROUNDOFF_FLOOR:
        ratio = coarse / fine
        out.audit(f"{name} dt-halving ratio in [{ORDER_RANGE[0]}, {ORDER_RANGE[1]}]",
                  ORDER_RANGE[0] <= ratio <= ORDER_RANGE[1],
                  f"ratio={ratio:.4f} order={math.log2(ratio):.3f}")
    else:
        out.info.append(f"{name} rate residual {coarse:.3e} is at rounding level; order not measured")
    t = np.asarray(led.t)
    rise = np.diff(led.E_base) / np.diff(t)
    out.audit(f"{name} energy non-increasing (<= {DISSIPATIVITY_TOL:g} per unit time)",
              float(np.max(rise)) <= DISSIPATIVITY_TOL, f"max rise rate {float(np.max(rise)):.3e}")
    return led


def exp_energy_audit(cfg: Config, threads: int) -> Outcome:
    mesh, nl = _setup(cfg)
    out = Outcome()
    st0 = seed_state(_base_seeds(cfg, mesh)[0], 1.0)
    fc = functional_constants(mesh, nl) if nl.kind != "zero" else None
    eta = fc.eta1 if fc else 0.0
    for eps in cfg.grid:
        stp = Stepper(mesh, nl, "acoustic", eps=eps, dt=cfg.dt)
        st = seed_state(_base_seeds(cfg, mesh)[0], eps)
        led = _audit_ledger(out, f"acoustic {_tag(eps)}", stp, st, cfg, eta)
        out.files[f"ledger_acoustic_{_tag(eps)}.csv"] = led.to_csv()
    if cfg.transport:
        stp = Stepper(mesh, nl, "transport", dt=cfg.dt)
        led = _audit_ledger(out, "transport", stp, project(st0), cfg, eta)
        out.files["ledger_transport.csv"] = led.to_csv()
        I = utt_boundary_integral(led)
        out.info.append(f"transport int |u_tt|^2_Gamma = {float(I[-1])!r}, late/peak slope = "
                        f"{saturation_ratio(np.asarray(led.t), I)!r}")
    return out


def exp_robin_demo(cfg: Config, threads: int) -> Outcome:
    mesh, nl = _setup(cfg)
    out = Outcome()
    st0 = project(seed_state(_base_seeds(cfg, mesh)[0], 1.0))
    led = _audit_ledger(out, "robin", Stepper(mesh, nl, "robin", dt=cfg.dt), st0, cfg, 0.0)
    out.files["ledger_robin.csv"] = led.to_csv()
    return out


def exp_absorbing_set(cfg: Config, threads: int) -> Outcome:
    mesh, nl = _setup(cfg)
    fc = functional_constants(mesh, nl)
    out = Outcome()
    seeds = _base_seeds(cfg, mesh)
    t1 = fc.entry_time(cfg.radius, nl.kappa_f)
    out.info += [f"R1 = {fc.R1!r}", f"t1(R={cfg.radius:g}) = {t1!r}", f"m1 = {fc.m1!r}",
                 f"M1 = {fc.M1!r}", f"eta1 = {fc.eta1!r}"]
    rows, entries = [], {}
    ok_entry = ok_ineq = ok_neg = ok_eventual = True
    for eps in cfg.grid:
        stp = Stepper(mesh, nl, "acoustic", eps=eps, dt=cfg.dt)
        for i, base in enumerate(seeds):
            st0 = seed_state(base, eps)
            led = EnergyLedger(eta=fc.eta1)
            run(stp, st0, cfg.horizon, cfg.sample_dt, ledger=led)
            rep = verify_abs_entry(led, fc.R1, t1)
            ineq = check_diff_inequality(led, fc)
            neg = check_diff_inequality(led, fc, m1=10 * fc.m1)
            ev = eventual_energy_bound(led, fc, nl.kappa_f, cfg.radius)
            entries[(eps, i)] = rep.entry_time
            ok_entry &= rep.within_theory
            ok_ineq &= ineq.ok
            ok_neg &= neg.max_violation > 0
            ok_eventual &= ev.ok
            rows.append([eps, i, norm_Heps(mesh, st0), float(np.max(led.norm)),
                         rep.entry_time if rep.entry_time is not None else float("nan"),
                         ineq.max_violation, neg.max_violation, ev.max_E, ev.bound])
    out.files["absorbing.csv"] = _csv(
        ["eps", "seed", "norm0", "max_norm", "entry_time", "max_violation",
         "max_violation_m1x10", "eventual_max_E", "small_ball_sup"], rows)
    out.audit("entry into R1 ball before t1", ok_entry, f"R1={fc.R1:.4f} t1={t1:.4g}")
    spread_ok, worst = True, 0.0
    for i in range(len(seeds)):
        times = [entries[(e, i)] for e in cfg.grid]
        if any(x is None for x in times):
            spread_ok = False
            continue
        spread = max(times) - min(times)
        worst = max(worst, spread)
        spread_ok &= spread <= cfg.sample_dt + 0.2 * max(times)
    out.audit("entry times uniform in eps", spread_ok, f"max spread {worst:.4g}")
    out.audit("differential inequality (violation <= 10 dt)", ok_ineq,
              f"worst {max(r[5] for r in rows):.4e}")
    out.audit("negative control m1x10 violates", ok_neg, f"min {min(r[6] for r in rows):.4e}")
    out.audit("eventual bound E <= small-ball sup", ok_eventual,
              f"max {max(r[7] for r in rows):.4g} vs {rows[0][8]:.4g}")
    return out


def exp_split_decay(cfg: Config, threads: int) -> Outcome:
    mesh, nl = _setup(cfg)
    out = Outcome()
    base = _base_seeds(cfg, mesh)[0]
    rows = []
    for eps in cfg.grid:
        stp = Stepper(mesh, nl, "acoustic", eps=eps, dt=cfg.dt)
        sr = run_split(stp, seed_state(base, eps), cfg.horizon, cfg.sample_dt)
        t = np.array([s.t for s in sr.full])
        nx = np.array([norm_Heps(mesh, s) for s in sr.xi])
        nc = np.array([norm_Heps(mesh, s) for s in sr.chi])
        add = np.array([math.sqrt(norm_Heps_sq(mesh, x + c - f))
                        for x, c, f in zip(sr.xi, sr.chi, sr.full)])
        rows += [[eps, a, b, c, d] for a, b, c, d in zip(t, nx, nc, add)]
        fit = fit_decay(t, nx)
        half = len(t) // 2
        first, last = float(np.max(nc[:half])), float(np.max(nc[half:]))
        out.info.append(f"{_tag(eps)} xi fit: Q={fit.Q!r} omega={fit.omega!r} P={fit.P!r} "
                        f"rms={fit.rms_residual!r}")
        out.audit(f"{_tag(eps)} additivity xi+chi=zeta within 1e-8", float(add.max()) <= 1e-8,
                  f"{float(add.max()):.3e}")
        out.audit(f"{_tag(eps)} xi decay rate positive", fit.omega > 0, f"omega={fit.omega:.4g}")
        out.audit(f"{_tag(eps)} chi bounded (late max <= early max + 5%)", last <= 1.05 * first,
                  f"{last:.4g} vs {first:.4g}")
    out.files["split.csv"] = _csv(["eps", "t", "norm_xi", "norm_chi", "additivity"], rows)
    return out


def exp_compare(cfg: Config, threads: int) -> Outcome:
    mesh, nl = _setup(cfg)
    out = Outcome()
    base = _base_seeds(cfg, mesh)[0]
    cmp = compare_series(mesh, nl, cfg.eps, base, cfg.horizon, cfg.dt, cfg.sample_dt)
    fine = compare_series(mesh, nl, cfg.eps, base, cfg.horizon, cfg.dt / 2, cfg.sample_dt)
    change = abs(fine.sup - cmp.sup) / cmp.sup
    out.files["compare.csv"] = _csv(["t", "difference"], [[a, b] for a, b in zip(cmp.t, cmp.diff)])
    out.info.append(f"sup difference = {cmp.sup!r} at eps={cfg.eps!r}")
    out.audit("experiment non-degenerate (difference > 0)", cmp.sup > 0, f"{cmp.sup:.4e}")
    out.audit("dt-halving changes sup by < 1%", change < 0.01, f"{change:.3e}")
    return out


def exp_sweep(cfg: Config, threads: int) -> Outcome:
    mesh, nl = _setup(cfg)
    out = Outcome()
    seeds = _base_seeds(cfg, mesh)
    res = epsilon_sweep(mesh, nl, seeds, cfg.grid, cfg.horizon, cfg.dt, threads=threads)
    out.files["sweep.csv"] = res.to_csv() + "# fit " + res.summary_line() + "\n"
    out.info.append(res.summary_line())
    mono = bool(np.all(np.diff(res.D) <= 0))
    out.info.append(f"D nonincreasing as eps decreases: {mono}")
    out.audit("slope rho >= 0.45", res.rho >= 0.45, f"rho={res.rho:.4f}")
    out.audit("log residual < 0.1", res.residual < 0.1, f"{res.residual:.4f}")
    out.audit("dt converged (halving changes D < 1%)", res.dt_change < 0.01, f"{res.dt_change:.3e}")
    return out


def exp_omega_limit(cfg: Config, threads: int) -> Outcome:
    mesh, nl = _setup(cfg)
    out = Outcome()
    fc = functional_constants(mesh, nl) if nl.kind != "zero" else None
    seeds = _base_seeds(cfg, mesh)
    T_b = cfg.T_b if cfg.T_b is not None else cfg.horizon
    out.info.append(f"burn-in T_b = {T_b!r}, window T_w = {cfg.T_w!r}, cadence = {cfg.cadence!r}")
    transport = Stepper(mesh, nl, "transport", dt=cfg.dt)
    cloud0 = sample_omega_limit(transport, [project(seed_state(b, 1.0)) for b in seeds],
                                T_b, cfg.T_w, cfg.cadence)
    rows, dists = [], []
    for eps in cfg.grid:
        stp = Stepper(mesh, nl, "acoustic", eps=eps, dt=cfg.dt)
        cloud = sample_omega_limit(stp, [seed_state(b, eps, aic2=cfg.use_aic2) for b in seeds],
                                   T_b, cfg.T_w, cfg.cadence)
        d = upper_semicontinuity_report(mesh, cloud, cloud0, eps)
        norms = [norm_Heps(mesh, s) for s in cloud.states]
        dists.append(d)
        rows.append([eps, len(cloud), float(max(norms)), d])
        if fc is not None:
            out.audit(f"{_tag(eps)} cloud inside R1 ball", max(norms) <= fc.R1,
                      f"max norm {max(norms):.4g} vs R1 {fc.R1:.4g}")
    out.files["cloud_summary.csv"] = _csv(["eps", "members", "max_norm", "dist_to_lifted_limit"],
                                          rows)
    out.audit("distance to lifted limit cloud decreases with eps",
              all(b < a for a, b in zip(dists, dists[1:])), ", ".join(f"{d:.3e}" for d in dists))
    return out


EXPERIMENTS: dict[str, Callable[[Config, int], Outcome]] = {
    "energy_audit": exp_energy_audit, "absorbing_set": exp_absorbing_set,
    "split_decay": exp_split_decay, "compare": exp_compare, "sweep": exp_sweep,
    "omega_limit": exp_omega_limit, "robin_demo": exp_robin_demo,
}


# --- output -----------------------------------------------------------------------

def summary_text(cfg: Config, out: Outcome, notes: list[str]) -> str:
    lines = [f"experiment: {cfg.experiment}", CONVENTION,
             f"mesh: n={cfg.n} L={cfg.L!r}; nonlinearity: {cfg.nonlinearity}"
             + (f" k={cfg.k!r}" if cfg.nonlinearity == "double_well" else ""),
             f"time: dt={cfg.dt!r} T={cfg.horizon!r} sample_dt={cfg.sample_dt!r}",
             f"seeds: count={cfg.seeds} rng_seed={cfg.rng_seed} radius={cfg.radius!r}"]
    lines += notes + out.info
    lines += [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in out.audits]
    lines.append(f"result: {'PASS' if out.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def write_atomic(directory: str, files: dict[str, str]) -> None:
    """Write all files or none: temp files first, then renames; cleanup on failure."""
    os.makedirs(directory, exist_ok=True)
    temps, done = [], []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=directory)
            temps.append((tmp, os.path.join(directory, name)))
            with os.fdopen(fd, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(text)
        for tmp, final in temps:
            os.replace(tmp, final)
            done.append(final)
    except OSError:
        for tmp, _ in temps:
            if os.path.exists(tmp):
                os.remove(tmp)
        for final in done:
            os.remove(final)
        raise


def run_experiment(cfg: Config, threads: int = 1) -> tuple[int, Outcome]:
    notes = []
    fn = EXPERIMENTS[cfg.experiment]
    dt = cfg.dt
    for attempt in range(cfg.retry_halvings + 1):
        try:
            out = fn(replace(cfg, dt=dt), threads)
            break
        except StepFailure as exc:
            notes.append(f"step failure at dt={dt!r}: {exc}")
            if attempt == cfg.retry_halvings:
                raise
            dt /= 2
    if dt != cfg.dt:
        notes.append(f"completed with dt={dt!r} after halving")
    out.files["summary.txt"] = summary_text(replace(cfg, dt=dt), out, notes)
    write_atomic(cfg.output_dir, out.files)
    return (EXIT_PASS if out.passed else EXIT_AUDIT), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="acoustic-lab")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a config file")
    r.add_argument("config")
    r.add_argument("--output-dir")
    r.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    if args.threads < 1:
        print("config error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code, out = run_experiment(cfg, threads=args.threads)
    except (StepFailure, FloatingPointError, RuntimeError, OSError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name, ok, detail in out.audits:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return code


if __name__ == "__main__":
    sys.exit(main())
