"""Command-line front end.

    exclusim <command> --config run.json [--out DIR] [--workers N] [--check LEVEL]

Commands: simulate, fd-sweep, couple, tracer, hysteresis, ns, verify.
Every command writes CSV artifacts plus ``report.json`` listing each
invariant checked.  Exit status: 0 all checks passed, 2 some invariant was
violated, 1 usage, config or I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import rng as _rng
from .configuration import generate
from .coupling import METRIC_COLUMNS, run_coupled
from .dynamics import Normalization, evolve
from .errors import ExclusimError, SchemaError
from .monitors import (
    AdmissibilityMonitor,
    CheckResult,
    GapBoundMonitor,
    IntegralityMonitor,
    WindowDriftMonitor,
)
from .ns import NSParams, ns_evolve, run_coupled_ns
from .runconfig import CHECK_LEVELS, COMMANDS, RunConfig, parse_config
from .statistics import (
    FD_COLUMNS,
    HysteresisRegion,
    fd_sweep,
    hysteresis_scan,
    pick_families,
    weak_theory,
    write_csv,
    write_fd_csv,
)
from .tracer import TRACER_COLUMNS, tracer_evolve
from .velocity import Constant

SEED_ENV = "EXCLUSIM_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _check(name: str, margins, tol: float = 0.0) -> CheckResult:
    """Summarize margins (``bound - observed``; negative means violated)."""
    m = np.asarray(list(margins), dtype=float)
    if m.size == 0:
        return CheckResult(name, True, 0.0, 0, 0)
    bad = int(np.count_nonzero(m < -tol))
    return CheckResult(name, bad == 0, float(m.min()) + 0.0, bad, int(m.size))


def _every(cfg: RunConfig) -> int:
    if cfg.check == "every-step":
        return 1
    return max(1, cfg.T // 100)


def _merge(results: List[CheckResult]) -> List[CheckResult]:
    """Fold results with the same name into one line."""
    out = {}
    for r in results:
        cur = out.get(r.name)
        if cur is None:
            out[r.name] = CheckResult(r.name, r.passed, r.worst_margin, r.violations, r.checked_steps)
        else:
            cur.passed &= r.passed
            cur.worst_margin = min(cur.worst_margin, r.worst_margin)
            cur.violations += r.violations
            cur.checked_steps += r.checked_steps
    return list(out.values())


def _initial(cfg: RunConfig, seed: int, stream: int = 0, section=None):
    spec = cfg.init_spec(seed, section)
    return generate(spec, _rng.generator(seed, _rng.INIT, stream))


def _gap_factor(cfg: RunConfig, model) -> Optional[float]:
    if not model.deterministic:
        return None
    if cfg.kind.signed:
        return 4.0
    return 1.0 if cfg.kind.weak else 2.0


# --- commands -------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: Path, workers: int) -> List[CheckResult]:
    checks = []
    summary = []
    slack = 0.0 if cfg.topology.lattice_mode else 1e-9 * cfg.topology.L
    for seed in cfg.seeds:
        model = cfg.velocity_model(seed)
        x0 = _initial(cfg, seed)
        mons = []
        if cfg.check != "off":
            every = _every(cfg)
            mons.append(AdmissibilityMonitor(every))
            factor = _gap_factor(cfg, model)
            if factor is not None:
                mons.append(GapBoundMonitor(model.cap, factor, every, tol=slack))
            L = float(cfg.topology.L)
            windows = [(k * L / 4, (k + 1) * L / 4) for k in range(4)]
            mons.append(WindowDriftMonitor(windows, 2 if cfg.kind.signed else 1))
            if cfg.topology.lattice_mode:
                mons.append(IntegralityMonitor(every))
        traj = evolve(x0, model, cfg.kind, cfg.T, mons)
        checks += [m.result() for m in mons]
        b = cfg.effective_burn_in
        theory = None
        if model.deterministic and cfg.kind.weak:
            theory = weak_theory(model, x0.density, cfg.T, b, cfg.topology.r)
        summary.append({"seed": seed, "N": x0.n, "L": cfg.topology.L, "T": cfg.T,
                        "V_measured": traj.mean_velocity(b), "V_theory": theory})
        rows = ({"t": t + 1, "mean_disp": float(traj.mean_disp[t]),
                 "gap_min": float(traj.gap_min[t + 1]), "gap_max": float(traj.gap_max[t + 1])}
                for t in range(cfg.T))
        write_csv(out / f"simulate_seed{seed}.csv", ("t", "mean_disp", "gap_min", "gap_max"), rows)
    write_csv(out / "simulate.csv", ("seed", "N", "L", "T", "V_measured", "V_theory"), summary)
    return _merge(checks)


def cmd_fd_sweep(cfg: RunConfig, out: Path, workers: int) -> List[CheckResult]:
    grid = cfg.fd.rho_grid if cfg.fd else [cfg.rho]
    family = cfg.fd.init_family if cfg.fd else "random_admissible"
    model = cfg.velocity_model()
    b = cfg.effective_burn_in
    pts = fd_sweep(cfg.kind, model, grid, cfg.L, cfg.T, family, cfg.seeds,
                   cfg.topology.r, b, workers)
    write_fd_csv(out / "fd.csv", pts)
    checks = []
    span = cfg.T - b
    weak = [p for p in pts if p.V_theory is not None and cfg.kind.weak]
    if weak:
        cap = model.cap
        checks.append(_check("fd_weak_matches_capped_mean",
                             ((max(cap, p.gap0_max) + cap) / span - p.abs_err for p in weak)))
    region = [p for p in pts if p.in_region is not None]
    if region:
        checks.append(_check("fd_strong_in_hysteresis_region",
                             (0.0 if p.in_region else -1.0 for p in region)))
    speed = [p.V_measured for p in pts]
    checks.append(_check("fd_speed_bounded_by_cap", (model.cap - abs(v) for v in speed), 1e-12))
    return checks


def cmd_couple(cfg: RunConfig, out: Path, workers: int) -> List[CheckResult]:
    checks = []
    y_section = cfg.couple.y_init if cfg.couple and cfg.couple.y_init else None
    every = 0 if cfg.check == "off" else _every(cfg)
    for seed in cfg.seeds:
        model = cfg.velocity_model(seed)
        x0 = _initial(cfg, seed, 0)
        y0 = _initial(cfg, seed, 1, y_section)
        run = run_coupled(x0, y0, model, cfg.kind, cfg.T, check_every=every)
        write_csv(out / f"couple_seed{seed}.csv", METRIC_COLUMNS, run.rows())
        checks.append(CheckResult("coupling_proper", not run.improper_steps, 0.0 if not run.improper_steps else -1.0,
                                  len(run.improper_steps), (cfg.T // every + 1) if every else 0))
        checks.append(CheckResult("pair_count_nondecreasing", not run.pair_count_drops,
                                  0.0 if not run.pair_count_drops else -1.0,
                                  len(run.pair_count_drops), cfg.T))
        checks.append(_check("defect_direction_preserved", [-float(run.direction_reversals)]))
        if cfg.kind is Normalization.WEAK_NONNEG:
            w = run.max_pair_dist[~np.isnan(run.max_pair_dist)]
            checks.append(_check("pair_distance_le_v", model.cap - w, 1e-9 * cfg.topology.L))
    return _merge(checks)


def cmd_tracer(cfg: RunConfig, out: Path, workers: int) -> List[CheckResult]:
    sec = cfg.tracer
    direction = sec.direction if sec else "forward"
    start = sec.start_particle if sec else 0
    checks = []
    for seed in cfg.seeds:
        model = cfg.velocity_model(seed)
        x0 = _initial(cfg, seed)
        run = tracer_evolve(x0, model, cfg.kind, direction, cfg.T, start)
        write_csv(out / f"tracer_seed{seed}.csv", TRACER_COLUMNS, run.rows())
        t = np.arange(1, cfg.T + 1)
        if direction == "backward" and not cfg.kind.signed:
            # a nonnegative flow carries exactly one particle past the tracer per step
            checks.append(_check("tracer_backward_one_encounter_per_step",
                                 [-float(np.max(np.abs(run.encounters - np.arange(cfg.T + 1))))]))
        exact_case = (model.deterministic and isinstance(model.source, Constant)
                  and cfg.kind is Normalization.WEAK_NONNEG and cfg.init.kind == "uniform")
        if not exact_case:
            continue
        rho = x0.density
        if direction == "backward":
            resid = np.abs((run.V_flow - run.V_tr) * t * rho - t)
            checks.append(_check("tracer_backward_counting_identity", 1e-9 * t - resid))
        else:
            bound = (cfg.topology.L / x0.n + model.cap) / cfg.T
            checks.append(_check("tracer_forward_tracks_flow",
                                 [bound - abs(run.V_tr[-1] - run.V_flow[-1])]))
    return _merge(checks)


def cmd_hysteresis(cfg: RunConfig, out: Path, workers: int) -> List[CheckResult]:
    model = cfg.velocity_model()
    if not (model.deterministic and isinstance(model.source, Constant)):
        raise SchemaError([("velocity", "hysteresis scans need a constant deterministic velocity")])
    v = model.source.value
    sec = cfg.hysteresis
    rows, fam_rows, margins, exact = [], [], [], []
    region = HysteresisRegion(v)
    for rho in sec.rho_grid:
        fams = sec.families or pick_families(cfg.L, rho, v, sec.count)
        for p in hysteresis_scan(v, rho, cfg.L, cfg.T, fams):
            lo, hi = region.bounds(rho)
            tol = v / (rho * cfg.topology.L) + 2 * v / cfg.T
            margins.append(min(p.V_measured - (lo - tol), (hi + tol) - p.V_measured))
            exact.append(v / (rho * cfg.topology.L) - abs(p.V_measured - p.V_exact))
            rows.append({"kind": Normalization.STRONG_NONNEG.value, "rho": rho, "L": cfg.topology.L,
                         "T": cfg.T, "seed": cfg.seeds[0], "V_measured": p.V_measured,
                         "V_theory": p.V_exact, "abs_err": abs(p.V_measured - p.V_exact),
                         "in_region": p.in_region})
            fam_rows.append({"rho": rho, "m": p.m, "n": p.n, "V_exact": p.V_exact,
                             "V_measured": p.V_measured})
    write_csv(out / "hysteresis.csv", FD_COLUMNS, rows)
    write_csv(out / "hysteresis_families.csv", ("rho", "m", "n", "V_exact", "V_measured"), fam_rows)
    return [_check("hysteresis_region_membership", margins),
            _check("two_gap_velocity_accuracy", exact)]


def cmd_ns(cfg: RunConfig, out: Path, workers: int) -> List[CheckResult]:
    sec = cfg.ns
    checks, rows = [], []
    cap = cfg.velocity.cap
    for seed in cfg.seeds:
        params = NSParams(cap, sec.a, sec.a_max, seed)
        x0 = _initial(cfg, seed)
        traj, state = ns_evolve(x0, params, cfg.kind, cfg.T)
        rows.append({"seed": seed, "V_measured": traj.mean_velocity(cfg.effective_burn_in),
                     "u_min": float(state.u.min()), "u_max": float(state.u.max())})
        checks.append(_check("ns_carried_velocity_range",
                             [min(float(state.u.min()), cap - float(state.u.max()))]))
        if sec.coupled:
            y0 = _initial(cfg, seed, 1)
            every = 0 if cfg.check == "off" else _every(cfg)
            run = run_coupled_ns(x0, y0, params, cfg.kind, cfg.T, check_every=every)
            write_csv(out / f"ns_coupled_seed{seed}.csv", METRIC_COLUMNS, run.rows())
            checks.append(CheckResult("coupling_proper", not run.improper_steps,
                                      0.0 if not run.improper_steps else -1.0,
                                      len(run.improper_steps), cfg.T))
            if cfg.kind is Normalization.WEAK_NONNEG:
                w = run.max_pair_dist[~np.isnan(run.max_pair_dist)]
                checks.append(_check("ns_pair_distance_le_v2_over_a", cap * cap / sec.a - w))
    write_csv(out / "ns.csv", ("seed", "V_measured", "u_min", "u_max"), rows)
    return _merge(checks)


HANDLERS = {
    "simulate": cmd_simulate,
    "fd-sweep": cmd_fd_sweep,
    "couple": cmd_couple,
    "tracer": cmd_tracer,
    "hysteresis": cmd_hysteresis,
    "ns": cmd_ns,
}


def write_report(out: Path, command: str, checks: List[CheckResult]) -> bool:
    passed = all(c.passed for c in checks)
    report = {"command": command, "passed": passed, "checks": [c.to_dict() for c in checks]}
    with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return passed


def run(cfg: RunConfig, out: Path, workers: int = 1) -> int:
    """Execute a validated config; returns the exit status."""
    out.mkdir(parents=True, exist_ok=True)
    checks = HANDLERS[cfg.command](cfg, out, workers)
    return 0 if write_report(out, cfg.command, checks) else 2


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="exclusim", description="Synchronous exclusion processes on a ring.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS + ("verify",):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, required=name != "verify", help="run-config JSON")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--check", choices=CHECK_LEVELS, default=None)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"exclusim: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "verify":
            from .verify import run_verify

            out = args.out or Path("verify-out")
            out.mkdir(parents=True, exist_ok=True)
            checks = run_verify()
            return 0 if write_report(out, "verify", checks) else 2
        text = args.config.read_text(encoding="utf-8")
        doc = json.loads(text) if text.strip() else None
        if isinstance(doc, dict):
            if args.check:
                doc["check"] = args.check
            env_seed = os.environ.get(SEED_ENV)
            if env_seed is not None:
                doc["seeds"] = [int(env_seed)]
        cfg = parse_config(doc if doc is not None else text, args.command)
        out = args.out or Path(cfg.output or "out")
        return run(cfg, out, max(1, args.workers))
    except SchemaError as exc:
        print(f"exclusim: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"exclusim: {exc}", file=sys.stderr)
        return 1
    except ExclusimError as exc:
        print(f"exclusim: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
