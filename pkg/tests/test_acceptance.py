"""End-to-end acceptance criteria at their stated tolerances.

Every test prints one pass/fail line (also collected into the terminal
summary) before asserting.
"""
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from exclusim.configuration import InitSpec, from_positions, generate
from exclusim.coupling import run_coupled
from exclusim.dynamics import Normalization, advance, evolve
from exclusim.monitors import GapBoundMonitor, GapClassMonitor, WindowDriftMonitor
from exclusim.ns import NSParams, ns_evolve, run_coupled_ns
from exclusim.rng import INIT, generator
from exclusim.statistics import (
    HysteresisRegion,
    fd_sweep,
    hysteresis_scan,
    iid_spread,
    lattice_fd_check,
    pick_families,
    two_gap_config,
    two_gap_family,
)
from exclusim.tracer import tracer_evolve
from exclusim.velocity import Periodic, Uniform, VelocityModel, constant_model

from acceptance_log import record
from oracle import oracle_run
from test_oracle import LATTICE_KINDS, _continuum_case, _lattice_case

W, S = Normalization.WEAK_NONNEG, Normalization.STRONG_NONNEG
WB = Normalization.WEAK_BOTH_CONTINUOUS
SEEDS3 = [0, 1, 2]
SEEDS5 = [0, 1, 2, 3, 4]
FD_RHOS = [0.25, 0.5, 1.0, 2.0, 4.0]


def _random(L, rho, seed, stream=0, r=0.0):
    return generate(InitSpec("random_admissible", L, r, rho), generator(seed, INIT, stream))


# --- 1 ---------------------------------------------------------------------------

def test_c1_weak_fd_random_inits():
    pts = fd_sweep(W, constant_model(1.0), FD_RHOS, 200.0, 10_000, "random_admissible", SEEDS3)
    worst = max(abs(p.V_measured - min(1.0, 1.0 / p.rho)) for p in pts)
    ok = record(1, "random inits, 3 seeds", worst <= 1e-2, f"max |V - min(1,1/rho)| = {worst:.3g} (tol 1e-2)")
    assert ok


def test_c1_weak_fd_uniform_every_step():
    worst = 0.0
    for rho in FD_RHOS:
        cfg = generate(InitSpec("uniform", 200.0, 0.0, rho))
        traj = evolve(cfg, constant_model(1.0), W, 10_000)
        running = np.cumsum(traj.mean_disp) / np.arange(1, traj.T + 1)
        worst = max(worst, float(np.max(np.abs(running - min(1.0, 1.0 / rho)))))
    ok = record(1, "uniform inits, every t", worst <= 1e-12, f"max |V(t) - theory| = {worst:.3g} (tol 1e-12)")
    assert ok


# --- 2 ---------------------------------------------------------------------------

def _gap_fixtures():
    for rho in FD_RHOS:
        for seed in SEEDS3:
            yield W, _random(200.0, rho, seed, stream=9)
    for rho in [0.4, 0.75, 1.0, 1.5, 2.0]:
        for seed in SEEDS3:
            yield S, _random(200.0, rho, seed, stream=9)
    for m, n in pick_families(20.0, 1.0, 1.0, 5):
        yield S, two_gap_config(20.0, m, n, 1.0)


def test_c2_gap_bounds_every_step():
    violations, worst, runs = 0, np.inf, 0
    for kind, cfg in _gap_fixtures():
        factor = 1.0 if kind is W else 2.0
        mon = GapBoundMonitor(1.0, factor, every=1, tol=1e-9 * float(cfg.circumference))
        evolve(cfg, constant_model(1.0), kind, 2000, [mon])
        res = mon.result()
        violations += res.violations
        worst = min(worst, res.worst_margin)
        runs += 1
    ok = record(2, f"{runs} runs, every step", violations == 0,
                f"violations = {violations}, worst margin = {worst:.3g}")
    assert ok


# --- 3 ---------------------------------------------------------------------------

def test_c3_strong_free_flow():
    pts = fd_sweep(S, constant_model(1.0), [0.4], 250.0, 10_000, "random_admissible", SEEDS3)
    worst = max(abs(p.V_measured - 1.0) for p in pts)
    ok = record(3, "rho=0.4, 3 seeds", worst <= 1e-2, f"max |V - 1| = {worst:.3g} (tol 1e-2)")
    assert ok


# --- 4 ---------------------------------------------------------------------------

def test_c4_two_gap_exact_velocity():
    cfg = generate(InitSpec("two_gap", 8.0, 0.0, m=4, n=4, g_small=0.75, g_large=1.25))
    errs = {}
    classes_ok = True
    for T in (100, 10_000):
        mon = GapClassMonitor(1.0, 4, 4, every=1)
        traj = evolve(cfg, constant_model(1.0), S, T, [mon])
        errs[T] = abs(traj.mean_velocity() - 0.5)
        classes_ok &= mon.result().passed
    ok = errs[100] <= 0.125 and errs[10_000] <= 1e-3 and classes_ok
    record(4, "X(8,4,4)", ok,
           f"|V-0.5| = {errs[100]:.3g} @T=100 (tol 0.125), {errs[10_000]:.3g} @T=1e4 (tol 1e-3); "
           f"classes preserved = {classes_ok}")
    assert ok


# --- 5 ---------------------------------------------------------------------------

def test_c5_hysteresis_membership():
    region = HysteresisRegion(1.0)
    worst, count = np.inf, 0
    for rho in [0.75, 1.0, 1.5, 2.0]:
        for p in hysteresis_scan(1.0, rho, 20.0, 2000, pick_families(20.0, rho, 1.0, 5)):
            lo, hi = region.bounds(rho)
            worst = min(worst, p.V_measured - (lo - 0.01), (hi + 0.01) - p.V_measured)
            count += 1
    ok = count == 20 and worst >= 0
    record(5, f"{count} families", ok, f"worst margin to H +/- 0.01 = {worst:.3g}")
    assert ok


# --- 6 ---------------------------------------------------------------------------

def test_c6_lattice_embedding():
    grid = [0.1, 0.2, 1 / 3, 0.5, 2 / 3, 0.8]
    worst, integral = 0.0, True
    for v in (1, 2):
        for row in lattice_fd_check(v, grid, 300, 10_000):
            worst = max(worst, row.abs_err)
            integral &= row.integral and row.float_path_integral
    ok = worst <= 1e-2 and integral
    record(6, "v in {1,2}, 6 densities", ok, f"integral = {integral}, max |V - theory| = {worst:.3g} (tol 1e-2)")
    assert ok


# --- 7 ---------------------------------------------------------------------------

def test_c7_pair_distance_bound():
    worst, improper = 0.0, 0
    for seed in SEEDS5:
        model = VelocityModel(1.0, "iid", Uniform(0.0, 1.0), seed=seed)
        run = run_coupled(_random(100.0, 1.0, seed, 0), _random(100.0, 1.0, seed, 1), model, W, 1000)
        w = run.max_pair_dist[~np.isnan(run.max_pair_dist)]
        worst = max(worst, float(w.max(initial=0.0)))
        improper += len(run.improper_steps)
    ok = worst <= 1.0 + 1e-9 and improper == 0
    record(7, "weak iid, 5 seeds, 1e3 steps", ok, f"max |W| = {worst:.6f} (v = 1), improper states = {improper}")
    assert ok


# --- 8 ---------------------------------------------------------------------------

def test_c8a_no_coupling_fixture():
    xs = np.arange(10) * 10.0
    x, y = from_positions(xs, 0.0, 100.0), from_positions(xs + 2.0, 0.0, 100.0)
    run = run_coupled(x, y, constant_model(1.0), W, 1000)
    ok = int(run.pair_count.max()) == 0
    record("8a", "spacing 10, offset 2v", ok, f"max pair count = {int(run.pair_count.max())}")
    assert ok


def test_c8b_growing_pair_distance():
    eps = 0.01
    n = 100
    L = n * (1 - eps)
    ys = np.concatenate([[0.0], np.cumsum(np.full(n, 1 - eps))[:-1]])
    xs = np.concatenate([[0.0], np.cumsum(np.tile([1.5 * (1 - eps), 0.5 * (1 - eps)], n // 2))[:-1]])
    run = run_coupled(from_positions(xs, 0.0, L), from_positions(ys, 0.0, L), constant_model(1.0), S, 1000)
    w = run.max_pair_dist
    fit = stats.linregress(np.arange(100, 1001), w[100:1001])
    exceeds = bool(np.nanmax(w[:101]) > 1.0)
    ok = exceeds and fit.slope > 0 and fit.rvalue ** 2 >= 0.9
    record("8b", f"eps={eps}", ok,
           f"max W by t=100 = {np.nanmax(w[:101]):.3g} (> v), slope = {fit.slope:.3g}, R^2 = {fit.rvalue ** 2:.4f}")
    assert ok


# --- 9 ---------------------------------------------------------------------------

def test_c9_tracer_backward_identity():
    cfg = generate(InitSpec("uniform", 100.0, 0.0, 1.0))
    run = tracer_evolve(cfg, constant_model(0.5), W, "backward", 1000)
    err = float(np.max(np.abs(run.V_tr - (run.V_flow - 1.0))))
    ok = record(9, "backward, per step", err <= 1e-9, f"max |V_tr - (V - 1/rho)| = {err:.3g} (tol 1e-9)")
    assert ok


def test_c9_tracer_forward():
    cfg = generate(InitSpec("uniform", 100.0, 0.0, 1.0))
    run = tracer_evolve(cfg, constant_model(0.5), W, "forward", 1000)
    err = abs(float(run.V_tr[-1]) - float(run.V_flow[-1]))
    ok = record(9, "forward, T=1e3", err <= 1e-2, f"|V_tr(T) - V| = {err:.3g} (tol 1e-2)")
    assert ok


# --- 10 --------------------------------------------------------------------------

SIGNED = VelocityModel(1.0, "deterministic", Periodic((1.0, -1.0)), signed=True)


def test_c10_signed_window_drift():
    cfg = generate(InitSpec("uniform", 100.0, 0.0, 2.0, phase=0.1))
    windows = [(0.0, 10.0), (13.3, 41.7), (50.0, 99.0)]
    mon = WindowDriftMonitor(windows, 2)
    evolve(cfg, SIGNED, WB, 10_000, [mon])
    res = mon.result()
    ok = record(10, "window drift <= 2", res.passed, f"violations = {res.violations}")
    assert ok


def test_c10_signed_velocity():
    cfg = generate(InitSpec("uniform", 100.0, 0.0, 2.0))
    V = evolve(cfg, SIGNED, WB, 10_000).mean_velocity()
    err = abs(V - (-0.25))
    ok = record(10, "V = -0.25", err <= 1e-3, f"measured V = {V:.6g}, |V + 0.25| = {err:.3g} (tol 1e-3)")
    assert ok


# --- 11 --------------------------------------------------------------------------

CASES = 10_000


def test_c11_oracle_equivalence():
    mismatches = {}
    for kind in Normalization:
        rng = np.random.default_rng(31 + list(Normalization).index(kind))
        bad = 0
        for _ in range(CASES):
            pos, r, L, vs = _continuum_case(rng, kind)
            cfg = from_positions(pos, r, L)
            for row in vs:
                cfg, _ = advance(cfg, row, kind)
            want = oracle_run([Fraction(p) for p in pos.tolist()],
                              [[Fraction(v) for v in row] for row in vs.tolist()],
                              Fraction(L), Fraction(r), kind.value)
            bad += int(np.max(np.abs(cfg.lifted - np.array([float(w) for w in want]))) > 1e-12)
        mismatches[f"{kind.value}/continuum"] = bad
    for kind in LATTICE_KINDS:
        rng = np.random.default_rng(61 + list(Normalization).index(kind))
        bad = 0
        for _ in range(CASES):
            pos, r, L, vs = _lattice_case(rng, kind)
            cfg = from_positions(pos, r, L, lattice=True)
            for row in vs:
                cfg, _ = advance(cfg, row, kind)
            bad += int(cfg.lifted.tolist() != oracle_run(pos.tolist(), vs.tolist(), L, r, kind.value))
        mismatches[f"{kind.value}/lattice"] = bad
    total = sum(mismatches.values())
    detail = ", ".join(f"{k}: {v}" for k, v in mismatches.items())
    ok = record(11, f"{CASES} cases per kind", total == 0, f"mismatches {detail}")
    assert ok


# --- 12 --------------------------------------------------------------------------

def test_c12_ns_collapse():
    equal = 0
    total = 0
    for kind in (W, S):
        for a in (1.0, 1.5, 4.0):
            for seed in SEEDS3:
                cfg = _random(100.0, 0.8, seed)
                base = evolve(cfg, constant_model(1.0), kind, 500)
                traj, _ = ns_evolve(cfg, NSParams(1.0, a), kind, 500)
                equal += int(np.array_equal(base.end.lifted, traj.end.lifted)
                             and np.array_equal(base.mean_disp, traj.mean_disp))
                total += 1
    ok = record(12, "a >= v bitwise equal", equal == total, f"{equal}/{total} runs identical")
    assert ok


def test_c12_ns_pair_distance():
    a = 0.25
    worst, improper = 0.0, 0
    for seed in SEEDS3:
        run = run_coupled_ns(_random(100.0, 0.8, seed, 0), _random(100.0, 0.8, seed, 1),
                             NSParams(1.0, a), W, 500)
        w = run.max_pair_dist[~np.isnan(run.max_pair_dist)]
        worst = max(worst, float(w.max(initial=0.0)))
        improper += len(run.improper_steps)
    bound = 1.0 / a
    ok = worst <= bound and improper == 0
    record(12, "coupled NS, a = v/4", ok, f"max |W| = {worst:.4g} (bound v^2/a = {bound:g}), improper = {improper}")
    assert ok


# --- soft diagnostic ----------------------------------------------------------------

def test_soft_iid_spread_diagnostic():
    model = VelocityModel(1.0, "iid", Uniform(0.0, 1.0))
    diags = [iid_spread(W, model, 1.0, 100.0, 1000, 10_000, seed) for seed in SEEDS5]
    shrank = sum(d.shrank for d in diags)
    detail = ", ".join(f"{d.diff_short:.2g}->{d.diff_long:.2g}" for d in diags)
    record("13", "soft: iid spread (non-gating)", shrank >= 4, f"shrank in {shrank}/5 seeds: {detail}")
    # reported only; this check never fails the suite
