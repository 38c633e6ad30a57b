"""Built-in fixture suite behind ``exclusim verify``.

Each fixture is small enough that the whole suite runs in a few seconds.
"""
from __future__ import annotations

from typing import Callable, List

import numpy as np

from .configuration import InitSpec, from_positions, generate
from .coupling import is_proper, run_coupled
from .dynamics import Normalization, evolve
from .monitors import CheckResult
from .ns import NSParams, ns_evolve
from .rng import INIT, generator
from .statistics import cluster_decompose, lattice_fd_check, simulate_two_gap
from .tracer import tracer_evolve, tracer_jump
from .velocity import constant_model

W = Normalization.WEAK_NONNEG


def _result(name: str, margin: float) -> CheckResult:
    return CheckResult(name, margin >= 0, float(margin), int(margin < 0), 1)


def _uniform(L, rho, lattice=False):
    r = 0.5 if lattice else 0.0
    return generate(InitSpec("uniform", L, r, rho, lattice=lattice))


def weak_uniform_speed() -> CheckResult:
    traj = evolve(_uniform(20.0, 0.5), constant_model(1.0), W, 50)
    return _result("weak_uniform_speed", 1e-12 - abs(traj.mean_velocity() - 1.0))


def strong_two_gap() -> CheckResult:
    run = simulate_two_gap(8.0, 4, 4, 1.0, 100)
    ok = run.classes_preserved and run.per_step_exact
    return _result("strong_two_gap_velocity", 0.0 if ok else -abs(run.V_measured - run.V_exact) - 1)


def lattice_exact() -> CheckResult:
    rows = lattice_fd_check(1, [0.5, 0.75], 40, 200, seed=0)
    ok = all(r.integral and r.float_path_integral for r in rows)
    err = max(r.abs_err for r in rows)
    return _result("lattice_integrality", (0.1 - err) if ok else -1.0)


def cluster_example() -> CheckResult:
    cl = cluster_decompose(np.array([0.5, 0.2, 2.0, 0.1, 3.0]), 1.0)
    got = [(c.start, c.length) for c in cl]
    return _result("cluster_decomposition", 0.0 if got == [(0, 3), (3, 2)] else -1.0)


def tracer_examples() -> CheckResult:
    cfg = from_positions([0.0, 3.0, 7.0], 0.0, 10.0)
    jumps = (tracer_jump(cfg, 1.0, "forward"), tracer_jump(cfg, 1.0, "backward"),
             tracer_jump(cfg, 8.0, "forward"))
    run = tracer_evolve(_uniform(20.0, 1.0), constant_model(0.5), W, "backward", 20)
    ok = jumps == (3.0, 0.0, 0.0) and np.allclose(run.V_tr, -0.5, atol=1e-12)
    return _result("tracer_jump_and_backward_speed", 0.0 if ok else -1.0)


def identical_replicas_pair() -> CheckResult:
    x = generate(InitSpec("random_admissible", 30.0, 0.0, 1.0), generator(3, INIT, 0))
    run = run_coupled(x, x, constant_model(1.0), W, 20)
    ok = run.pair_count[-1] == x.n and is_proper(run.final) and not run.improper_steps
    return _result("identical_replicas_fully_paired", 0.0 if ok else -1.0)


def ns_reduces_to_base() -> CheckResult:
    x = generate(InitSpec("random_admissible", 30.0, 0.0, 0.8), generator(4, INIT, 0))
    base = evolve(x, constant_model(1.0), W, 30)
    traj, _ = ns_evolve(x, NSParams(1.0, 1.0), W, 30)
    same = np.array_equal(base.end.lifted, traj.end.lifted)
    return _result("ns_large_acceleration_matches_base", 0.0 if same else -1.0)


FIXTURES: List[Callable[[], CheckResult]] = [
    weak_uniform_speed,
    strong_two_gap,
    lattice_exact,
    cluster_example,
    tracer_examples,
    identical_replicas_pair,
    ns_reduces_to_base,
]


def run_verify() -> List[CheckResult]:
    return [f() for f in FIXTURES]
