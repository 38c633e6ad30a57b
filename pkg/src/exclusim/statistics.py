"""Fundamental diagrams, clusters, hysteresis scans and conservation checks."""
from __future__ import annotations

import csv
import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import rng as _rng
from .configuration import (
    InitSpec,
    RingConfiguration,
    from_gaps,
    generate,
    particle_count,
    spread_large_gaps,
)
from .dynamics import Normalization, Trajectory, evolve
from .errors import InfeasibleGrid, InfeasibleSpec, NonLatticeInput
from .monitors import GapClassMonitor, IntegralityMonitor
from .velocity import (
    Constant,
    VelocityModel,
    capped_mean,
    constant_model,
    symmetric_capped_mean,
)

FD_COLUMNS = ("kind", "rho", "L", "T", "seed", "V_measured", "V_theory", "abs_err", "in_region")


# --- fundamental diagram ----------------------------------------------------

@dataclass
class FDPoint:
    kind: str
    rho: float
    L: float
    T: int
    seed: int
    V_measured: float
    V_theory: Optional[float] = None
    in_region: Optional[bool] = None
    gap0_max: Optional[float] = None  # largest initial gap, for error bounds

    @property
    def abs_err(self) -> Optional[float]:
        if self.V_theory is None:
            return None
        return abs(self.V_measured - self.V_theory)

    def row(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("gap0_max")
        d["abs_err"] = self.abs_err
        return d


@dataclass(frozen=True)
class HysteresisRegion:
    """Realizable strong-normalization velocities: ``max(1/rho - v, 0) <= V <= min(1/rho, v)``."""

    v: float

    def bounds(self, rho: float) -> Tuple[float, float]:
        return max(1.0 / rho - self.v, 0.0), min(1.0 / rho, self.v)

    def contains(self, rho: float, V: float, tol: float = 0.0) -> bool:
        lo, hi = self.bounds(rho)
        return lo - tol <= V <= hi + tol

    def nonempty_gap(self, rho: float) -> bool:
        """True when the region has positive height (``rho > 1/(2v)``)."""
        lo, hi = self.bounds(rho)
        return hi > lo


def weak_theory(model: VelocityModel, rho: float, T: int, burn_in: int = 0, r: float = 0.0) -> float:
    """Limit velocity of weak deterministic-common dynamics at density ``rho``.

    The relevant cap is the mean gap ``1/rho - 2r``; for signed models the
    cap acts on both signs.
    """
    gamma = 1.0 / rho - 2.0 * r
    if model.signed:
        return symmetric_capped_mean(model, gamma, T, burn_in)
    return capped_mean(model, gamma, T, burn_in)


def _default_burn_in(T: int) -> int:
    return T // 2


def _fd_cell(args) -> FDPoint:
    kind, model, rho, L, T, init_kind, seed, r, burn_in = args
    kind = Normalization(kind)
    n = particle_count(rho, L)
    model = dataclasses.replace(model, seed=seed)
    if init_kind == "uniform":
        spec = InitSpec("uniform", L, r, rho=rho)
        cfg = generate(spec)
    else:
        spec = InitSpec("random_admissible", L, r, rho=rho, seed=seed)
        cfg = generate(spec, _rng.generator(seed, _rng.INIT, n))
    traj = evolve(cfg, model, kind, T)
    V = traj.mean_velocity(burn_in)
    theory = None
    in_region = None
    if model.deterministic and kind.weak:
        theory = weak_theory(model, rho, T, burn_in, r)
    elif model.deterministic and isinstance(model.source, Constant):
        v = model.source.value
        region = HysteresisRegion(v)
        if rho < 1.0 / (2 * v):
            theory = v
        else:
            in_region = region.contains(rho, V, v / (rho * L) + 2 * v / T)
    return FDPoint(kind.value, rho, L, T, seed, V, theory, in_region, float(cfg.gaps.max()))


def fd_sweep(
    kind: Normalization,
    model: VelocityModel,
    rho_grid: Sequence[float],
    L,
    T: int,
    init_family: str = "random_admissible",
    seeds: Sequence[int] = (0,),
    r: float = 0.0,
    burn_in: Optional[int] = None,
    workers: int = 1,
) -> List[FDPoint]:
    """One :class:`FDPoint` per ``(rho, seed)``, ordered by that key.

    Velocities are averaged over steps ``[burn_in, T)`` (default ``T // 2``).
    Weak deterministic points carry the capped-mean prediction.
    """
    if T < 1:
        raise InfeasibleGrid("T must be >= 1")
    if init_family not in ("uniform", "random_admissible"):
        raise InfeasibleGrid(f"unsupported init family {init_family!r}")
    for rho in rho_grid:
        try:
            particle_count(rho, L)
        except InfeasibleSpec as exc:
            raise InfeasibleGrid(f"rho={rho}: {exc}") from None
    b = _default_burn_in(T) if burn_in is None else burn_in
    cells = [
        (Normalization(kind).value, model, float(rho), L, T, init_family, int(seed), r, b)
        for rho in sorted(rho_grid)
        for seed in sorted(seeds)
    ]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_fd_cell, cells))
    return [_fd_cell(c) for c in cells]


def _csv_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_csv_value(row.get(c)) for c in columns])


def write_fd_csv(path, points: Iterable[FDPoint]) -> None:
    write_csv(path, FD_COLUMNS, (p.row() for p in points))


# --- lattice embedding ------------------------------------------------------

@dataclass
class LatticeRow:
    v: int
    rho: float
    V_measured: float
    V_theory: float
    integral: bool
    float_path_integral: bool

    @property
    def abs_err(self) -> float:
        return abs(self.V_measured - self.V_theory)


def lattice_theory(v: int, rho: float) -> float:
    """Lattice velocity: ``v`` when ``rho <= 1/(v+1)``, else ``1/rho - 1``."""
    return float(v) if rho <= 1.0 / (v + 1) else 1.0 / rho - 1.0


def lattice_fd_check(
    v: int,
    rho_grid: Sequence[float],
    L: int,
    T: int,
    seed: int = 0,
    burn_in: Optional[int] = None,
) -> List[LatticeRow]:
    """Weak deterministic runs on the integer lattice (unit-diameter particles).

    Each density is run twice from the same random site subset: once with
    exact integer storage and once in floating point, where every center is
    checked to stay an integer after every step.
    """
    if float(v) != int(v) or v < 1 or float(L) != int(L):
        raise NonLatticeInput("lattice check needs integer v >= 1 and integer L")
    v, L = int(v), int(L)
    b = _default_burn_in(T) if burn_in is None else burn_in
    model = constant_model(float(v), seed)
    rows = []
    for rho in rho_grid:
        try:
            n = particle_count(rho, L)
        except InfeasibleSpec as exc:
            raise InfeasibleGrid(str(exc)) from None
        spec = InitSpec("random_admissible", L, 0.5, rho=rho, seed=seed, lattice=True)
        exact = generate(spec, _rng.generator(seed, _rng.INIT, n))
        approx = RingConfiguration(float(L), 0.5, exact.base.astype(float),
                                   np.zeros(n), exact.gaps.astype(float), False)
        mon_exact, mon_float = IntegralityMonitor(), IntegralityMonitor()
        traj = evolve(exact, model, Normalization.WEAK_NONNEG, T, [mon_exact])
        evolve(approx, model, Normalization.WEAK_NONNEG, T, [mon_float])
        rows.append(LatticeRow(v, float(rho), traj.mean_velocity(b), lattice_theory(v, rho),
                               mon_exact.result().passed, mon_float.result().passed))
    return rows


# --- clusters -----------------------------------------------------------------

@dataclass(frozen=True)
class Cluster:
    start: int
    length: int
    gaps: tuple


def _gap_array(config_or_gaps) -> np.ndarray:
    if isinstance(config_or_gaps, RingConfiguration):
        return np.asarray(config_or_gaps.gaps)
    return np.asarray(config_or_gaps)


def cluster_decompose(config_or_gaps, v: float) -> List[Cluster]:
    """Split the ring into maximal runs linked by gaps ``< v``.

    Without any separating gap the whole ring is one cluster starting at 0.
    """
    g = _gap_array(config_or_gaps)
    n = len(g)
    seps = np.flatnonzero(g >= v)
    if len(seps) == 0:
        return [Cluster(0, n, tuple(g.tolist()))]
    out = []
    for k, s in enumerate(seps):
        nxt = seps[(k + 1) % len(seps)]
        length = (nxt - s) % n or n
        start = (s + 1) % n
        internal = tuple(g[(start + j) % n].item() for j in range(length - 1))
        out.append(Cluster(int(start), int(length), internal))
    out.sort(key=lambda c: c.start)
    return out


def max_cluster_length(config_or_gaps, v: float) -> int:
    g = _gap_array(config_or_gaps)
    seps = np.flatnonzero(g >= v)
    if len(seps) == 0:
        return len(g)
    runs = np.diff(np.append(seps, seps[0] + len(g)))
    return int(runs.max())


@dataclass
class ClusterLengthReport:
    series: List[int]
    increases: List[int]

    @property
    def monotone(self) -> bool:
        return not self.increases


def cluster_length_monitor(trajectory: Trajectory, v: float) -> ClusterLengthReport:
    """Max cluster length at each ``t``; steps where it grew are findings."""
    series = [max_cluster_length(trajectory.gaps_at(t), v) for t in range(trajectory.T + 1)]
    inc = [t for t in range(1, len(series)) if series[t] > series[t - 1]]
    return ClusterLengthReport(series, inc)


# --- X(L, m, n) families ------------------------------------------------------

def two_gap_family(L, m: int, n: int, v: float, r: float = 0.0) -> Tuple[float, float]:
    """Pick ``(g_small, g_large)`` with ``0 <= g_small < v <= g_large < 2v``.

    ``m`` gaps are small and ``n`` large, closing a ring of length ``L``.
    Among feasible choices the large gap is the midpoint of its interval.
    """
    if m < 0 or n < 0 or m + n < 1:
        raise InfeasibleSpec("need m, n >= 0 and m + n >= 1")
    free = float(L) - 2.0 * r * (m + n)
    if n == 0:
        g = free / m
        if not 0 <= g < v:
            raise InfeasibleSpec(f"all-small family needs free length / m < v (got {g})")
        return g, float(v)  # no large gaps; placeholder value
    if m == 0:
        g = free / n
        if not v <= g < 2 * v:
            raise InfeasibleSpec(f"all-large family needs v <= free / n < 2v (got {g})")
        return 0.0, g
    lo_strict = (free - m * v) / n  # g_large must exceed this so g_small < v
    lo = max(v, lo_strict)
    hi_cap = 2 * v  # exclusive
    hi_fill = free / n  # inclusive (g_small >= 0)
    hi = min(hi_cap, hi_fill)
    if hi < lo or (hi == lo and (lo == lo_strict or hi == hi_cap)):
        raise InfeasibleSpec(f"no gaps realize X(L={L}, m={m}, n={n}) at v={v}")
    g_large = lo if hi == lo else 0.5 * (lo + hi)
    g_small = (free - n * g_large) / m
    return g_small, g_large


def two_gap_velocity(L, m: int, n: int, v: float, g_small=None, g_large=None, r: float = 0.0) -> float:
    """Exact average velocity ``n v / (m + n)`` of an X(L, m, n) configuration."""
    if g_small is None or g_large is None:
        two_gap_family(L, m, n, v, r)
    else:
        if m > 0 and not 0 <= g_small < v:
            raise InfeasibleSpec("g_small must lie in [0, v)")
        if n > 0 and not v <= g_large < 2 * v:
            raise InfeasibleSpec("g_large must lie in [v, 2v)")
        free = float(L) - 2.0 * r * (m + n)
        if abs(m * g_small + n * g_large - free) > 1e-9 * max(1.0, float(L)):
            raise InfeasibleSpec("gaps do not close the ring")
    return n * v / (m + n)


def two_gap_config(L, m: int, n: int, v: float, r: float = 0.0,
                   g_small=None, g_large=None) -> RingConfiguration:
    if g_small is None or g_large is None:
        g_small, g_large = two_gap_family(L, m, n, v, r)
    gaps = np.where(spread_large_gaps(m, n), g_large, g_small).astype(float)
    cfg = from_gaps(gaps, r)
    return RingConfiguration(float(L), cfg.radius, cfg.base, cfg.unwrapped_disp, cfg.gaps, False)


@dataclass
class TwoGapRun:
    m: int
    n: int
    V_exact: float
    V_measured: float
    classes_preserved: bool
    per_step_exact: bool


def simulate_two_gap(L, m: int, n: int, v: float, T: int, r: float = 0.0,
                     g_small=None, g_large=None) -> TwoGapRun:
    """Strong deterministic run from X(L, m, n), checking the gap classes."""
    if g_small is None or g_large is None:
        g_small, g_large = two_gap_family(L, m, n, v, r)
    exact = two_gap_velocity(L, m, n, v, g_small, g_large, r)
    cfg = two_gap_config(L, m, n, v, r, g_small, g_large)
    mon = GapClassMonitor(v, m, n)
    traj = evolve(cfg, constant_model(v), Normalization.STRONG_NONNEG, T, [mon])
    per_step = bool(np.all(np.abs(traj.mean_disp - exact) <= 1e-12 * max(1.0, v)))
    return TwoGapRun(m, n, exact, traj.mean_velocity(), mon.result().passed, per_step)


@dataclass
class HysteresisPoint:
    rho: float
    m: int
    n: int
    V_measured: float
    V_exact: float
    in_region: bool


def feasible_families(L, rho: float, v: float, r: float = 0.0) -> List[Tuple[int, int]]:
    N = particle_count(rho, L)
    out = []
    for n in range(N + 1):
        try:
            two_gap_family(L, N - n, n, v, r)
        except InfeasibleSpec:
            continue
        out.append((N - n, n))
    return out


def pick_families(L, rho: float, v: float, count: int) -> List[Tuple[int, int]]:
    """``count`` feasible families spread evenly over the feasible range."""
    fams = feasible_families(L, rho, v)
    if len(fams) <= count:
        return fams
    idx = np.unique(np.round(np.linspace(0, len(fams) - 1, count)).astype(int))
    return [fams[i] for i in idx]


def hysteresis_scan(v: float, rho: float, L, T: int,
                    family_grid: Optional[Sequence[Tuple[int, int]]] = None,
                    tol: Optional[float] = None) -> List[HysteresisPoint]:
    """Strong deterministic runs over X(L, m, n) families at density ``rho``.

    Membership uses tolerance ``v / (rho L) + 2v / T`` unless ``tol`` is given.
    """
    fams = feasible_families(L, rho, v) if family_grid is None else list(family_grid)
    region = HysteresisRegion(v)
    tol = v / (rho * float(L)) + 2 * v / T if tol is None else tol
    pts = []
    for m, n in fams:
        run = simulate_two_gap(L, m, n, v, T)
        pts.append(HysteresisPoint(rho, m, n, run.V_measured, run.V_exact,
                                   region.contains(rho, run.V_measured, tol)))
    return pts


def scan_summary(points: Sequence[HysteresisPoint]) -> dict:
    by_rho = {}
    for p in points:
        lo, hi = by_rho.get(p.rho, (np.inf, -np.inf))
        by_rho[p.rho] = (min(lo, p.V_measured), max(hi, p.V_measured))
    return by_rho


# --- conservation checks ------------------------------------------------------

def density_drift_check(trajectory: Trajectory, windows: Sequence[Tuple[float, float]]) -> int:
    """Largest per-step change of any window's particle count (needs history)."""
    L = trajectory.start.circumference
    worst = 0
    prev = None
    for t in range(trajectory.T + 1):
        x = trajectory.positions_at(t)
        counts = np.array([
            x.size if b - a >= L else int(np.count_nonzero(np.mod(x - a, L) <= b - a))
            for a, b in windows
        ])
        if prev is not None:
            worst = max(worst, int(np.max(np.abs(counts - prev))))
        prev = counts
    return worst


@dataclass
class GapDecayReport:
    applicable: bool
    t_star: Optional[int]
    hypothesis_failures: List[int]

    @property
    def status(self) -> str:
        if not self.applicable:
            return "not applicable"
        return "decayed" if self.t_star is not None else "not decayed"


def strong_max_gap_decay(trajectory: Trajectory, v: float) -> GapDecayReport:
    """First ``t*`` after which every gap stays below ``2v`` for the whole run.

    The guarantee needs some gap ``< v`` at every step; steps where none
    exists are listed in ``hypothesis_failures``.
    """
    g0 = trajectory.gaps_at(0)
    if np.all(g0 < 2 * v):
        return GapDecayReport(True, 0, [])
    failures = []
    below = []
    for t in range(trajectory.T + 1):
        g = trajectory.gaps_at(t)
        if not np.any(g < v):
            failures.append(t)
        below.append(bool(np.all(g < 2 * v)))
    if 0 in failures:
        return GapDecayReport(False, None, failures)
    t_star = None
    for t in range(len(below) - 1, -1, -1):
        if not below[t]:
            break
        t_star = t
    return GapDecayReport(True, t_star, failures)


# --- random-setting diagnostic ------------------------------------------------

@dataclass
class SpreadDiagnostic:
    seed: int
    diff_short: float
    diff_long: float

    @property
    def shrank(self) -> bool:
        return self.diff_long < self.diff_short


def iid_spread(kind: Normalization, model: VelocityModel, rho: float, L,
               T_short: int, T_long: int, seed: int) -> SpreadDiagnostic:
    """|V_1 - V_2| for two independent replicas at equal density.

    Both replicas start from independent random configurations and use
    independent velocity streams.  This is a diagnostic only.
    """
    n = particle_count(rho, L)
    m = dataclasses.replace(model, seed=seed)
    runs = []
    for stream in (0, 1):
        cfg = generate(InitSpec("random_admissible", L, 0.0, rho=rho),
                       _rng.generator(seed, _rng.INIT, 2 * n + stream))
        traj = evolve(cfg, m, kind, T_long, stream=stream)
        runs.append(traj.mean_disp)
    short = abs(runs[0][:T_short].mean() - runs[1][:T_short].mean())
    long = abs(runs[0].mean() - runs[1].mean())
    return SpreadDiagnostic(seed, float(short), float(long))
