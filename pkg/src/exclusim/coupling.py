"""Dynamical coupling of two replicas of the same exclusion process.

Particles of the two replicas ``x`` and ``y`` are gradually matched into
pairs that share their velocity draws.  Unmatched particles are *defects*.
After every step the pairing is repaired:

1. x-triples (a pair plus an adjacent x-defect inside the pair's segment)
   are resolved, recursively, by handing the pair to the defect;
2. the same for y-triples;
3. the smallest d-pair (an x-defect and its closest y-defect closer than
   ``v``, with nothing in between) is turned into a pair, and the order is
   recomputed.

Geometry lives on the cover of the ring.  Index ``a`` of the *extended*
sequence denotes particle ``a mod N`` shifted by ``(a div N) * L``; pairs
are stored as maps from base indices to extended partner indices and are
kept index-monotone, so pairs never cross.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .configuration import RingConfiguration
from .dynamics import Normalization, advance
from .errors import CrossingDetected, MismatchedReplicas, RecursionBudgetExceeded
from .velocity import VelocityModel, sample_step

NONE = np.iinfo(np.int64).min
METRIC_COLUMNS = ("t", "rho_u", "pair_count", "max_pair_dist")


@dataclass(frozen=True)
class Triple:
    process: str  # "x" or "y"
    defect: int  # extended index in the defect's process
    paired_same: int  # extended index, same process, currently paired
    partner: int  # extended index in the other process

    @property
    def direction(self) -> int:
        return 1 if self.paired_same > self.defect else -1


@dataclass(frozen=True)
class DPair:
    i: int  # x base index
    j: int  # y extended index closest to x particle i
    distance: float


@dataclass
class ResolveStats:
    triple_resolutions: int = 0
    dpair_resolutions: int = 0
    direction_reversals: int = 0


@dataclass
class CoupledState:
    x: RingConfiguration
    y: RingConfiguration
    v: float
    px: np.ndarray  # y extended partner of each x base index, or NONE
    py: np.ndarray  # x extended partner of each y base index, or NONE
    t: int = 0
    stats: ResolveStats = field(default_factory=ResolveStats)

    @property
    def n(self) -> int:
        return self.x.n

    @property
    def L(self):
        return self.x.circumference

    def copy(self) -> "CoupledState":
        return dataclasses.replace(self, px=self.px.copy(), py=self.py.copy(),
                                   stats=ResolveStats())

    # extended-index geometry
    def X(self, a):
        a = np.asarray(a)
        q, i = np.divmod(a, self.n)
        return self.x.lifted[i] + q * self.L

    def Y(self, b):
        b = np.asarray(b)
        q, j = np.divmod(b, self.n)
        return self.y.lifted[j] + q * self.L

    def partner_x(self, a):
        """Extended y partner of extended x index ``a`` (NONE if unpaired)."""
        a = np.asarray(a)
        q, i = np.divmod(a, self.n)
        p = self.px[i]
        return np.where(p == NONE, NONE, p + q * self.n)

    def partner_y(self, b):
        b = np.asarray(b)
        q, j = np.divmod(b, self.n)
        p = self.py[j]
        return np.where(p == NONE, NONE, p + q * self.n)

    def x_defects(self) -> np.ndarray:
        return np.flatnonzero(self.px == NONE)

    def y_defects(self) -> np.ndarray:
        return np.flatnonzero(self.py == NONE)

    def pairs(self) -> List[Tuple[int, int]]:
        """``(x base index, y extended index)`` for every pair."""
        return [(int(i), int(self.px[i])) for i in np.flatnonzero(self.px != NONE)]

    def link(self, a: int, b: int) -> None:
        """Pair extended x index ``a`` with extended y index ``b`` (in place)."""
        n = self.n
        qa, i = divmod(int(a), n)
        qb, j = divmod(int(b), n)
        self.px[i] = b - qa * n
        self.py[j] = a - qb * n

    def unlink_x(self, a: int) -> None:
        i = int(a) % self.n
        self.px[i] = NONE

    def unlink_y(self, b: int) -> None:
        self.py[int(b) % self.n] = NONE


def init_coupled(x: RingConfiguration, y: RingConfiguration, v: float) -> CoupledState:
    """Unpaired coupled state; both lifts are re-anchored to ``[0, L)``."""
    if x.n != y.n or x.circumference != y.circumference or x.radius != y.radius \
            or x.lattice != y.lattice:
        raise MismatchedReplicas("replicas need equal N, L, r and storage mode")
    n = x.n
    return CoupledState(x.restart(), y.restart(), float(v),
                        np.full(n, NONE, dtype=np.int64), np.full(n, NONE, dtype=np.int64))


# --- crossing -----------------------------------------------------------------

def crossing_pairs(state: CoupledState) -> List[Tuple[Tuple[int, int], Tuple[int, int]]]:
    """Pairs whose connecting segments interleave strictly (periodic images included)."""
    base = state.pairs()
    if len(base) < 2:
        return []
    n = state.n
    ext = [(a + k * n, b + k * n) for k in (-1, 0, 1) for a, b in base]
    xs = state.X([a for a, _ in ext])
    ys = state.Y([b for _, b in ext])
    order = np.lexsort((ys, xs))
    found = []
    best_y, best_pair = -np.inf, None
    k = 0
    m = len(order)
    while k < m:
        k2 = k
        while k2 < m and xs[order[k2]] == xs[order[k]]:
            k2 += 1
        for idx in order[k:k2]:
            if ys[idx] < best_y:
                found.append((best_pair, ext[idx]))
        for idx in order[k:k2]:
            if ys[idx] > best_y:
                best_y, best_pair = ys[idx], ext[idx]
        k = k2
    return found


def has_crossing(state: CoupledState) -> bool:
    return bool(crossing_pairs(state))


# --- triples --------------------------------------------------------------------

def _triples_vec(state: CoupledState, process: str):
    """Vectorized triple search; returns arrays (defect, paired_same, partner)."""
    n = state.n
    if process == "x":
        defects = state.x_defects()
        own, other, partner = state.X, state.Y, state.partner_x
    else:
        defects = state.y_defects()
        own, other, partner = state.Y, state.X, state.partner_y
    if defects.size == 0 or defects.size == n:
        e = np.empty(0, dtype=np.int64)
        return e, e, e
    d = defects.astype(np.int64)
    pos = own(d)
    # right neighbour: other-process partner behind (or level with) the defect
    r_nb = d + 1
    r_pt = partner(r_nb)
    r_ok = r_pt != NONE
    r_pt_pos = np.where(r_ok, other(np.where(r_ok, r_pt, 0)), np.nan)
    right = r_ok & (r_pt_pos < own(r_nb)) & (r_pt_pos <= pos)
    # left neighbour: other-process partner ahead of (or level with) the defect
    l_nb = d - 1
    l_pt = partner(l_nb)
    l_ok = l_pt != NONE
    l_pt_pos = np.where(l_ok, other(np.where(l_ok, l_pt, 0)), np.nan)
    left = l_ok & (l_pt_pos > own(l_nb)) & (pos <= l_pt_pos) & ~right
    same = np.where(right, r_nb, l_nb)
    pt = np.where(right, r_pt, l_pt)
    sel = right | left
    return d[sel], same[sel], pt[sel]


def detect_triples(state: CoupledState, process: str = "x") -> List[Triple]:
    if process not in ("x", "y"):
        raise ValueError("process must be 'x' or 'y'")
    if has_crossing(state):
        raise CrossingDetected("triples are only defined without crossing pairs")
    d, s, p = _triples_vec(state, process)
    return [Triple(process, int(a), int(b), int(c)) for a, b, c in zip(d, s, p)]


def _resolve_triples(state: CoupledState, process: str, stats: ResolveStats) -> None:
    budget = 4 * state.n
    done = 0
    heading = {}  # base index of a moving defect -> direction of its last move
    while True:
        d, s, p = _triples_vec(state, process)
        if d.size == 0:
            return
        done += d.size
        if done > budget:
            raise RecursionBudgetExceeded(
                f"{process}-triple resolution exceeded {budget} steps"
            )
        for a, b, c in zip(d.tolist(), s.tolist(), p.tolist()):
            direction = 1 if b > a else -1
            prev = heading.pop(a % state.n, None)
            if prev is not None and prev != direction:
                stats.direction_reversals += 1
            heading[b % state.n] = direction
            if process == "x":
                state.unlink_x(b)
                state.link(a, c)
            else:
                state.unlink_y(b)
                state.link(c, a)
        stats.triple_resolutions += d.size


# --- d-pairs ------------------------------------------------------------------

def _sorted_ext(pos_mod: np.ndarray, L: float):
    order = np.argsort(pos_mod, kind="stable")
    p = pos_mod[order]
    ext = np.concatenate([p - L, p, p + L])
    idx = np.concatenate([order, order, order])
    return ext, idx


def _strictly_inside(ext: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    count = np.searchsorted(ext, hi, side="left") - np.searchsorted(ext, lo, side="right")
    return np.maximum(count, 0)


def _dpair_candidates(state: CoupledState) -> List[DPair]:
    xd = state.x_defects()
    yd = state.y_defects()
    if xd.size == 0 or yd.size == 0:
        return []
    n, L, v = state.n, float(state.L), state.v
    X = state.X(xd)
    Yb = state.Y(yd)
    xm = np.mod(X, L)
    ym = np.mod(Yb, L)
    y_ext, y_idx = _sorted_ext(ym, L)
    # closest y-defect image for every x-defect; tie -> smaller extended index
    k = np.searchsorted(y_ext, xm)
    cand = []
    for off in (-1, 0):
        kk = np.clip(k + off, 0, len(y_ext) - 1)
        cand.append(kk)
    # include equal-distance neighbours on both sides
    k_lo, k_hi = cand
    d_lo = np.abs(xm - y_ext[k_lo])
    d_hi = np.abs(xm - y_ext[k_hi])
    # extended indices of the two candidates in cover coordinates aligned with X
    def ext_index(kk):
        j = yd[y_idx[kk]]
        target = X + (y_ext[kk] - xm)
        q = np.round((target - state.y.lifted[j]) / L).astype(np.int64)
        return j + q * n
    b_lo, b_hi = ext_index(k_lo), ext_index(k_hi)
    pick_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (b_hi < b_lo))
    b = np.where(pick_hi, b_hi, b_lo)
    dist = np.where(pick_hi, d_hi, d_lo)
    ok = dist < v
    # nothing else in the open segment between the two defects
    x_ext, _ = _sorted_ext(xm, L)
    yb_pos = state.Y(b)
    lo = np.minimum(X, yb_pos)
    hi = np.maximum(X, yb_pos)
    shift = np.floor(lo / L) * L
    lo_m, hi_m = lo - shift, hi - shift
    inside = _strictly_inside(x_ext, lo_m, hi_m) + _strictly_inside(y_ext, lo_m, hi_m)
    ok &= inside == 0
    # index monotonicity with the neighbouring pairs (no crossing)
    paired = np.flatnonzero(state.px != NONE)
    if paired.size:
        pos_in = np.searchsorted(paired, xd)
        below = paired[(pos_in - 1) % paired.size]
        below_ext = np.where(below < xd, below, below - n)
        above = paired[pos_in % paired.size]
        above_ext = np.where(above > xd, above, above + n)
        b_below = state.partner_x(below_ext)
        b_above = state.partner_x(above_ext)
        ok &= (b_below < b) & (b < b_above)
    out = [DPair(int(i), int(j), float(dd)) for i, j, dd, good in zip(xd, b, dist, ok) if good]
    # one d-pair per y-defect: the closest x-defect, tie -> smaller index
    best = {}
    for dp in out:
        key = dp.j % n
        cur = best.get(key)
        if cur is None or (dp.distance, dp.i) < (cur.distance, cur.i):
            best[key] = dp
    return list(best.values())


def _dpair_key(dp: DPair, n: int):
    return (min(dp.i, n - dp.i), dp.i)


def detect_dpairs(state: CoupledState) -> List[DPair]:
    """Current d-pairs, smallest first (cyclic index distance from particle 0)."""
    return sorted(_dpair_candidates(state), key=lambda dp: _dpair_key(dp, state.n))


# --- resolution ---------------------------------------------------------------

def resolve(state: CoupledState) -> CoupledState:
    """Repair triples and d-pairs; returns a new, proper state."""
    out = state.copy()
    stats = out.stats
    rounds = 0
    while True:
        _resolve_triples(out, "x", stats)
        _resolve_triples(out, "y", stats)
        dps = detect_dpairs(out)
        if not dps:
            break
        dp = dps[0]
        out.link(dp.i, dp.j)
        stats.dpair_resolutions += 1
        rounds += 1
        if rounds > 4 * out.n:
            raise RecursionBudgetExceeded("d-pair resolution did not terminate")
    return out


def is_proper(state: CoupledState) -> bool:
    if has_crossing(state):
        return False
    for proc in ("x", "y"):
        if _triples_vec(state, proc)[0].size:
            return False
    return not _dpair_candidates(state)


# --- dynamics -----------------------------------------------------------------

def coupled_velocities(state: CoupledState, model: VelocityModel, stream: int = 0):
    """Velocity fields for both replicas at the state's time.

    Paired y particles copy the draw of their x partner; y-defects draw from
    an independent stream.
    """
    n, t = state.n, state.t
    if model.deterministic:
        v = np.full(n, float(model.common_value(t)))
        return v, v.copy()
    vx = sample_step(model, t, n, 2 * stream)
    vy = sample_step(model, t, n, 2 * stream + 1)
    paired = state.py != NONE
    vy[paired] = vx[np.mod(state.py[paired], n)]
    return vx, vy


def coupled_step(state: CoupledState, model: VelocityModel, kind: Normalization,
                 stream: int = 0) -> CoupledState:
    vx, vy = coupled_velocities(state, model, stream)
    x2, _ = advance(state.x, vx, kind)
    y2, _ = advance(state.y, vy, kind)
    nxt = dataclasses.replace(state, x=x2, y=y2, t=state.t + 1)
    return resolve(nxt)


@dataclass(frozen=True)
class CouplingMetrics:
    rho_u: float
    max_pair_dist: Optional[float]
    pair_count: int
    x_defects: int
    y_defects: int


def metrics(state: CoupledState) -> CouplingMetrics:
    paired = np.flatnonzero(state.px != NONE)
    if paired.size:
        w = np.abs(state.Y(state.px[paired]) - state.X(paired))
        max_w = float(w.max())
    else:
        max_w = None
    xd = state.n - paired.size
    yd = int(np.count_nonzero(state.py == NONE))
    return CouplingMetrics(xd / float(state.L), max_w, int(paired.size), xd, yd)


@dataclass
class CoupledRun:
    final: CoupledState
    t: np.ndarray
    rho_u: np.ndarray
    pair_count: np.ndarray
    max_pair_dist: np.ndarray  # NaN when there are no pairs
    improper_steps: List[int]
    pair_count_drops: List[int]
    direction_reversals: int
    x_disp: Optional[np.ndarray] = None
    y_disp: Optional[np.ndarray] = None

    def rows(self):
        for t, r, c, w in zip(self.t, self.rho_u, self.pair_count, self.max_pair_dist):
            yield {"t": int(t), "rho_u": float(r), "pair_count": int(c),
                   "max_pair_dist": None if np.isnan(w) else float(w)}


def drive(state: CoupledState, T: int, step_fn: Callable[[CoupledState], CoupledState],
          check_every: int = 1, keep_displacements: bool = False) -> CoupledRun:
    """Resolve ``state`` and apply ``step_fn`` ``T`` times, recording metrics.

    Properness is checked every ``check_every`` steps (0 disables it).
    """
    state = resolve(state)
    ts = np.arange(T + 1)
    rho_u = np.empty(T + 1)
    count = np.empty(T + 1, dtype=np.int64)
    maxw = np.empty(T + 1)
    improper, drops = [], []
    reversals = state.stats.direction_reversals
    xd = np.empty((T, state.n)) if keep_displacements else None
    yd = np.empty((T, state.n)) if keep_displacements else None

    def record(t, st):
        m = metrics(st)
        rho_u[t] = m.rho_u
        count[t] = m.pair_count
        maxw[t] = np.nan if m.max_pair_dist is None else m.max_pair_dist
        if check_every and t % check_every == 0 and not is_proper(st):
            improper.append(t)
        if t and count[t] < count[t - 1]:
            drops.append(t)

    record(0, state)
    for t in range(1, T + 1):
        prev = state
        state = step_fn(state)
        reversals += state.stats.direction_reversals
        if keep_displacements:
            xd[t - 1] = state.x.unwrapped_disp - prev.x.unwrapped_disp
            yd[t - 1] = state.y.unwrapped_disp - prev.y.unwrapped_disp
        record(t, state)
    return CoupledRun(state, ts, rho_u, count, maxw, improper, drops, reversals, xd, yd)


def run_coupled(x: RingConfiguration, y: RingConfiguration, model: VelocityModel,
                kind: Normalization, T: int, stream: int = 0, check_every: int = 1,
                keep_displacements: bool = False) -> CoupledRun:
    """Couple from an unpaired start, resolve at t = 0, then take ``T`` steps."""
    return drive(init_coupled(x, y, model.cap), T,
                 lambda st: coupled_step(st, model, kind, stream),
                 check_every, keep_displacements)
