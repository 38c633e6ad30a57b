"""Synchronous exclusion dynamics.

All particles move at once from time-``t`` data.  A particle's desired
local velocity is turned into a feasible displacement by a normalization:

* weak, nonnegative: move as far as the gap allows;
* strong, nonnegative: a velocity that would overrun the gap is dropped;
* weak, signed (continuous meeting): conflicting particles stop where they
  would have met moving at constant speed in continuous time;
* strong, signed: any velocity producing a conflict is dropped.

With signed velocities a particle only tests the gap on the side it moves
towards; ``v == 0`` never conflicts.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .configuration import RingConfiguration
from .errors import NonLatticeInput, PostAdmissibilityFailure, SignViolation
from .velocity import VelocityModel, sample_step

# absolute slack for gap nonnegativity, as a fraction of L
STEP_SLACK = 1e-9


class Normalization(str, Enum):
    WEAK_NONNEG = "WeakNonneg"
    STRONG_NONNEG = "StrongNonneg"
    WEAK_BOTH_CONTINUOUS = "WeakBothContinuous"
    STRONG_BOTH = "StrongBoth"

    @property
    def signed(self) -> bool:
        return self in (Normalization.WEAK_BOTH_CONTINUOUS, Normalization.STRONG_BOTH)

    @property
    def weak(self) -> bool:
        return self in (Normalization.WEAK_NONNEG, Normalization.WEAK_BOTH_CONTINUOUS)


def _out(result, *inputs):
    if all(np.ndim(a) == 0 for a in inputs):
        return result.item()
    return result


def normalize_weak_nonneg(v, gap):
    return _out(np.minimum(v, gap), v, gap)


def normalize_strong_nonneg(v, gap):
    v = np.asarray(v)
    return _out(np.where(v <= gap, v, np.zeros_like(v)), v, gap)


def admissible_signed(gap, v_j, v_next):
    """True when gap ``j`` survives velocities ``v_j`` and ``v_{j+1}``."""
    need = np.maximum(np.maximum(v_j, -np.asarray(v_next)), np.asarray(v_j) - v_next)
    return _out(np.asarray(gap) >= need, gap, v_j, v_next)


def normalize_weak_both_continuous(v, gap_left, gap_right, v_left, v_right):
    """Continuous-meeting weak normalization for velocities of both signs.

    ``gap_left``/``v_left`` belong to the predecessor, ``gap_right``/``v_right``
    to the successor.
    """
    v, gl, gr, vl, vr = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (v, gap_left, gap_right, v_left, v_right))
    )
    out = v.copy()
    pos = v > 0
    neg = v < 0
    follow_r = pos & (vr >= 0) & (gr < v)
    headon_r = pos & (vr < 0) & (gr < v - vr)
    follow_l = neg & (vl <= 0) & (gl < -v)
    headon_l = neg & (vl > 0) & (gl < vl - v)
    out[follow_r] = gr[follow_r]
    out[follow_l] = -gl[follow_l]
    out[headon_r] = gr[headon_r] / (v[headon_r] - vr[headon_r]) * v[headon_r]
    out[headon_l] = gl[headon_l] / (vl[headon_l] - v[headon_l]) * v[headon_l]
    return _out(out, v, gl, gr, vl, vr)


def normalize_strong_both(v, gap_left, gap_right, v_left, v_right):
    v, gl, gr, vl, vr = np.broadcast_arrays(
        *(np.asarray(a) for a in (v, gap_left, gap_right, v_left, v_right))
    )
    right_bad = (v > 0) & ~np.asarray(admissible_signed(gr, v, vr))
    left_bad = (v < 0) & ~np.asarray(admissible_signed(gl, vl, v))
    out = np.where(right_bad | left_bad, np.zeros_like(v), v)
    return _out(out, v, gl, gr, vl, vr)


def displacements(kind: Normalization, gaps: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Normalized displacement of every particle on the ring."""
    if len(v) == 1:
        return v.copy()
    if kind is Normalization.WEAK_NONNEG:
        return np.minimum(v, gaps)
    if kind is Normalization.STRONG_NONNEG:
        return np.where(v <= gaps, v, np.zeros_like(v))
    gl = np.roll(gaps, 1)
    vl = np.roll(v, 1)
    vr = np.roll(v, -1)
    if kind is Normalization.STRONG_BOTH:
        return normalize_strong_both(v, gl, gaps, vl, vr)
    return normalize_weak_both_continuous(v, gl, gaps, vl, vr)


def _prepare_velocities(config: RingConfiguration, velocities, kind: Normalization) -> np.ndarray:
    v = np.asarray(velocities)
    if v.shape != (config.n,):
        raise ValueError(f"expected {config.n} velocities, got shape {v.shape}")
    if not kind.signed and np.any(v < 0):
        raise SignViolation(f"{kind.value} needs nonnegative velocities")
    if config.lattice:
        vi = np.round(v)
        if np.any(vi != v):
            raise NonLatticeInput("lattice runs need integer velocities")
        return vi.astype(np.int64)
    return v.astype(float, copy=False)


def advance(config: RingConfiguration, velocities, kind: Normalization):
    """One synchronous update; returns ``(new_config, displacement)``."""
    v = _prepare_velocities(config, velocities, kind)
    d = displacements(kind, config.gaps, v)
    if config.lattice and d.dtype.kind == "f":
        di = np.round(d)
        if np.any(di != d):
            raise NonLatticeInput("continuous meeting point left the lattice")
        d = di.astype(np.int64)
    if config.n == 1:
        new_gaps = config.gaps.copy()
    else:
        new_gaps = config.gaps - d + np.roll(d, -1)
    slack = 0 if config.lattice else STEP_SLACK * float(config.circumference)
    low = new_gaps.min()
    if low < -slack:
        raise PostAdmissibilityFailure(f"step produced gap {low!r}")
    if not config.lattice and low < 0:
        new_gaps = np.maximum(new_gaps, 0.0)
    return config.successor(d, new_gaps), d


def step(config: RingConfiguration, velocities, kind: Normalization) -> RingConfiguration:
    return advance(config, velocities, kind)[0]


@dataclass
class Trajectory:
    """Instrumented run of :func:`evolve`.

    ``cum_disp`` (shape ``(T+1, N)``) is only present when the run kept its
    history; ``mean_disp[t]`` is the particle-averaged displacement of step t.
    """

    start: RingConfiguration
    end: RingConfiguration
    kind: Normalization
    T: int
    mean_disp: np.ndarray
    gap_max: np.ndarray
    gap_min: np.ndarray
    cum_disp: Optional[np.ndarray] = None
    t0: int = 0

    def displacement(self, t: int) -> np.ndarray:
        """Unwrapped displacement of every particle after ``t`` steps."""
        if t == self.T:
            return self.end.unwrapped_disp - self.start.unwrapped_disp
        if t == 0:
            return np.zeros(self.start.n)
        if self.cum_disp is None:
            raise ValueError("intermediate times need evolve(..., keep_history=True)")
        return self.cum_disp[t]

    def gaps_at(self, t: int) -> np.ndarray:
        """Gap sequence after ``t`` steps, rebuilt from cumulative displacements."""
        if self.start.n == 1:
            return self.start.gaps.copy()
        d = self.displacement(t)
        return self.start.gaps - d + np.roll(d, -1)

    def positions_at(self, t: int) -> np.ndarray:
        return np.mod(self.start.lifted + self.displacement(t), self.start.circumference)

    def mean_velocity(self, burn_in: int = 0) -> float:
        """Particle-averaged velocity over steps ``[burn_in, T)``."""
        return float(np.mean(self.mean_disp[burn_in:]))


def average_velocity(trajectory: Trajectory, i: int, t: int) -> float:
    """``(x_i(t) - x_i(0)) / t`` from unwrapped displacements."""
    if not 1 <= t <= trajectory.T:
        raise ValueError(f"t must lie in [1, {trajectory.T}]")
    return float(trajectory.displacement(t)[i]) / t


class Recorder:
    """Hook invoked by :func:`evolve` at t = 0 and after every step."""

    def observe(self, t: int, config: RingConfiguration, displacement: Optional[np.ndarray]) -> None:
        raise NotImplementedError


def evolve(
    config: RingConfiguration,
    model: VelocityModel,
    kind: Normalization,
    T: int,
    recorders: Iterable[Recorder] = (),
    stream: int = 0,
    keep_history: bool = False,
    t0: int = 0,
) -> Trajectory:
    """Run ``T`` steps drawing velocities for times ``t0 .. t0+T-1``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    recorders = list(recorders)
    n = config.n
    mean_disp = np.empty(T)
    gap_max = np.empty(T + 1)
    gap_min = np.empty(T + 1)
    cum = np.zeros((T + 1, n), dtype=config.base.dtype) if keep_history else None
    gap_max[0] = config.gaps.max()
    gap_min[0] = config.gaps.min()
    for rec in recorders:
        rec.observe(0, config, None)
    start = config
    cfg = config
    deterministic = model.deterministic
    for s in range(T):
        t = t0 + s
        if deterministic:
            v = np.full(n, float(model.common_value(t)))
        else:
            v = sample_step(model, t, n, stream)
        cfg, d = advance(cfg, v, kind)
        mean_disp[s] = d.mean()
        gap_max[s + 1] = cfg.gaps.max()
        gap_min[s + 1] = cfg.gaps.min()
        if cum is not None:
            cum[s + 1] = cum[s] + d
        for rec in recorders:
            rec.observe(s + 1, cfg, d)
    return Trajectory(start, cfg, kind, T, mean_disp, gap_max, gap_min, cum, t0)
