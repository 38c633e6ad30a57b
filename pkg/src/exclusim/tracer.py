"""Passive tracer hopping between particles of the flow.

A forward tracer always hops to the nearest particle ahead, a backward one
to the nearest particle behind.  During a run the tracer sits on a particle
``a`` (an extended index, see :mod:`exclusim.coupling`).  Each step the
flow moves first; the tracer then hops from its old spot to the nearest
particle of the new configuration in its direction.  Ties between a
particle and the spot are broken by index, so a particle that lands
exactly on the tracer's spot counts as behind it when it came from behind.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .configuration import RingConfiguration
from .dynamics import Normalization, Trajectory, advance
from .errors import DegenerateOrdering
from .velocity import VelocityModel, sample_step

FORWARD = "forward"
BACKWARD = "backward"
TRACER_COLUMNS = ("t", "y_unwrapped", "V_tr", "encounters")
# positions closer than this fraction of L count as coincident when hopping
HOP_TOL = 1e-9


def _check_direction(direction: str) -> None:
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")


def _check_strict(config: RingConfiguration) -> None:
    if np.any(config.gaps + config.diameter <= 0):
        raise DegenerateOrdering("coincident particles: the tracer jump is ill-defined")


def tracer_jump(config: RingConfiguration, y: float, direction: str) -> float:
    """Nearest particle center strictly ahead of (or behind) ``y``, cyclically."""
    _check_direction(direction)
    _check_strict(config)
    L = config.circumference
    x = np.sort(config.positions)
    y = float(np.mod(y, L))
    if direction == FORWARD:
        k = np.searchsorted(x, y, side="right")
        return float(x[k % len(x)])
    k = np.searchsorted(x, y, side="left") - 1
    return float(x[k])  # k = -1 wraps to the last center


@dataclass
class TracerState:
    position: float  # in [0, L)
    direction: str
    displacement: float  # unwrapped, since t = 0
    encounters: int
    particle: int  # extended index of the particle carrying the tracer


def _X(config: RingConfiguration, a: int) -> float:
    q, i = divmod(a, config.n)
    return float(config.lifted[i]) + q * float(config.circumference)


def _before(config: RingConfiguration, b: int, y: float, a: int, eps: float) -> bool:
    """``(X(b), b) < (y, a)``, with positions closer than ``eps`` counted as equal."""
    xb = _X(config, b)
    if abs(xb - y) <= eps:
        return b < a
    return xb < y


def _hop(config: RingConfiguration, y: float, a: int, direction: str) -> int:
    """Index of the nearest particle after (forward) or before ``(y, a)``."""
    eps = HOP_TOL * float(config.circumference)
    b = a
    if direction == FORWARD:
        def after(k):
            same = k == a and abs(_X(config, k) - y) <= eps
            return not same and not _before(config, k, y, a, eps)

        # smallest b with (X(b), b) > (y, a)
        while after(b - 1):
            b -= 1
        while not after(b):
            b += 1
        return b
    # largest b with (X(b), b) < (y, a)
    while _before(config, b, y, a, eps):
        b += 1
    b -= 1
    while not _before(config, b, y, a, eps):
        b -= 1
    return b


@dataclass
class TracerRun:
    trajectory: Trajectory
    y_unwrapped: np.ndarray  # (T+1,)
    V_tr: np.ndarray  # (T,), entry t-1 is the value at time t
    V_flow: np.ndarray  # particle-averaged flow velocity at time t
    encounters: np.ndarray  # (T+1,)
    final: TracerState

    def rows(self):
        yield {"t": 0, "y_unwrapped": float(self.y_unwrapped[0]), "V_tr": None,
               "encounters": int(self.encounters[0])}
        for t in range(1, len(self.y_unwrapped)):
            yield {"t": t, "y_unwrapped": float(self.y_unwrapped[t]),
                   "V_tr": float(self.V_tr[t - 1]), "encounters": int(self.encounters[t])}


def tracer_evolve(
    config: RingConfiguration,
    model: VelocityModel,
    kind: Normalization,
    direction: str,
    T: int,
    start_particle: int = 0,
    y0: Optional[float] = None,
    stream: int = 0,
) -> TracerRun:
    """Run the flow and the tracer together for ``T`` steps.

    The tracer starts on particle ``start_particle``, or, if ``y0`` is given,
    on the particle reached by one jump from ``y0``; that landing point is
    the reference position for ``V_tr``.
    """
    _check_direction(direction)
    _check_strict(config)
    if T < 1:
        raise ValueError("T must be >= 1")
    cfg = config.restart()
    n = cfg.n
    if y0 is not None:
        target = tracer_jump(cfg, y0, direction)
        a = int(np.flatnonzero(cfg.positions == target)[0])
    else:
        a = int(start_particle) % n
    y = _X(cfg, a)
    ys = np.empty(T + 1)
    enc = np.zeros(T + 1, dtype=np.int64)
    vflow = np.empty(T)
    ys[0] = y
    mean_disp = np.empty(T)
    gmax = np.empty(T + 1)
    gmin = np.empty(T + 1)
    gmax[0], gmin[0] = cfg.gaps.max(), cfg.gaps.min()
    start = cfg
    total = 0.0
    for s in range(T):
        v = sample_step(model, s, n, stream)
        cfg, d = advance(cfg, v, kind)
        b = _hop(cfg, y, a, direction)
        enc[s + 1] = enc[s] + abs(b - a)
        a = b
        y = _X(cfg, a)
        ys[s + 1] = y
        mean_disp[s] = d.mean()
        total += mean_disp[s]
        vflow[s] = total / (s + 1)
        gmax[s + 1], gmin[s + 1] = cfg.gaps.max(), cfg.gaps.min()
    t = np.arange(1, T + 1)
    v_tr = (ys[1:] - ys[0]) / t
    traj = Trajectory(start, cfg, kind, T, mean_disp, gmax, gmin)
    L = cfg.circumference
    final = TracerState(float(np.mod(y, L)), direction, float(y - ys[0]), int(enc[-1]), a)
    return TracerRun(traj, ys, v_tr, vflow, enc, final)
