"""Continuum Nagel-Schreckenberg variant.

Every particle carries the velocity it actually moved with last step.  It
accelerates by ``a_i^t`` (capped at ``v``) and the result is normalized as
usual: ``w = min(v, u + a)``, ``u' = N(w, x)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import rng as _rng
from .configuration import RingConfiguration
from .coupling import NONE, CoupledRun, CoupledState, drive, init_coupled, resolve
from .dynamics import Normalization, Trajectory, advance
from .errors import InfeasibleSpec, SignViolation


@dataclass(frozen=True)
class NSParams:
    """Cap ``v`` and accelerations: constant ``a`` or i.i.d. uniform ``[a, a_max]``."""

    v: float
    a: float
    a_max: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.v <= 0 or self.a <= 0:
            raise InfeasibleSpec("NS needs v > 0 and a > 0")
        if self.a_max is not None and self.a_max < self.a:
            raise InfeasibleSpec("a_max must be >= a")

    def accelerations(self, t: int, n: int, stream: int = 0) -> np.ndarray:
        if self.a_max is None or self.a_max == self.a:
            return np.full(n, float(self.a))
        u = _rng.uniforms(self.seed, _rng.ACCEL, t, stream, n)
        return self.a + (self.a_max - self.a) * u


@dataclass(frozen=True)
class NSState:
    u: np.ndarray  # carried velocities, each in [0, v]
    t: int = 0


def _check_kind(kind: Normalization) -> None:
    if kind.signed:
        raise SignViolation("the NS variant is defined for nonnegative normalizations only")


def ns_proposal(params: NSParams, u: np.ndarray, acc: np.ndarray) -> np.ndarray:
    return np.minimum(params.v, u + acc)


def ns_step(config: RingConfiguration, state: NSState, params: NSParams,
            kind: Normalization, stream: int = 0) -> Tuple[RingConfiguration, NSState]:
    _check_kind(kind)
    acc = params.accelerations(state.t, config.n, stream)
    w = ns_proposal(params, state.u, acc)
    cfg, d = advance(config, w, kind)
    return cfg, NSState(np.asarray(d, dtype=float), state.t + 1)


def ns_evolve(config: RingConfiguration, params: NSParams, kind: Normalization, T: int,
              u0: Optional[np.ndarray] = None, stream: int = 0) -> Tuple[Trajectory, NSState]:
    """``T`` NS steps from carried velocities ``u0`` (default all zero)."""
    _check_kind(kind)
    if T < 1:
        raise ValueError("T must be >= 1")
    n = config.n
    u = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float)
    if np.any(u < 0) or np.any(u > params.v):
        raise InfeasibleSpec("carried velocities must lie in [0, v]")
    state = NSState(u)
    mean_disp = np.empty(T)
    gmax = np.empty(T + 1)
    gmin = np.empty(T + 1)
    gmax[0], gmin[0] = config.gaps.max(), config.gaps.min()
    cfg = config
    for s in range(T):
        cfg, state = ns_step(cfg, state, params, kind, stream)
        mean_disp[s] = state.u.mean()
        gmax[s + 1], gmin[s + 1] = cfg.gaps.max(), cfg.gaps.min()
    return Trajectory(config, cfg, kind, T, mean_disp, gmax, gmin), state


def run_coupled_ns(x: RingConfiguration, y: RingConfiguration, params: NSParams,
                   kind: Normalization, T: int, stream: int = 0,
                   check_every: int = 1) -> CoupledRun:
    """Coupled NS replicas; paired particles share their acceleration draw.

    Carried velocities belong to particles, not to pairs, and start at zero.
    """
    _check_kind(kind)
    n = x.n
    carried = {"x": np.zeros(n), "y": np.zeros(n)}

    def step(st: CoupledState) -> CoupledState:
        ax = params.accelerations(st.t, n, 2 * stream)
        ay = params.accelerations(st.t, n, 2 * stream + 1)
        paired = st.py != NONE
        ay[paired] = ax[np.mod(st.py[paired], n)]
        x2, dx = advance(st.x, ns_proposal(params, carried["x"], ax), kind)
        y2, dy = advance(st.y, ns_proposal(params, carried["y"], ay), kind)
        carried["x"], carried["y"] = np.asarray(dx, float), np.asarray(dy, float)
        return resolve(dataclasses.replace(st, x=x2, y=y2, t=st.t + 1))

    return drive(init_coupled(x, y, params.v), T, step, check_every)
