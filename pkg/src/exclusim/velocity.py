"""Local-velocity fields.

Two settings are supported.  In the *deterministic-common* setting every
particle receives the same value ``v0(t)`` at time ``t`` (a constant, a
periodic list, or a logistic-map orbit).  In the *i.i.d.* setting values are
independent over particles and times, drawn from a bounded distribution.
All draws go through :mod:`exclusim.rng`, so they replay bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import rng as _rng
from .errors import InfeasibleSpec, WrongModelKind


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Periodic:
    values: tuple


@dataclass(frozen=True)
class LogisticMap:
    """Orbit of ``v0 -> cap * f(v0 / cap)`` with ``f(u) = 4u(1-u)``."""

    v0: float


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float


@dataclass(frozen=True)
class Discrete:
    values: tuple
    weights: tuple


SequenceSpec = Union[Constant, Periodic, LogisticMap]
DistributionSpec = Union[Constant, Uniform, Discrete]

DETERMINISTIC = "deterministic"
IID = "iid"


@dataclass(frozen=True)
class VelocityModel:
    cap: float
    kind: str
    source: Union[SequenceSpec, DistributionSpec]
    signed: bool = False
    seed: int = 0
    _orbit: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.cap <= 0:
            raise InfeasibleSpec("velocity cap must be positive")
        if self.kind == DETERMINISTIC:
            if not isinstance(self.source, (Constant, Periodic, LogisticMap)):
                raise InfeasibleSpec(f"{type(self.source).__name__} is not a sequence spec")
        elif self.kind == IID:
            if not isinstance(self.source, (Constant, Uniform, Discrete)):
                raise InfeasibleSpec(f"{type(self.source).__name__} is not a distribution spec")
        else:
            raise InfeasibleSpec(f"unknown velocity model kind {self.kind!r}")
        if isinstance(self.source, Periodic):
            object.__setattr__(self, "source", Periodic(tuple(self.source.values)))
            if not self.source.values:
                raise InfeasibleSpec("periodic sequence needs at least one value")
        if isinstance(self.source, Discrete):
            src = Discrete(tuple(self.source.values), tuple(self.source.weights))
            object.__setattr__(self, "source", src)
            w = np.asarray(src.weights, dtype=float)
            if len(src.values) != len(w) or len(w) == 0 or np.any(w < 0) or w.sum() <= 0:
                raise InfeasibleSpec("discrete weights must be nonnegative, same length, nonzero sum")
        if isinstance(self.source, Uniform) and self.source.high < self.source.low:
            raise InfeasibleSpec("uniform(low, high) needs low <= high")
        if isinstance(self.source, LogisticMap) and not 0.0 <= self.source.v0 <= self.cap:
            raise InfeasibleSpec("logistic map start must lie in [0, cap]")
        lo, hi = self.value_range()
        floor = -self.cap if self.signed else 0.0
        if lo < floor or hi > self.cap:
            raise InfeasibleSpec(
                f"velocity values [{lo}, {hi}] leave the admissible range [{floor}, {self.cap}]"
            )

    @property
    def deterministic(self) -> bool:
        return self.kind == DETERMINISTIC

    def value_range(self) -> tuple:
        s = self.source
        if isinstance(s, Constant):
            return s.value, s.value
        if isinstance(s, Periodic):
            return min(s.values), max(s.values)
        if isinstance(s, LogisticMap):
            return 0.0, self.cap
        if isinstance(s, Uniform):
            return s.low, s.high
        return min(s.values), max(s.values)

    def common_value(self, t: int) -> float:
        """``v0(t)`` of a deterministic-common model."""
        s = self.source
        if isinstance(s, Constant):
            return s.value
        if isinstance(s, Periodic):
            return s.values[t % len(s.values)]
        if isinstance(s, LogisticMap):
            orbit = self._orbit
            if not orbit:
                orbit.append(float(s.v0))
            while len(orbit) <= t:
                u = orbit[-1] / self.cap
                orbit.append(self.cap * (4.0 * u * (1.0 - u)))
            return orbit[t]
        raise WrongModelKind("common_value needs a deterministic model")

    def to_dict(self) -> dict:
        s = self.source
        src = {"type": type(s).__name__.lower()}
        if isinstance(s, Constant):
            src["value"] = s.value
        elif isinstance(s, Periodic):
            src["values"] = list(s.values)
        elif isinstance(s, LogisticMap):
            src["v0"] = s.v0
        elif isinstance(s, Uniform):
            src.update(low=s.low, high=s.high)
        else:
            src.update(values=list(s.values), weights=list(s.weights))
        return {"cap": self.cap, "kind": self.kind, "source": src,
                "signed": self.signed, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "VelocityModel":
        src = dict(d["source"])
        typ = src.pop("type")
        builders = {"constant": Constant, "periodic": Periodic, "logisticmap": LogisticMap,
                    "logistic_map": LogisticMap, "uniform": Uniform, "discrete": Discrete}
        if typ not in builders:
            raise InfeasibleSpec(f"unknown velocity source {typ!r}")
        if "values" in src:
            src["values"] = tuple(src["values"])
        if "weights" in src:
            src["weights"] = tuple(src["weights"])
        return cls(d["cap"], d["kind"], builders[typ](**src),
                   bool(d.get("signed", False)), int(d.get("seed", 0)))


def constant_model(v: float, seed: int = 0) -> VelocityModel:
    return VelocityModel(v, DETERMINISTIC, Constant(v), seed=seed)


def _draw(model: VelocityModel, u: np.ndarray) -> np.ndarray:
    s = model.source
    if isinstance(s, Constant):
        return np.full(u.shape, float(s.value))
    if isinstance(s, Uniform):
        return s.low + (s.high - s.low) * u
    values = np.asarray(s.values, dtype=float)
    cdf = np.cumsum(np.asarray(s.weights, dtype=float))
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    return values[np.minimum(idx, len(values) - 1)]


def sample_step(model: VelocityModel, t: int, n: int, stream: int = 0) -> np.ndarray:
    """The ``n`` local velocities at time ``t`` for ``stream``."""
    if model.deterministic:
        return np.full(n, float(model.common_value(t)))
    u = _rng.uniforms(model.seed, _rng.VELOCITY, t, stream, n)
    return _draw(model, u)


def capped_mean(model: VelocityModel, gamma: float, T: int, start: int = 0) -> float:
    """``(1/T) sum_{s<T} min(v0(s), gamma)``, optionally over ``[start, T)``."""
    if not model.deterministic:
        raise WrongModelKind("capped_mean needs a deterministic-common model")
    if gamma <= 0 or T < 1 or not 0 <= start < T:
        raise ValueError("need gamma > 0 and 0 <= start < T")
    vals = np.array([model.common_value(s) for s in range(start, T)], dtype=float)
    return float(np.minimum(vals, gamma).mean())


def symmetric_capped_mean(model: VelocityModel, gamma: float, T: int, start: int = 0) -> float:
    """Like :func:`capped_mean` but clipping both signs to ``[-gamma, gamma]``.

    This is the average displacement of a uniformly spaced configuration
    with spacing ``gamma`` under weak normalization when the common velocity
    may be negative: a particle never moves past its neighbour's old spot.
    """
    if not model.deterministic:
        raise WrongModelKind("symmetric_capped_mean needs a deterministic-common model")
    vals = np.array([model.common_value(s) for s in range(start, T)], dtype=float)
    return float(np.clip(vals, -gamma, gamma).mean())
