"""Admissible particle configurations on a periodic ring.

Particles are balls of radius ``r`` whose centers sit on a ring of
circumference ``L``.  A configuration keeps three arrays:

* ``base`` -- lifted (unwrapped) centers at time 0, nondecreasing in the
  particle index, with ``base[0]`` in ``[0, L)``;
* ``unwrapped_disp`` -- cumulative signed displacement of every particle;
* ``gaps`` -- free space in front of every particle, the authoritative
  quantity the dynamics works with.

Lattice mode stores everything as int64 with ``r = 1/2`` so that the
particle diameter is exactly 1 and integer data stay integer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import (
    AdmissibilityViolation,
    DegenerateCircumference,
    EmptyConfiguration,
    EmptyWindow,
    InfeasibleSpec,
    NonLatticeInput,
)

# relative slack for gap nonnegativity when building float configurations
BUILD_SLACK = 1e-12
LATTICE_RADIUS = 0.5


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RingConfiguration:
    circumference: Any
    radius: float
    base: np.ndarray
    unwrapped_disp: np.ndarray
    gaps: np.ndarray
    lattice: bool = False

    def __post_init__(self):
        for name in ("base", "unwrapped_disp", "gaps"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def diameter(self):
        return 1 if self.lattice else 2.0 * self.radius

    @property
    def lifted(self) -> np.ndarray:
        """Unwrapped centers (cover coordinates), nondecreasing in index."""
        return self.base + self.unwrapped_disp

    @property
    def positions(self) -> np.ndarray:
        """Centers reduced to ``[0, L)``, in particle-index order."""
        x = np.mod(self.lifted, self.circumference)
        if not self.lattice:
            x[x >= self.circumference] = 0.0
        return x

    @property
    def density(self) -> float:
        return self.n / self.circumference

    def successor(self, displacement: np.ndarray, gaps: np.ndarray) -> "RingConfiguration":
        return RingConfiguration(
            self.circumference,
            self.radius,
            self.base,
            self.unwrapped_disp + displacement,
            gaps,
            self.lattice,
        )

    def restart(self) -> "RingConfiguration":
        """Same geometry with the displacement counters reset to zero."""
        lifted = self.lifted
        shift = np.floor_divide(lifted[0], self.circumference) * self.circumference
        return RingConfiguration(
            self.circumference,
            self.radius,
            lifted - shift,
            np.zeros_like(self.unwrapped_disp),
            self.gaps,
            self.lattice,
        )

    def __repr__(self) -> str:
        return (
            f"RingConfiguration(N={self.n}, L={self.circumference}, r={self.radius}, "
            f"lattice={self.lattice})"
        )


@dataclass(frozen=True)
class GapSequence:
    gaps: np.ndarray
    circumference: Any
    radius: float

    @property
    def total(self):
        return self.gaps.sum()

    def __len__(self) -> int:
        return len(self.gaps)

    def __iter__(self):
        return iter(self.gaps.tolist())


def _check_lattice(values, L, r) -> None:
    if r != LATTICE_RADIUS:
        raise NonLatticeInput(f"lattice mode requires r = 1/2, got r={r}")
    arr = np.asarray(values, dtype=float)
    if not np.all(arr == np.round(arr)) or float(L) != round(float(L)):
        raise NonLatticeInput("lattice mode requires integer positions and circumference")


def _gaps_from_lifted(lifted: np.ndarray, L, diameter) -> np.ndarray:
    g = np.empty_like(lifted)
    g[:-1] = np.diff(lifted) - diameter
    g[-1] = lifted[0] + L - lifted[-1] - diameter
    return g


def _validate_gaps(g: np.ndarray, L, lattice: bool) -> np.ndarray:
    slack = 0 if lattice else BUILD_SLACK * float(L)
    bad = np.flatnonzero(g < -slack)
    if bad.size:
        i = int(bad[0])
        raise AdmissibilityViolation(f"gap {i} is {g[i]!r} < 0")
    if not lattice:
        g = np.maximum(g, 0.0)
    return g


def from_positions(positions: Sequence[float], r: float, L, lattice: bool = False) -> RingConfiguration:
    """Validate a list of centers; they are reduced mod L and sorted."""
    if L <= 0:
        raise InfeasibleSpec(f"circumference must be positive, got {L}")
    if r < 0:
        raise InfeasibleSpec(f"radius must be nonnegative, got {r}")
    if len(positions) == 0:
        raise EmptyConfiguration("a configuration needs at least one particle")
    if lattice:
        _check_lattice(positions, L, r)
        L = int(round(float(L)))
        x = np.mod(np.asarray(np.round(positions), dtype=np.int64), L)
    else:
        x = np.mod(np.asarray(positions, dtype=float), float(L))
        x[x >= L] = 0.0
    x = np.sort(x, kind="stable")
    diameter = 1 if lattice else 2.0 * r
    g = _validate_gaps(_gaps_from_lifted(x, L, diameter), L, lattice)
    return RingConfiguration(L, float(r), x, np.zeros_like(x), g, lattice)


def gaps_of(config: RingConfiguration) -> GapSequence:
    return GapSequence(config.gaps.copy(), config.circumference, config.radius)


def from_gaps(gaps: Sequence[float], r: float, anchor=0.0, lattice: bool = False) -> RingConfiguration:
    """Inverse of :func:`gaps_of`: particle 0 sits at ``anchor mod L``."""
    if len(gaps) == 0:
        raise EmptyConfiguration("a configuration needs at least one particle")
    if lattice:
        _check_lattice(list(gaps) + [anchor], 0, r)
        g = np.asarray(np.round(gaps), dtype=np.int64)
        diameter = 1
    else:
        g = np.asarray(gaps, dtype=float)
        diameter = 2.0 * r
    if np.any(g < 0):
        raise AdmissibilityViolation("gaps must be nonnegative")
    n = len(g)
    L = g.sum() + diameter * n
    if L <= 0:
        raise DegenerateCircumference(f"gaps and radius give circumference {L}")
    start = np.mod(int(round(anchor)) if lattice else float(anchor), L)
    steps = np.concatenate(([0], np.cumsum(g[:-1] + diameter)))
    base = start + steps.astype(g.dtype)
    return RingConfiguration(L, float(r), base, np.zeros_like(base), g, lattice)


def radius_transform(config: RingConfiguration, r_new: float, lattice: bool = False) -> RingConfiguration:
    """Change the particle radius keeping the gap sequence.

    Particle ``i`` moves by ``-2 i (r - r_new)``; the circumference becomes
    ``L - 2 N (r - r_new)``.
    """
    n = config.n
    shrink = 2.0 * (config.radius - r_new)
    if lattice:
        _check_lattice(config.lifted, config.circumference, r_new)
        shrink_int = int(round(shrink))
        if shrink_int != shrink:
            raise NonLatticeInput("radius change must be a half-integer for lattice output")
        L_new = int(round(float(config.circumference))) - shrink_int * n
        idx = np.arange(n, dtype=np.int64)
        base = np.asarray(np.round(config.base), dtype=np.int64) - shrink_int * idx
        disp = np.asarray(np.round(config.unwrapped_disp), dtype=np.int64)
        gaps = np.asarray(np.round(config.gaps), dtype=np.int64)
    else:
        if r_new == config.radius and not config.lattice:
            return config
        L_new = float(config.circumference) - shrink * n
        base = np.asarray(config.base, dtype=float) - shrink * np.arange(n)
        disp = np.asarray(config.unwrapped_disp, dtype=float)
        gaps = np.asarray(config.gaps, dtype=float)
    if L_new <= 0:
        raise DegenerateCircumference(f"transformed circumference {L_new} <= 0")
    if r_new < 0:
        raise InfeasibleSpec("radius must be nonnegative")
    wraps = np.floor_divide(base[0], L_new)
    base = base - wraps * L_new
    return RingConfiguration(L_new, float(r_new), base, disp, gaps, lattice)


# --- initial configuration families -------------------------------------

INIT_KINDS = ("uniform", "two_gap", "random_admissible", "explicit")


@dataclass(frozen=True)
class InitSpec:
    """Recipe for an initial configuration (one of :data:`INIT_KINDS`)."""

    kind: str
    L: Any
    r: float = 0.0
    rho: Optional[float] = None
    phase: float = 0.0
    m: Optional[int] = None
    n: Optional[int] = None
    g_small: Optional[float] = None
    g_large: Optional[float] = None
    seed: Optional[int] = None
    positions: Optional[tuple] = None
    lattice: bool = False

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "L": self.L, "r": self.r, "lattice": self.lattice}
        extra = {
            "uniform": ("rho", "phase"),
            "two_gap": ("m", "n", "g_small", "g_large"),
            "random_admissible": ("rho", "seed"),
            "explicit": ("positions",),
        }[self.kind]
        for key in extra:
            value = getattr(self, key)
            out[key] = list(value) if key == "positions" and value is not None else value
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "InitSpec":
        d = dict(d)
        if d.get("positions") is not None:
            d["positions"] = tuple(d["positions"])
        return cls(**d)


def particle_count(rho: float, L, tol: float = 1e-9) -> int:
    """``rho * L`` as an integer, or :class:`InfeasibleSpec`."""
    nf = rho * float(L)
    n = int(round(nf))
    if n < 1 or abs(nf - n) > tol * max(1.0, nf):
        raise InfeasibleSpec(f"rho*L = {nf} is not a positive integer")
    return n


def spread_large_gaps(m: int, n: int) -> np.ndarray:
    """Boolean mask of length m+n with the n large gaps spread evenly."""
    total = m + n
    i = np.arange(total)
    return ((i + 1) * n) // total > (i * n) // total


def generate(spec: InitSpec, rng: Optional[np.random.Generator] = None) -> RingConfiguration:
    L, r = spec.L, spec.r
    diameter = 1 if spec.lattice else 2.0 * r
    if spec.kind == "uniform":
        n = particle_count(spec.rho, L)
        spacing = L / n
        if spacing < diameter:
            raise InfeasibleSpec(f"density {spec.rho} too high for radius {r}")
        if spec.lattice:
            if L % n:
                raise InfeasibleSpec("lattice uniform spacing must be an integer")
            pos = int(round(spec.phase)) + (L // n) * np.arange(n, dtype=np.int64)
        else:
            pos = spec.phase + spacing * np.arange(n)
        return from_positions(pos, r, L, lattice=spec.lattice)

    if spec.kind == "two_gap":
        m, n = int(spec.m), int(spec.n)
        if m < 0 or n < 0 or m + n < 1:
            raise InfeasibleSpec("two_gap needs m, n >= 0 and m + n >= 1")
        free = L - diameter * (m + n)
        filled = m * spec.g_small + n * spec.g_large
        if abs(filled - free) > 1e-9 * max(1.0, float(L)):
            raise InfeasibleSpec(
                f"m*g_small + n*g_large = {filled} != L - 2r(m+n) = {free}"
            )
        large = spread_large_gaps(m, n)
        gaps = np.where(large, spec.g_large, spec.g_small)
        # keep the requested L when the float gap sum is off by rounding
        if not spec.lattice:
            gaps = gaps.astype(float)
        cfg = from_gaps(gaps, r, anchor=spec.phase, lattice=spec.lattice)
        if not spec.lattice and cfg.circumference != L:
            cfg = RingConfiguration(L, cfg.radius, cfg.base, cfg.unwrapped_disp, cfg.gaps, False)
        return cfg

    if spec.kind == "random_admissible":
        n = particle_count(spec.rho, L)
        if rng is None:
            rng = np.random.default_rng(spec.seed)
        if spec.lattice:
            sites = rng.choice(int(L), size=n, replace=False)
            return from_positions(np.sort(sites), r, L, lattice=True)
        free = L - diameter * n
        if free < 0:
            raise InfeasibleSpec(f"density {spec.rho} too high for radius {r}")
        mean_gap = 1.0 / spec.rho - diameter
        raw = rng.exponential(max(mean_gap, 1e-300), size=n)
        total = raw.sum()
        gaps = raw * (free / total) if total > 0 else np.full(n, free / n)
        anchor = rng.uniform(0.0, float(L))
        cfg = from_gaps(gaps, r, anchor=anchor)
        return RingConfiguration(L, cfg.radius, cfg.base, cfg.unwrapped_disp, cfg.gaps, False)

    if spec.kind == "explicit":
        if not spec.positions:
            raise InfeasibleSpec("explicit init needs positions")
        return from_positions(list(spec.positions), r, L, lattice=spec.lattice)

    raise InfeasibleSpec(f"unknown init kind {spec.kind!r}")


# --- densities ------------------------------------------------------------

def window_density(config: RingConfiguration, a: float, b: float) -> float:
    """Number of centers in the closed arc ``[a, b]`` divided by ``b - a``."""
    length = b - a
    if length <= 0:
        raise EmptyWindow(f"window [{a}, {b}] is empty")
    L = config.circumference
    if length > L * (1 + 1e-15):
        raise ValueError("window longer than the ring")
    if length >= L:
        return config.n / length
    offsets = np.mod(config.positions - a, L)
    return int(np.count_nonzero(offsets <= length)) / length


def window_count(config: RingConfiguration, a: float, b: float) -> int:
    L = config.circumference
    if b - a >= L:
        return config.n
    offsets = np.mod(config.positions - a, L)
    return int(np.count_nonzero(offsets <= b - a))


@dataclass(frozen=True)
class OneSidedTrace:
    lengths: np.ndarray
    values: np.ndarray

    @property
    def final(self) -> float:
        return float(self.values[-1])


def one_sided_density(config: RingConfiguration, origin: float, max_len: float, n_points: int) -> OneSidedTrace:
    """Densities of ``[origin, origin + l]`` for ``n_points`` growing lengths."""
    if max_len > config.circumference * (1 + 1e-15):
        raise ValueError("max_len must not exceed the circumference")
    lengths = max_len * np.arange(1, n_points + 1) / n_points
    values = np.array([window_density(config, origin, origin + ell) for ell in lengths])
    return OneSidedTrace(lengths, values)
