"""Run-config documents (JSON, ``schema_version`` 1).

Structural validation is done by pydantic; cross-field rules are checked
afterwards.  Every problem found is reported together in one
:class:`~exclusim.errors.SchemaError`.
"""
from __future__ import annotations

import json
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .configuration import InitSpec, LATTICE_RADIUS, particle_count
from .dynamics import Normalization
from .errors import ExclusimError, InfeasibleSpec, SchemaError
from .velocity import VelocityModel

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "fd-sweep", "couple", "tracer", "hysteresis", "ns")
CHECK_LEVELS = ("off", "sampled", "every-step")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Topology(_Strict):
    L: float = Field(gt=0)
    rho: Optional[float] = Field(default=None, gt=0)
    N: Optional[int] = Field(default=None, ge=1)
    r: float = Field(default=0.0, ge=0)
    lattice_mode: bool = False


class Source(_Strict):
    type: Literal["constant", "periodic", "logistic_map", "uniform", "discrete"]
    value: Optional[float] = None
    values: Optional[List[float]] = None
    weights: Optional[List[float]] = None
    v0: Optional[float] = None
    low: Optional[float] = None
    high: Optional[float] = None


class Velocity(_Strict):
    cap: float = Field(gt=0)
    kind: Literal["deterministic", "iid"] = "deterministic"
    source: Source
    signed: bool = False
    seed: int = 0


class Init(_Strict):
    kind: Literal["uniform", "two_gap", "random_admissible", "explicit"] = "random_admissible"
    phase: float = 0.0
    m: Optional[int] = Field(default=None, ge=0)
    n: Optional[int] = Field(default=None, ge=0)
    g_small: Optional[float] = Field(default=None, ge=0)
    g_large: Optional[float] = Field(default=None, ge=0)
    positions: Optional[List[float]] = None


class FDSection(_Strict):
    rho_grid: List[float] = Field(min_length=1)
    init_family: Literal["uniform", "random_admissible"] = "random_admissible"


class CoupleSection(_Strict):
    y_init: Optional[Init] = None


class TracerSection(_Strict):
    direction: Literal["forward", "backward"] = "forward"
    start_particle: int = 0


class HysteresisSection(_Strict):
    rho_grid: List[float] = Field(min_length=1)
    families: Optional[List[Tuple[int, int]]] = None
    count: int = Field(default=5, ge=1)


class NSSection(_Strict):
    a: float = Field(gt=0)
    a_max: Optional[float] = None
    coupled: bool = False


class RunConfig(_Strict):
    schema_version: int
    command: Optional[Literal["simulate", "fd-sweep", "couple", "tracer", "hysteresis", "ns"]] = None
    topology: Topology
    normalization: Literal["WeakNonneg", "StrongNonneg", "WeakBothContinuous", "StrongBoth"] = "WeakNonneg"
    velocity: Velocity
    init: Init = Init()
    T: int = Field(ge=1)
    burn_in: Optional[int] = Field(default=None, ge=0)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    check: Literal["off", "sampled", "every-step"] = "sampled"
    output: Optional[str] = None
    fd: Optional[FDSection] = None
    couple: Optional[CoupleSection] = None
    tracer: Optional[TracerSection] = None
    hysteresis: Optional[HysteresisSection] = None
    ns: Optional[NSSection] = None

    # derived views ---------------------------------------------------------
    @property
    def kind(self) -> Normalization:
        return Normalization(self.normalization)

    @property
    def effective_burn_in(self) -> int:
        return self.T // 2 if self.burn_in is None else self.burn_in

    @property
    def n_particles(self) -> int:
        if self.topology.N is not None:
            return self.topology.N
        return particle_count(self.topology.rho, self.topology.L)

    @property
    def L(self):
        L = self.topology.L
        return int(L) if self.topology.lattice_mode else float(L)

    @property
    def rho(self) -> float:
        return self.n_particles / float(self.topology.L)

    def velocity_model(self, seed: Optional[int] = None) -> VelocityModel:
        d = self.velocity.model_dump(exclude_none=True)
        d["source"] = {k: v for k, v in d["source"].items() if v is not None}
        if d["source"]["type"] == "logistic_map":
            d["source"]["type"] = "logisticmap"
        if seed is not None:
            d["seed"] = seed
        return VelocityModel.from_dict(d)

    def init_spec(self, seed: int, section: Optional[Init] = None) -> InitSpec:
        s = section or self.init
        topo = self.topology
        return InitSpec(
            kind=s.kind, L=self.L, r=topo.r, rho=self.rho, phase=s.phase, m=s.m, n=s.n,
            g_small=s.g_small, g_large=s.g_large, seed=seed,
            positions=tuple(s.positions) if s.positions else None,
            lattice=topo.lattice_mode,
        )


def _loc(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += ("." if out else "") + str(part)
    return out or "<root>"


def _semantic_errors(cfg: RunConfig) -> List[Tuple[str, str]]:
    errs: List[Tuple[str, str]] = []
    topo = cfg.topology
    if cfg.schema_version != SCHEMA_VERSION:
        errs.append(("schema_version", f"unsupported version {cfg.schema_version}; expected {SCHEMA_VERSION}"))
    if topo.rho is None and topo.N is None:
        errs.append(("topology", "give rho or N"))
    elif topo.N is not None and topo.rho is not None:
        if abs(topo.N - topo.rho * topo.L) > 1e-9 * max(1.0, topo.N):
            errs.append(("topology", "N and rho * L disagree"))
    elif topo.rho is not None:
        try:
            particle_count(topo.rho, topo.L)
        except InfeasibleSpec:
            errs.append(("topology", f"rho * L = {topo.rho * topo.L} is not a positive integer"))
    if topo.lattice_mode:
        if topo.r != LATTICE_RADIUS:
            errs.append(("topology.r", "lattice mode requires r = 1/2"))
        if topo.L != int(topo.L):
            errs.append(("topology.L", "lattice mode requires an integer L"))
        if cfg.normalization == "WeakBothContinuous":
            errs.append(("normalization", "continuous meeting points are not lattice-closed"))
        src = cfg.velocity.source
        vals = [cfg.velocity.cap] + [x for x in (src.value, src.v0, src.low, src.high) if x is not None]
        vals += list(src.values or [])
        if any(float(x) != int(x) for x in vals) or src.type in ("uniform", "logistic_map"):
            errs.append(("velocity", "lattice mode requires integer-valued velocities"))
    if cfg.burn_in is not None and cfg.burn_in >= cfg.T:
        errs.append(("burn_in", "burn_in must be < T"))
    if cfg.velocity.signed and not cfg.kind.signed:
        errs.append(("normalization", f"{cfg.normalization} cannot take signed velocities"))
    try:
        cfg.velocity_model()
    except (ExclusimError, TypeError, KeyError) as exc:
        errs.append(("velocity", str(exc)))
    if cfg.init.kind == "two_gap" and None in (cfg.init.m, cfg.init.n, cfg.init.g_small, cfg.init.g_large):
        errs.append(("init", "two_gap needs m, n, g_small and g_large"))
    if cfg.init.kind == "explicit" and not cfg.init.positions:
        errs.append(("init.positions", "explicit init needs positions"))
    for section, grid in (("fd", cfg.fd), ("hysteresis", cfg.hysteresis)):
        if grid is None:
            continue
        for i, rho in enumerate(grid.rho_grid):
            try:
                particle_count(rho, topo.L)
            except InfeasibleSpec:
                errs.append((f"{section}.rho_grid[{i}]", f"rho * L = {rho * topo.L} is not a positive integer"))
    if cfg.command == "hysteresis" and cfg.hysteresis is None:
        errs.append(("hysteresis", "required for the hysteresis command"))
    if cfg.command == "ns":
        if cfg.ns is None:
            errs.append(("ns", "required for the ns command"))
        if cfg.kind.signed:
            errs.append(("normalization", "ns needs a nonnegative normalization"))
    if cfg.ns is not None and cfg.ns.a_max is not None and cfg.ns.a_max < cfg.ns.a:
        errs.append(("ns.a_max", "a_max must be >= a"))
    return errs


def parse_config(document: Union[str, bytes, dict], command: Optional[str] = None) -> RunConfig:
    """Validate a run-config document (JSON text or an already-parsed dict).

    ``command`` (from the CLI) fills in or must agree with the document's
    ``command`` field.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError([("<root>", f"not valid JSON: {exc}")]) from None
    if not isinstance(document, dict):
        raise SchemaError([("<root>", "document must be a JSON object")])
    doc = dict(document)
    if command is not None:
        if doc.get("command") not in (None, command):
            raise SchemaError([("command", f"document is for {doc['command']!r}, not {command!r}")])
        doc["command"] = command
    try:
        cfg = RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise SchemaError([(_loc(e["loc"]), e["msg"]) for e in exc.errors()]) from None
    errs = _semantic_errors(cfg)
    if errs:
        raise SchemaError(errs)
    return cfg
