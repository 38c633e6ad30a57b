"""Per-step invariant monitors, plugged into :func:`exclusim.dynamics.evolve`.

Each monitor records the worst margin it saw and every step at which its
invariant failed.  ``margin`` is ``bound - observed`` (negative = violated).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .configuration import window_count
from .dynamics import Recorder


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    violations: int
    checked_steps: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "violations": self.violations,
            "checked_steps": self.checked_steps,
        }


class Monitor(Recorder):
    name = "monitor"

    def __init__(self, every: int = 1):
        self.every = max(1, int(every))
        self.worst = float("inf")
        self.violation_steps: List[int] = []
        self.checked = 0

    def observe(self, t, config, displacement):
        if t % self.every:
            return
        self.checked += 1
        margin = float(self.margin(t, config, displacement))
        if margin < self.worst:
            self.worst = margin
        if margin < 0:
            self.violation_steps.append(t)

    def margin(self, t, config, displacement) -> float:
        raise NotImplementedError

    def result(self) -> CheckResult:
        worst = self.worst if self.checked else 0.0
        return CheckResult(self.name, not self.violation_steps, worst,
                           len(self.violation_steps), self.checked)


class GapBoundMonitor(Monitor):
    """Per-index bound ``gap_i(t) <= max(factor * v, gap_i(0))``."""

    def __init__(self, v: float, factor: float, every: int = 1, tol: float = 0.0):
        super().__init__(every)
        self.v = v
        self.factor = factor
        self.tol = tol
        self.bound: Optional[np.ndarray] = None
        self.name = f"gap_bound_{factor:g}v"

    def margin(self, t, config, displacement):
        if self.bound is None:
            self.bound = np.maximum(self.factor * self.v, config.gaps)
        return float(np.min(self.bound + self.tol - config.gaps))


class AdmissibilityMonitor(Monitor):
    name = "admissibility"

    def margin(self, t, config, displacement):
        return float(config.gaps.min())


class WindowDriftMonitor(Monitor):
    """Change of the particle count in fixed arcs between consecutive steps."""

    def __init__(self, windows: Sequence[Tuple[float, float]], limit: int):
        super().__init__(1)
        self.windows = list(windows)
        self.limit = limit
        self.prev: Optional[np.ndarray] = None
        self.max_change = 0
        self.name = f"window_drift_le_{limit}"

    def margin(self, t, config, displacement):
        counts = np.array([window_count(config, a, b) for a, b in self.windows])
        change = 0 if self.prev is None else int(np.max(np.abs(counts - self.prev)))
        self.prev = counts
        self.max_change = max(self.max_change, change)
        return self.limit - change


class GapClassMonitor(Monitor):
    """Counts of gaps in ``[0, v)`` and ``[v, 2v)`` must stay ``(m, n)``."""

    def __init__(self, v: float, m: int, n: int, every: int = 1):
        super().__init__(every)
        self.v, self.m, self.n = v, m, n
        self.name = "gap_classes_preserved"

    def margin(self, t, config, displacement):
        g = config.gaps
        small = int(np.count_nonzero(g < self.v))
        large = int(np.count_nonzero((g >= self.v) & (g < 2 * self.v)))
        return 0.0 if (small, large) == (self.m, self.n) else -1.0


class IntegralityMonitor(Monitor):
    """All unwrapped centers are integers (lattice embedding)."""

    name = "lattice_integrality"

    def margin(self, t, config, displacement):
        x = config.lifted
        if x.dtype.kind in "iu":
            return 0.0
        return -float(np.max(np.abs(x - np.round(x))))


class ClusterMonitor(Recorder):
    """Largest cluster length after every step."""

    def __init__(self, v: float):
        self.v = v
        self.series: List[int] = []

    def observe(self, t, config, displacement):
        from .statistics import max_cluster_length

        self.series.append(max_cluster_length(config.gaps, self.v))
