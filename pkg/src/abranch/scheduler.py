"""Branch selection under a latency or accuracy requirement.

The effective latency of a candidate branch is its profiled latency at the
estimated contention level, plus the one-time switch cost from the current
branch amortized over the expected stability window ``W``, plus a constant
per-frame overhead ``L0``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .branches import ApproxBranch, BranchCatalog, ProfileSet, TradeoffPoint, pareto_frontier

LATENCY = "latency"
ACCURACY = "accuracy"
REALTIME = "rt"

DEFAULT_WINDOW = 30
MAX_WINDOW = 300
EMA_ALPHA = 0.3
SCD_OVERHEAD_MS = 1.3
FCC_OVERHEAD_MS = 3.9


@dataclass(frozen=True)
class UserRequirement:
    kind: str
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind == LATENCY:
            if self.value is None or not self.value > 0:
                raise ValueError("latency target must be > 0 ms")
        elif self.kind == ACCURACY:
            if self.value is None or not 0 < self.value <= 1:
                raise ValueError("accuracy target must lie in (0, 1]")
        elif self.kind == REALTIME:
            object.__setattr__(self, "value", None)
        else:
            raise ValueError(f"unknown requirement kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "UserRequirement":
        text = text.strip()
        if text == "rt":
            return cls(REALTIME)
        key, sep, val = text.partition("=")
        if not sep or key not in (LATENCY, ACCURACY):
            raise ValueError(f"invalid requirement {text!r}; use latency=<ms>, accuracy=<fraction> or rt")
        try:
            num = float(val)
        except ValueError:
            raise ValueError(f"invalid requirement value in {text!r}") from None
        return cls(key, num)

    def resolve(self, fps: float) -> "UserRequirement":
        """Replace the real-time default by the frame-interval latency target."""
        if self.kind == REALTIME:
            return UserRequirement(LATENCY, 1000.0 / fps)
        return self

    def __str__(self):
        if self.kind == REALTIME:
            return "rt"
        return f"{self.kind}={self.value:g}"


@dataclass(frozen=True)
class SchedulerState:
    current: Optional[ApproxBranch] = None
    window: int = DEFAULT_WINDOW
    run_length: int = 0
    overhead_ms: float = 0.0
    ema: float = float(DEFAULT_WINDOW)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("W must be >= 1")
        if self.run_length < 0:
            raise ValueError("run length must be >= 0")
        if self.overhead_ms < 0:
            raise ValueError("L0 must be >= 0")


@dataclass(frozen=True)
class ScheduleDecision:
    branch: ApproxBranch
    predicted_latency: float
    predicted_accuracy: float
    satisfied: bool
    switched: bool


def effective_latencies(level: int, state: SchedulerState, profiles: ProfileSet) -> np.ndarray:
    lat = profiles.latency.column(level)
    if state.current is None:
        return lat + state.overhead_ms
    switch = profiles.switch.table[profiles.catalog.index(state.current)]
    return lat + switch / state.window + state.overhead_ms


def _pick(candidates, primary, secondary):
    """Index with the smallest (primary, secondary, index) among candidates."""
    keys = np.lexsort((candidates, secondary[candidates], primary[candidates]))
    return int(candidates[keys[0]])


def select_branch(req: UserRequirement, category: int, level: int, state: SchedulerState,
                  profiles: ProfileSet, catalog: BranchCatalog = None,
                  fps: float = 30.0) -> ScheduleDecision:
    catalog = catalog or profiles.catalog
    if len(catalog) == 0:
        raise ValueError("catalog is empty")
    if catalog != profiles.catalog:
        raise ValueError("catalog does not match the profile set")
    req = req.resolve(fps)
    eff = effective_latencies(level, state, profiles)
    acc = profiles.accuracy.column(category)
    everyone = np.arange(len(catalog))

    if req.kind == LATENCY:
        feasible = everyone[eff <= req.value]
        if feasible.size:
            idx = _pick(feasible, -acc, eff)
        else:
            idx = _pick(everyone, np.abs(eff - req.value), -acc)
    else:
        feasible = everyone[acc >= req.value]
        if feasible.size:
            idx = _pick(feasible, eff, -acc)
        else:
            idx = _pick(everyone, np.abs(acc - req.value), eff)

    branch = catalog.branches[idx]
    return ScheduleDecision(
        branch=branch,
        predicted_latency=float(eff[idx]),
        predicted_accuracy=float(acc[idx]),
        satisfied=bool(feasible.size),
        switched=state.current is not None and branch != state.current,
    )


def update_stability(state: SchedulerState, switched: bool) -> SchedulerState:
    """Track how long branches stay in use and refresh ``W`` on each switch."""
    if not switched:
        return dataclasses.replace(state, run_length=state.run_length + 1)
    completed = state.run_length + 1
    ema = EMA_ALPHA * completed + (1 - EMA_ALPHA) * state.ema
    window = int(min(MAX_WINDOW, max(1, round(ema))))
    return dataclasses.replace(state, window=window, ema=ema, run_length=0)


def runtime_frontier(category: int, level: int, profiles: ProfileSet,
                     catalog: BranchCatalog = None) -> List[TradeoffPoint]:
    catalog = catalog or profiles.catalog
    lat = profiles.latency.column(level)
    acc = profiles.accuracy.column(category)
    return pareto_frontier(
        TradeoffPoint(b, float(lat[i]), float(acc[i])) for i, b in enumerate(catalog.branches))


class Scheduler:
    """Stateful per-stream scheduler.

    Decisions are recomputed only when the requirement, the complexity
    category or the contention estimate changes; otherwise the current
    branch is kept.
    """

    def __init__(self, profiles: ProfileSet, overhead_ms: float = 0.0,
                 window: int = DEFAULT_WINDOW, fps: float = 30.0):
        self.profiles = profiles
        self.fps = fps
        self.state = SchedulerState(window=window, overhead_ms=overhead_ms, ema=float(window))
        self._signals = None
        self._last: Optional[ScheduleDecision] = None

    def decide(self, req: UserRequirement, category: int, level: int) -> ScheduleDecision:
        signals = (req, category, level)
        if self._last is not None and signals == self._signals:
            decision = self._hold(req, category, level)
        else:
            decision = select_branch(req, category, level, self.state, self.profiles, fps=self.fps)
        if self.state.current is not None:
            self.state = update_stability(self.state, decision.switched)
        self.state = dataclasses.replace(self.state, current=decision.branch)
        self._signals = signals
        self._last = decision
        return decision

    def _hold(self, req, category, level) -> ScheduleDecision:
        b = self.state.current
        lat = self.profiles.latency.get(b, level) + self.state.overhead_ms
        acc = self.profiles.accuracy.get(b, category)
        return dataclasses.replace(self._last, predicted_latency=lat, predicted_accuracy=acc,
                                   switched=False)
