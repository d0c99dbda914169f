"""Reference fixtures.

``table4a`` holds the eight Pareto-frontier branches measured on the VID
validation set (latency on an idle board, averaged top-5 accuracy), extended
with a synthetic 10-level contention model and small switch costs so it can
drive the simulator.
"""
from __future__ import annotations

from importlib import resources

import numpy as np

from .branches import (AccuracyProfile, ApproxBranch, BranchCatalog, LatencyProfile, ProfileSet,
                       SwitchCostMatrix)
from .executor import SimFixture
from .fce import CategoryBoundaries
from .synth import VID_CLASSES

# (side, outport, idle latency ms, accuracy); the reported depths 24/20/12
# correspond to outports 4/3/1
TABLE4A_ROWS = (
    (128, 4, 31.42, 0.8212),
    (160, 3, 31.33, 0.8081),
    (128, 3, 27.95, 0.7935),
    (112, 3, 26.84, 0.7828),
    (128, 1, 17.97, 0.7023),
    (112, 1, 17.70, 0.6853),
    (96, 1, 16.78, 0.6798),
    (80, 1, 16.14, 0.6639),
)

#: Reference top-5 accuracy of the full ResNet-34 model.
RESNET34_ACCURACY = 0.8586

#: Cuts that put mean edge values 0.03, 0.24 and 0.99 in categories 1, 3 and 7.
FIG7_CUTS = (0.1, 0.2, 0.3, 0.4, 0.6, 0.8)

TABLE4A_LEVELS = 10
TABLE4A_CATEGORIES = 7

# relative latency growth from idle to the highest contention level, by outport
CONTENTION_SENSITIVITY = {1: 0.60, 3: 0.75, 4: 0.85}


def scenario_targets():
    """Accuracy targets for <=10%, <=20% and <=30% relative loss."""
    return {"HH": 0.9 * RESNET34_ACCURACY, "MM": 0.8 * RESNET34_ACCURACY,
            "LL": 0.7 * RESNET34_ACCURACY}


def table4a_catalog() -> BranchCatalog:
    return BranchCatalog(tuple(ApproxBranch(s, o) for s, o, _, _ in TABLE4A_ROWS))


def table4a_profiles(levels: int = TABLE4A_LEVELS, categories: int = TABLE4A_CATEGORIES,
                     switch_scale: float = 1.0) -> ProfileSet:
    catalog = table4a_catalog()
    rows = {ApproxBranch(s, o): (lat, acc) for s, o, lat, acc in TABLE4A_ROWS}
    steps = np.arange(levels) / max(levels - 1, 1)
    lat = np.array([
        np.round(rows[b][0] * (1.0 + CONTENTION_SENSITIVITY[b.outport] * steps), 6)
        for b in catalog.branches])
    acc = np.array([[rows[b][1]] * categories for b in catalog.branches])
    sw = np.array([[_switch_cost(p, q) * switch_scale for q in catalog.branches]
                   for p in catalog.branches])
    return ProfileSet(AccuracyProfile(catalog, acc), LatencyProfile(catalog, lat),
                      SwitchCostMatrix(catalog, sw))


def _switch_cost(p: ApproxBranch, q: ApproxBranch) -> float:
    if p == q:
        return 0.0
    # resizing buffers for a new input side costs more than moving the exit
    return (1.0 if p.side != q.side else 0.0) + (0.5 if p.outport != q.outport else 0.0)


def table4a_fixture(jitter: float = 0.02) -> SimFixture:
    return SimFixture("table4a", table4a_profiles(), CategoryBoundaries(FIG7_CUTS), jitter,
                      VID_CLASSES)


def ablation_fixture(jitter: float = 0.02) -> SimFixture:
    """``table4a`` with accuracy that depends on frame complexity.

    On category-1 content every branch is equally accurate; each further
    category costs the cheapest branch 0.06 of accuracy and the slowest one
    nothing, with the others interpolated by idle latency.
    """
    base = table4a_profiles()
    lat0 = base.latency.column(0)
    heaviness = (lat0 - lat0.min()) / (lat0.max() - lat0.min())
    steps = np.arange(TABLE4A_CATEGORIES)
    acc = 0.9 - 0.06 * np.outer(1.0 - heaviness, steps)
    profiles = ProfileSet(AccuracyProfile(base.catalog, np.round(acc, 6)), base.latency,
                          base.switch)
    return SimFixture("ablation", profiles, CategoryBoundaries(FIG7_CUTS), jitter, VID_CLASSES)


def fixture_path(name: str = "table4a"):
    return resources.files("abranch") / "data" / f"{name}.json"


def load_builtin_fixture(name: str = "table4a") -> SimFixture:
    return SimFixture.load(fixture_path(name))
