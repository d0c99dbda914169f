"""Approximation-branch lattice, offline profiles and Pareto frontiers.

A branch is an ``(input side, outport)`` pair of a multi-exit model.  It is
valid when the feature map reaching the outport is at least 7 pixels wide.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

REFERENCE_SHAPES = (224, 192, 160, 128, 112, 96, 80)
REFERENCE_FACTORS = (8, 8, 16, 16, 16, 32)
MIN_FEATURE_SIDE = 7


class ProfileError(ValueError):
    pass


class IncompleteProfileError(ProfileError):
    pass


class MonotonicityError(ProfileError):
    pass


class SchemaError(ProfileError):
    pass


@dataclass(frozen=True)
class ApproxBranch:
    side: int
    outport: int

    @property
    def sort_key(self):
        return (-self.side, self.outport)

    def __str__(self):
        return f"({self.side},o{self.outport})"


def outport_feature_side(side: int, outport: int, factors: Sequence[int] = REFERENCE_FACTORS) -> int:
    if not 1 <= outport <= len(factors):
        raise ValueError(f"unknown outport {outport}; catalog has {len(factors)}")
    return side // factors[outport - 1]


@dataclass(frozen=True)
class BranchCatalog:
    """Ordered set of valid branches (descending side, then ascending outport)."""

    branches: Tuple[ApproxBranch, ...]
    factors: Tuple[int, ...] = REFERENCE_FACTORS
    min_feature_side: int = MIN_FEATURE_SIDE
    _index: Dict[ApproxBranch, int] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        branches = tuple(sorted(set(self.branches), key=lambda b: b.sort_key))
        if len(branches) != len(self.branches):
            raise ValueError("duplicate branches in catalog")
        for b in branches:
            if outport_feature_side(b.side, b.outport, self.factors) < self.min_feature_side:
                raise ValueError(f"branch {b} violates the feature-side floor")
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "_index", {b: i for i, b in enumerate(branches)})

    @property
    def shapes(self) -> Tuple[int, ...]:
        return tuple(sorted({b.side for b in self.branches}, reverse=True))

    @property
    def outport_count(self) -> int:
        return len(self.factors)

    def __len__(self):
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)

    def __contains__(self, branch):
        return branch in self._index

    def index(self, branch: ApproxBranch) -> int:
        try:
            return self._index[branch]
        except KeyError:
            raise KeyError(f"branch {branch} not in catalog") from None


def enumerate_branches(shapes: Iterable[int] = REFERENCE_SHAPES, outport_count: int = None,
                       factors: Sequence[int] = REFERENCE_FACTORS,
                       min_feature_side: int = MIN_FEATURE_SIDE) -> BranchCatalog:
    shapes = list(shapes)
    if not shapes:
        raise ValueError("shape list is empty")
    if outport_count is None:
        outport_count = len(factors)
    if len(factors) < outport_count:
        raise ValueError("downsample factors do not cover every outport")
    factors = tuple(factors[:outport_count])
    found = [
        ApproxBranch(s, o)
        for s in sorted(set(shapes), reverse=True)
        for o in range(1, outport_count + 1)
        if outport_feature_side(s, o, factors) >= min_feature_side
    ]
    return BranchCatalog(tuple(found), factors, min_feature_side)


@dataclass(frozen=True)
class TradeoffPoint:
    branch: ApproxBranch
    latency: float
    accuracy: float


def dominates(p: TradeoffPoint, q: TradeoffPoint) -> bool:
    return (p.latency <= q.latency and p.accuracy >= q.accuracy
            and (p.latency < q.latency or p.accuracy > q.accuracy))


def pareto_frontier(points: Iterable[TradeoffPoint]) -> List[TradeoffPoint]:
    """Non-dominated points sorted by ascending latency.

    Exact duplicates collapse to the first one in canonical branch order.
    """
    ordered = sorted(points, key=lambda p: (p.latency, -p.accuracy, p.branch.sort_key))
    front = []
    best = -np.inf
    for p in ordered:
        if p.accuracy > best:
            front.append(p)
            best = p.accuracy
    return front


def _as_table(values, shape, name):
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise IncompleteProfileError(f"{name} table has shape {arr.shape}, expected {shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AccuracyProfile:
    """Accuracy per (branch, complexity category); ``table[i, f - 1]``."""

    catalog: BranchCatalog
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or t.shape[0] != len(self.catalog) or t.shape[1] < 1:
            raise IncompleteProfileError(f"accuracy table shape {t.shape} does not cover catalog")
        if np.any((t < 0) | (t > 1)) or not np.all(np.isfinite(t)):
            raise ProfileError("accuracy values must lie in [0, 1]")
        object.__setattr__(self, "table", _as_table(t, t.shape, "accuracy"))

    @property
    def n_categories(self) -> int:
        return self.table.shape[1]

    def get(self, branch: ApproxBranch, category: int) -> float:
        if not 1 <= category <= self.n_categories:
            raise IndexError(f"category {category} outside 1..{self.n_categories}")
        return float(self.table[self.catalog.index(branch), category - 1])

    def column(self, category: int) -> np.ndarray:
        if not 1 <= category <= self.n_categories:
            raise IndexError(f"category {category} outside 1..{self.n_categories}")
        return self.table[:, category - 1]


@dataclass(frozen=True, eq=False)
class LatencyProfile:
    """Latency (ms) per (branch, contention level); ``table[i, level]``."""

    catalog: BranchCatalog
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or t.shape[0] != len(self.catalog) or t.shape[1] < 1:
            raise IncompleteProfileError(f"latency table shape {t.shape} does not cover catalog")
        if np.any(t <= 0) or not np.all(np.isfinite(t)):
            raise ProfileError("latencies must be positive and finite")
        bad = np.nonzero(np.any(np.diff(t, axis=1) < 0, axis=1))[0]
        if bad.size:
            raise MonotonicityError(
                f"latency decreases with contention level for branch {self.catalog.branches[bad[0]]}")
        object.__setattr__(self, "table", _as_table(t, t.shape, "latency"))

    @property
    def levels(self) -> int:
        return self.table.shape[1]

    def get(self, branch: ApproxBranch, level: int) -> float:
        if not 0 <= level < self.levels:
            raise IndexError(f"contention level {level} outside 0..{self.levels - 1}")
        return float(self.table[self.catalog.index(branch), level])

    def row(self, branch: ApproxBranch) -> np.ndarray:
        return self.table[self.catalog.index(branch)]

    def column(self, level: int) -> np.ndarray:
        if not 0 <= level < self.levels:
            raise IndexError(f"contention level {level} outside 0..{self.levels - 1}")
        return self.table[:, level]


@dataclass(frozen=True, eq=False)
class SwitchCostMatrix:
    """One-time switch cost (ms); ``table[from, to]`` with a zero diagonal."""

    catalog: BranchCatalog
    table: np.ndarray

    def __post_init__(self):
        n = len(self.catalog)
        t = np.asarray(self.table, dtype=float)
        if t.shape != (n, n):
            raise IncompleteProfileError(f"switch table shape {t.shape}, expected {(n, n)}")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ProfileError("switch costs must be non-negative")
        if np.any(np.diag(t) != 0):
            raise ProfileError("switch cost diagonal must be zero")
        object.__setattr__(self, "table", _as_table(t, t.shape, "switch"))

    @classmethod
    def zeros(cls, catalog: BranchCatalog) -> "SwitchCostMatrix":
        return cls(catalog, np.zeros((len(catalog), len(catalog))))

    def get(self, src: ApproxBranch, dst: ApproxBranch) -> float:
        return float(self.table[self.catalog.index(src), self.catalog.index(dst)])


@dataclass(frozen=True, eq=False)
class ProfileSet:
    accuracy: AccuracyProfile
    latency: LatencyProfile
    switch: SwitchCostMatrix

    def __post_init__(self):
        if not (self.accuracy.catalog == self.latency.catalog == self.switch.catalog):
            raise ProfileError("profiles are built over different catalogs")

    @property
    def catalog(self) -> BranchCatalog:
        return self.accuracy.catalog

    def restrict(self, branches) -> "ProfileSet":
        """Profiles over a sub-catalog, e.g. to pin a single branch."""
        old = self.catalog
        sub = BranchCatalog(tuple(branches), old.factors, old.min_feature_side)
        idx = [old.index(b) for b in sub.branches]
        return ProfileSet(AccuracyProfile(sub, self.accuracy.table[idx]),
                          LatencyProfile(sub, self.latency.table[idx]),
                          SwitchCostMatrix(sub, self.switch.table[np.ix_(idx, idx)]))

    def __eq__(self, other):
        if not isinstance(other, ProfileSet):
            return NotImplemented
        return (self.catalog == other.catalog
                and np.array_equal(self.accuracy.table, other.accuracy.table)
                and np.array_equal(self.latency.table, other.latency.table)
                and np.array_equal(self.switch.table, other.switch.table))


ACCURACY_HEADER = ["side", "outport", "category", "accuracy"]
LATENCY_HEADER = ["side", "outport", "level", "latency_ms"]
SWITCH_HEADER = ["from_side", "from_outport", "to_side", "to_outport", "cost_ms"]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path, header):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"profile file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != header:
        raise SchemaError(f"{path.name}: expected header {','.join(header)}")
    out = []
    for n, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        if len(r) != len(header):
            raise SchemaError(f"{path.name} line {n}: expected {len(header)} columns")
        try:
            out.append([int(v) for v in r[:-1]] + [float(r[-1])])
        except ValueError:
            raise SchemaError(f"{path.name} line {n}: non-numeric field") from None
    return out


def store_profiles(profiles: ProfileSet, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    cat = profiles.catalog
    key = lambda b: (b.side, b.outport)
    by_key = sorted(cat.branches, key=key)
    _write_csv(d / "accuracy.csv", ACCURACY_HEADER, [
        [b.side, b.outport, f, f"{profiles.accuracy.get(b, f):.6f}"]
        for b in by_key for f in range(1, profiles.accuracy.n_categories + 1)])
    _write_csv(d / "latency.csv", LATENCY_HEADER, [
        [b.side, b.outport, c, f"{profiles.latency.get(b, c):.6f}"]
        for b in by_key for c in range(profiles.latency.levels)])
    _write_csv(d / "switch.csv", SWITCH_HEADER, [
        [p.side, p.outport, q.side, q.outport, f"{profiles.switch.get(p, q):.6f}"]
        for p in by_key for q in by_key])


def _fill(rows, catalog, n_cols, col_offset, name, key_name):
    table = np.full((len(catalog), n_cols), np.nan)
    for side, outport, k, value in rows:
        b = ApproxBranch(side, outport)
        if b not in catalog:
            raise SchemaError(f"{name}: branch {b} not in accuracy catalog")
        table[catalog.index(b), k - col_offset] = value
    missing = np.argwhere(np.isnan(table))
    if missing.size:
        i, k = missing[0]
        raise IncompleteProfileError(
            f"{name}: missing row for branch {catalog.branches[i]} {key_name} {k + col_offset}")
    return table


def load_profiles(directory, factors: Sequence[int] = REFERENCE_FACTORS) -> ProfileSet:
    d = Path(directory)
    acc_rows = _read_csv(d / "accuracy.csv", ACCURACY_HEADER)
    lat_rows = _read_csv(d / "latency.csv", LATENCY_HEADER)
    sw_rows = _read_csv(d / "switch.csv", SWITCH_HEADER)
    if not acc_rows:
        raise IncompleteProfileError("accuracy.csv has no rows")
    catalog = BranchCatalog(tuple({ApproxBranch(r[0], r[1]) for r in acc_rows}), tuple(factors))
    n_cat = max(r[2] for r in acc_rows)
    if min(r[2] for r in acc_rows) < 1:
        raise SchemaError("accuracy.csv: categories are 1-based")
    acc = _fill(acc_rows, catalog, n_cat, 1, "accuracy.csv", "category")
    if not lat_rows:
        raise IncompleteProfileError("latency.csv has no rows")
    if min(r[2] for r in lat_rows) < 0:
        raise SchemaError("latency.csv: levels are 0-based")
    n_lvl = max(r[2] for r in lat_rows) + 1
    lat = _fill(lat_rows, catalog, n_lvl, 0, "latency.csv", "level")
    sw = np.full((len(catalog), len(catalog)), np.nan)
    for fs, fo, ts, to, cost in sw_rows:
        src, dst = ApproxBranch(fs, fo), ApproxBranch(ts, to)
        if src not in catalog or dst not in catalog:
            raise SchemaError(f"switch.csv: pair {src}->{dst} not in catalog")
        sw[catalog.index(src), catalog.index(dst)] = cost
    missing = np.argwhere(np.isnan(sw))
    if missing.size:
        i, j = missing[0]
        raise IncompleteProfileError(
            f"switch.csv: missing pair {catalog.branches[i]}->{catalog.branches[j]}")
    return ProfileSet(AccuracyProfile(catalog, acc), LatencyProfile(catalog, lat),
                      SwitchCostMatrix(catalog, sw))
