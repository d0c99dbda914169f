"""Frame complexity estimation: Scharr edge energy, category quantization and
histogram-based scene change detection."""
from __future__ import annotations

import bisect
import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .frameio import Frame, GrayFrame, extract_channel, resize_nearest, to_grayscale

#: Largest joint Scharr magnitude reachable on 8-bit input (16 * 255 per axis).
MAX_EDGE_MAGNITUDE = 4080.0 * math.sqrt(2.0)

SCHARR_X = np.array([[3, 0, -3], [10, 0, -10], [3, 0, -3]], dtype=np.int64)
SCHARR_Y = SCHARR_X.T.copy()


@dataclass(frozen=True, eq=False)
class EdgeMap:
    magnitudes: np.ndarray

    @property
    def width(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def height(self) -> int:
        return self.magnitudes.shape[0]


@dataclass(frozen=True)
class CategoryBoundaries:
    cuts: Tuple[float, ...] = ()

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        for c in cuts:
            if not 0.0 < c < 1.0:
                raise ValueError(f"cut {c} outside (0, 1)")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cuts must be strictly increasing")
        object.__setattr__(self, "cuts", cuts)

    @property
    def n_categories(self) -> int:
        return len(self.cuts) + 1


@dataclass(frozen=True)
class ScdConfig:
    bins: int = 256
    side: int = 112
    threshold_fraction: float = 0.45
    channel: int = 0

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.side < 1:
            raise ValueError("side must be >= 1")
        if not 0.0 < self.threshold_fraction <= 1.0:
            raise ValueError("threshold_fraction must be in (0, 1]")


def scharr_edge_map(frame: GrayFrame) -> EdgeMap:
    """Per-pixel L2 norm of the horizontal and vertical Scharr responses.

    Borders are replicated, so the output has the input's shape.
    """
    if frame.width < 3 or frame.height < 3:
        raise ValueError("Scharr edge map needs a frame of at least 3x3")
    p = np.pad(frame.pixels.astype(np.int64), 1, mode="edge")
    h, w = frame.height, frame.width

    def win(dy, dx):
        return p[dy:dy + h, dx:dx + w]

    gx = 3 * (win(0, 0) - win(0, 2)) + 10 * (win(1, 0) - win(1, 2)) + 3 * (win(2, 0) - win(2, 2))
    gy = 3 * (win(0, 0) - win(2, 0)) + 10 * (win(0, 1) - win(2, 1)) + 3 * (win(0, 2) - win(2, 2))
    return EdgeMap(np.sqrt((gx * gx + gy * gy).astype(np.float64)))


def mean_edge_value(edges: EdgeMap) -> float:
    m = edges.magnitudes
    if m.size == 0:
        raise ValueError("edge map is empty")
    return float(min(1.0, max(0.0, float(m.mean()) / MAX_EDGE_MAGNITUDE)))


def categorize(mev: float, bounds: CategoryBoundaries) -> int:
    """1-based category; a value equal to a cut falls in the upper category."""
    return 1 + bisect.bisect_right(bounds.cuts, mev)


def frame_mev(frame: Frame) -> float:
    return mean_edge_value(scharr_edge_map(to_grayscale(frame)))


def categorize_frame(frame: Frame, bounds: CategoryBoundaries) -> int:
    return categorize(frame_mev(frame), bounds)


def scd_histogram(frame: Frame, cfg: ScdConfig) -> np.ndarray:
    plane = resize_nearest(extract_channel(frame, cfg.channel), cfg.side, cfg.side)
    idx = plane.pixels.astype(np.int64).ravel() * cfg.bins // 256
    return np.bincount(idx, minlength=cfg.bins)


def histogram_distance(h_prev: np.ndarray, h_cur: np.ndarray) -> int:
    return int(np.abs(h_prev - h_cur).sum())


def is_scene_change(h_prev: np.ndarray, h_cur: np.ndarray, cfg: ScdConfig) -> bool:
    return histogram_distance(h_prev, h_cur) > cfg.threshold_fraction * cfg.side * cfg.side


def detect_scene_change(prev: Frame, cur: Frame, cfg: ScdConfig = ScdConfig()) -> bool:
    return is_scene_change(scd_histogram(prev, cfg), scd_histogram(cur, cfg), cfg)


def learn_boundaries(samples, epsilon: float = 0.05, min_samples: int = 20,
                     max_categories: int = 16) -> CategoryBoundaries:
    """Derive category cuts by recursive median bisection of the mev range.

    ``samples`` is a sequence of ``(mev, accuracy_vector)`` pairs.  A segment is
    split at its median mev when both halves keep at least ``min_samples``
    samples and their mean accuracy vectors differ by more than ``epsilon``
    in max-norm.  Segments are refined breadth-first until no split is
    accepted or ``max_categories`` leaves exist.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("learn_boundaries needs at least one sample")
    if len(samples) < 2:
        raise ValueError("learn_boundaries needs at least two samples")
    width = len(samples[0][1])
    if any(len(acc) != width for _, acc in samples):
        raise ValueError("accuracy vectors cover different branch sets")
    order = sorted(range(len(samples)), key=lambda i: samples[i][0])
    mev = np.array([samples[i][0] for i in order], dtype=float)
    acc = np.array([samples[i][1] for i in order], dtype=float).reshape(len(samples), width)

    cuts = []
    queue = deque([(0, len(mev))])
    leaves = 1
    while queue and leaves < max_categories:
        lo, hi = queue.popleft()
        seg = mev[lo:hi]
        cut = float(np.median(seg))
        mid = lo + int(np.searchsorted(seg, cut, side="left"))
        if mid - lo < max(min_samples, 1) or hi - mid < max(min_samples, 1):
            continue
        if not (seg[0] < cut < seg[-1] and 0.0 < cut < 1.0):
            continue
        diff = np.abs(acc[lo:mid].mean(axis=0) - acc[mid:hi].mean(axis=0))
        if diff.max() <= epsilon:
            continue
        cuts.append(cut)
        leaves += 1
        queue.append((lo, mid))
        queue.append((mid, hi))
    return CategoryBoundaries(tuple(sorted(cuts)))


def store_boundaries(bounds: CategoryBoundaries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cut"])
        for c in bounds.cuts:
            w.writerow([f"{c:.9g}"])


def load_boundaries(path) -> CategoryBoundaries:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["cut"]:
        raise ValueError(f"{path}: expected header 'cut'")
    return CategoryBoundaries(tuple(float(r[0]) for r in rows[1:] if r))
