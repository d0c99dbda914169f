"""Offline profilers for the accuracy, latency and switch-cost tables."""
from __future__ import annotations

import math
from typing import List, Set, Tuple

import numpy as np
from scipy.optimize import isotonic_regression

from .branches import AccuracyProfile, BranchCatalog, LatencyProfile, SwitchCostMatrix
from .fce import CategoryBoundaries, categorize_frame, frame_mev

PROFILE_DECIMALS = 6


def score_top5(top5, truth) -> bool:
    truth = set(truth)
    if not truth:
        raise ValueError("ground truth label set is empty")
    return not truth.isdisjoint(top5)


def _stable_mean(values) -> float:
    # offsetting by the first sample keeps constant inputs exact
    x0 = values[0]
    return x0 + math.fsum(v - x0 for v in values) / len(values)


def profile_accuracy(samples, catalog: BranchCatalog, executor,
                     boundaries: CategoryBoundaries) -> Tuple[AccuracyProfile, Set[int]]:
    """Per (branch, category) fraction of frames with a correct top-5.

    ``samples`` yields ``(frame, labels)`` or ``(frame, labels, path)``.
    Returns the profile and the set of categories that had no frames and
    copied the nearest populated category.
    """
    n_cat = boundaries.n_categories
    hits = np.zeros((len(catalog), n_cat))
    counts = np.zeros(n_cat, dtype=int)
    seen = False
    for item in samples:
        frame, labels = item[0], item[1]
        path = item[2] if len(item) > 2 else None
        if not labels:
            raise ValueError("every frame used for accuracy profiling needs labels")
        seen = True
        cat = categorize_frame(frame, boundaries)
        counts[cat - 1] += 1
        for i, b in enumerate(catalog.branches):
            res = executor.infer(b, frame, path=path, labels=labels, level=0, category=cat)
            hits[i, cat - 1] += score_top5(res.top5, labels)
    if not seen:
        raise ValueError("accuracy profiling needs a non-empty trace")
    table = np.zeros_like(hits)
    populated = np.nonzero(counts)[0]
    inherited = set()
    for c in range(n_cat):
        if counts[c]:
            table[:, c] = hits[:, c] / counts[c]
        else:
            # nearest populated category, lower one on ties
            src = populated[np.argmin(np.abs(populated - c))]
            table[:, c] = hits[:, src] / counts[src]
            inherited.add(c + 1)
    return AccuracyProfile(catalog, table), inherited


def profile_latency(catalog: BranchCatalog, executor, levels: int, repetitions: int,
                    warmup: int = 3, frame=None, path=None):
    """Mean pure inference latency per (branch, level).

    The first ``warmup`` of the ``repetitions`` calls are discarded.  Columns
    that come out non-monotone because of noise are repaired by isotonic
    regression.  Returns the profile and the set of repaired branches.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if levels < 1:
        raise ValueError("need at least one contention level")
    skip = min(warmup, repetitions - 1)
    table = np.zeros((len(catalog), levels))
    repaired = set()
    for i, b in enumerate(catalog.branches):
        for c in range(levels):
            lats = [executor.infer(b, frame, path=path, level=c).infer_ms
                    for _ in range(repetitions)]
            table[i, c] = _stable_mean(lats[skip:])
        if np.any(np.diff(table[i]) < 0):
            table[i] = isotonic_regression(table[i], increasing=True).x
            repaired.add(b)
    return LatencyProfile(catalog, np.round(table, PROFILE_DECIMALS)), repaired


def profile_switch_costs(catalog: BranchCatalog, executor, repetitions: int,
                         frame=None, path=None) -> SwitchCostMatrix:
    """Mean extra latency of the first inference after switching ``p -> q``."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    n = len(catalog)
    table = np.zeros((n, n))
    for j, q in enumerate(catalog.branches):
        for i, p in enumerate(catalog.branches):
            if i == j:
                continue
            extra = []
            for _ in range(repetitions):
                executor.infer(q, frame, path=path, level=0)
                steady = executor.infer(q, frame, path=path, level=0).latency_ms
                executor.infer(p, frame, path=path, level=0)
                switched = executor.infer(q, frame, path=path, level=0).latency_ms
                extra.append(switched - steady)
            table[i, j] = max(0.0, _stable_mean(extra))
    return SwitchCostMatrix(catalog, np.round(table, PROFILE_DECIMALS))


def accuracy_samples(samples, catalog: BranchCatalog, executor) -> List[Tuple[float, List[float]]]:
    """Per-frame ``(mev, correctness vector over branches)`` for boundary learning."""
    out = []
    for item in samples:
        frame, labels = item[0], item[1]
        path = item[2] if len(item) > 2 else None
        if not labels:
            raise ValueError("every frame used for boundary learning needs labels")
        vec = [float(score_top5(executor.infer(b, frame, path=path, labels=labels,
                                               level=0).top5, labels))
               for b in catalog.branches]
        out.append((frame_mev(frame), vec))
    return out
