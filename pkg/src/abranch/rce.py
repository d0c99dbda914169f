"""Resource contention estimation from recently observed inference latencies."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Deque, Tuple

import numpy as np

from .branches import ApproxBranch, LatencyProfile


class NoSamplesError(LookupError):
    """The window holds no latency samples for the requested branch."""


@dataclass(frozen=True)
class ContentionEstimate:
    level: int
    samples: int


class LatencyWindow:
    """Ring of the last ``capacity`` ``(branch, latency_ms)`` observations."""

    def __init__(self, capacity: int = 30):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self._samples: Deque[Tuple[ApproxBranch, float]] = deque(maxlen=capacity)

    def observe(self, branch: ApproxBranch, latency_ms: float) -> "LatencyWindow":
        if not latency_ms > 0:
            raise ValueError(f"latency must be positive, got {latency_ms}")
        self._samples.append((branch, float(latency_ms)))
        return self

    def __len__(self):
        return len(self._samples)

    @property
    def samples(self):
        """Samples ordered most-recent-first."""
        return list(reversed(self._samples))

    def latencies_for(self, branch: ApproxBranch):
        return [lat for b, lat in self._samples if b == branch]

    def mean_for(self, branch: ApproxBranch) -> Tuple[float, int]:
        vals = self.latencies_for(branch)
        if not vals:
            raise NoSamplesError(f"no samples for branch {branch}")
        return sum(vals) / len(vals), len(vals)


def nearest_level(row, mean_latency: float) -> int:
    """Index of the profile entry closest to ``mean_latency``; ties go low."""
    # np.argmin returns the first minimum, i.e. the lower level
    return int(np.argmin(np.abs(np.asarray(row, dtype=float) - mean_latency)))


def estimate_contention(window: LatencyWindow, branch: ApproxBranch,
                        profile: LatencyProfile) -> ContentionEstimate:
    mean, n = window.mean_for(branch)
    return ContentionEstimate(nearest_level(profile.row(branch), mean), n)
