"""Inference backends.

``SimulatedExecutor`` draws latency from a latency profile (with multiplicative
jitter) and correctness from an accuracy profile.  ``ExternalExecutor`` talks
to a real model process over a newline-delimited request/response protocol::

    -> INFER <side> <outport> <frame-path>
    <- OK <latency_ms> <l1>,<l2>,<l3>,<l4>,<l5>
    <- ERR <message>
"""
from __future__ import annotations

import bisect
import csv
import json
import math
import select
import shlex
import socket
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Optional, Sequence, Tuple

import numpy as np

from .branches import (AccuracyProfile, ApproxBranch, BranchCatalog, LatencyProfile, ProfileSet,
                       SwitchCostMatrix)
from .fce import CategoryBoundaries, categorize_frame
from .frameio import Frame


@dataclass(frozen=True)
class InferenceResult:
    top5: Tuple[str, ...]
    infer_ms: float
    branch: ApproxBranch
    switch_ms: float = 0.0
    reported_ms: Optional[float] = None

    @property
    def latency_ms(self) -> float:
        """Measured latency including any realized switch cost."""
        return self.infer_ms + self.switch_ms


@dataclass(frozen=True)
class SimExecutorConfig:
    seed: int = 0
    jitter: float = 0.02
    labels: Tuple[str, ...] = tuple(f"class{i:02d}" for i in range(30))
    switch_costs: Optional[SwitchCostMatrix] = None

    def __post_init__(self):
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")
        if len(set(self.labels)) < 2:
            raise ValueError("label universe needs at least two labels")
        object.__setattr__(self, "labels", tuple(self.labels))


def _truncated_normal(rng: np.random.Generator) -> float:
    while True:
        z = rng.standard_normal()
        if -3.0 <= z <= 3.0:
            return float(z)


def _draw_top5(rng, truth: FrozenSet[str], universe: Sequence[str], correct: bool):
    truth_sorted = sorted(truth)
    distractors = [lab for lab in universe if lab not in truth]
    n_distract = min(4 if correct and truth_sorted else 5, len(distractors))
    picks = [distractors[i] for i in rng.choice(len(distractors), n_distract, replace=False)]
    if correct and truth_sorted:
        hit = truth_sorted[int(rng.integers(len(truth_sorted)))]
        picks.insert(int(rng.integers(n_distract + 1)), hit)
    return tuple(picks)


def simulate_inference(branch: ApproxBranch, truth, category: int, level: int,
                       prev: Optional[ApproxBranch], profiles: ProfileSet,
                       cfg: SimExecutorConfig, rng: np.random.Generator) -> InferenceResult:
    """One simulated inference.

    Draw order per call is fixed (jitter, correctness, labels) so a seeded
    generator reproduces the same result sequence.
    """
    if branch not in profiles.catalog:
        raise KeyError(f"branch {branch} not in catalog")
    if not 0 <= level < profiles.latency.levels:
        raise IndexError(f"contention level {level} outside 0..{profiles.latency.levels - 1}")
    base = profiles.latency.get(branch, level)
    infer = base * (1.0 + cfg.jitter * _truncated_normal(rng))
    switch = 0.0
    if prev is not None and prev != branch:
        costs = cfg.switch_costs if cfg.switch_costs is not None else profiles.switch
        switch = costs.get(prev, branch)
    p = profiles.accuracy.get(branch, category)
    correct = bool(rng.random() < p)
    top5 = _draw_top5(rng, frozenset(truth or ()), cfg.labels, correct)
    return InferenceResult(top5=top5, infer_ms=infer, branch=branch, switch_ms=switch)


class SimulatedExecutor:
    """Profile-driven stand-in for the model.

    The content category used for the correctness draw is computed from the
    frame itself with ``boundaries``; it is independent of whatever category
    the scheduler believes in.
    """

    def __init__(self, profiles: ProfileSet, cfg: SimExecutorConfig = SimExecutorConfig(),
                 boundaries: CategoryBoundaries = CategoryBoundaries()):
        self.profiles = profiles
        self.cfg = cfg
        self.boundaries = boundaries
        self.rng = np.random.default_rng(cfg.seed)
        self.prev: Optional[ApproxBranch] = None

    @property
    def catalog(self) -> BranchCatalog:
        return self.profiles.catalog

    @property
    def levels(self) -> int:
        return self.profiles.latency.levels

    def content_category(self, frame: Optional[Frame]) -> int:
        if frame is None:
            return 1
        cat = categorize_frame(frame, self.boundaries)
        return min(cat, self.profiles.accuracy.n_categories)

    def infer(self, branch: ApproxBranch, frame: Optional[Frame] = None, *, path=None,
              labels=None, level: int = 0, category: Optional[int] = None) -> InferenceResult:
        if category is None:
            category = self.content_category(frame)
        res = simulate_inference(branch, labels, category, level, self.prev, self.profiles,
                                 self.cfg, self.rng)
        self.prev = branch
        return res


class ProtocolError(RuntimeError):
    pass


class ResponderError(RuntimeError):
    pass


class InferenceTimeout(TimeoutError):
    pass


class ProtocolChannel:
    """Line-oriented byte stream with a read timeout."""

    def __init__(self, reader, writer, timeout_ms: float = 5000.0, closer=None):
        self.reader = reader
        self.writer = writer
        self.timeout_ms = timeout_ms
        self._closer = closer

    @classmethod
    def connect(cls, host: str, port: int, timeout_ms: float = 5000.0) -> "ProtocolChannel":
        sock = socket.create_connection((host, port), timeout=timeout_ms / 1000.0)
        return cls.from_socket(sock, timeout_ms)

    @classmethod
    def from_socket(cls, sock: socket.socket, timeout_ms: float = 5000.0) -> "ProtocolChannel":
        sock.settimeout(timeout_ms / 1000.0)
        rw = sock.makefile("rwb", buffering=0)
        return cls(rw, rw, timeout_ms, closer=lambda: (rw.close(), sock.close()))

    @classmethod
    def spawn(cls, command, timeout_ms: float = 5000.0) -> "ProtocolChannel":
        if isinstance(command, str):
            command = shlex.split(command)
        # unbuffered so select() never misses a line already read into a buffer
        proc = subprocess.Popen(command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0)

        def close():
            proc.stdin.close()
            proc.terminate()
            proc.wait()

        return cls(proc.stdout, proc.stdin, timeout_ms, closer=close)

    @classmethod
    def open(cls, endpoint: str, timeout_ms: float = 5000.0) -> "ProtocolChannel":
        """``host:port`` for TCP, ``exec:<command>`` to spawn a responder."""
        if endpoint.startswith("exec:"):
            return cls.spawn(endpoint[5:], timeout_ms)
        host, sep, port = endpoint.rpartition(":")
        if not sep or not port.isdigit():
            raise ValueError(f"endpoint must be host:port or exec:<command>, got {endpoint!r}")
        return cls.connect(host or "127.0.0.1", int(port), timeout_ms)

    def send_line(self, line: str) -> None:
        self.writer.write((line + "\n").encode("utf-8"))
        self.writer.flush()

    def read_line(self) -> str:
        try:
            fd = self.reader.fileno()
        except (AttributeError, OSError):
            fd = None
        if fd is not None:
            ready, _, _ = select.select([fd], [], [], self.timeout_ms / 1000.0)
            if not ready:
                raise InferenceTimeout(f"no response within {self.timeout_ms:g} ms")
        try:
            raw = self.reader.readline()
        except (socket.timeout, TimeoutError):
            raise InferenceTimeout(f"no response within {self.timeout_ms:g} ms") from None
        if not raw:
            raise ProtocolError("responder closed the stream")
        try:
            return raw.decode("utf-8").rstrip("\r\n")
        except UnicodeDecodeError:
            raise ProtocolError("response is not valid UTF-8") from None

    def close(self):
        if self._closer:
            self._closer()
            self._closer = None


def parse_response(line: str) -> Tuple[float, Tuple[str, ...]]:
    if line.startswith("ERR"):
        if line != "ERR" and not line.startswith("ERR "):
            raise ProtocolError(f"garbled response {line!r}")
        raise ResponderError(line[4:])
    parts = line.split(" ")
    if len(parts) != 3 or parts[0] != "OK":
        raise ProtocolError(f"garbled response {line!r}")
    try:
        reported = float(parts[1])
    except ValueError:
        raise ProtocolError(f"bad latency field in {line!r}") from None
    if not math.isfinite(reported) or reported <= 0:
        raise ProtocolError(f"bad latency field in {line!r}")
    labels = tuple(parts[2].split(","))
    if not 1 <= len(labels) <= 5 or not all(labels):
        raise ProtocolError(f"expected 1-5 comma-separated labels in {line!r}")
    return reported, labels


def external_infer(branch: ApproxBranch, frame_path, channel: ProtocolChannel) -> InferenceResult:
    start = time.perf_counter()
    channel.send_line(f"INFER {branch.side} {branch.outport} {frame_path}")
    line = channel.read_line()
    wall = (time.perf_counter() - start) * 1000.0
    reported, labels = parse_response(line)
    return InferenceResult(top5=labels, infer_ms=wall, branch=branch, reported_ms=reported)


class ExternalExecutor:
    def __init__(self, channel: ProtocolChannel, catalog: BranchCatalog, levels: int = 1):
        self.channel = channel
        self.catalog = catalog
        self.levels = levels

    def infer(self, branch: ApproxBranch, frame: Optional[Frame] = None, *, path=None,
              labels=None, level: int = 0, category: Optional[int] = None) -> InferenceResult:
        if path is None:
            raise ValueError("external inference needs the frame path")
        return external_infer(branch, path, self.channel)


@dataclass(frozen=True)
class ContentionTrace:
    segments: Tuple[Tuple[int, int], ...] = ((0, 0),)

    def __post_init__(self):
        segs = tuple((int(s), int(l)) for s, l in self.segments)
        if not segs or segs[0][0] != 0:
            raise ValueError("contention trace must start at frame 0")
        if any(b[0] <= a[0] for a, b in zip(segs, segs[1:])):
            raise ValueError("segment starts must be strictly increasing")
        if any(l < 0 for _, l in segs):
            raise ValueError("contention levels must be >= 0")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", [s for s, _ in segs])

    @property
    def max_level(self) -> int:
        return max(l for _, l in self.segments)

    def segment_index(self, frame_index: int) -> int:
        return bisect.bisect_right(self._starts, frame_index) - 1


def contention_at(trace: ContentionTrace, frame_index: int) -> int:
    return trace.segments[trace.segment_index(frame_index)][1]


def load_contention(path) -> ContentionTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["start_frame", "level"]:
        raise ValueError(f"{path}: expected header start_frame,level")
    try:
        segs = tuple((int(r[0]), int(r[1])) for r in rows[1:] if r)
    except (ValueError, IndexError):
        raise ValueError(f"{path}: malformed row") from None
    return ContentionTrace(segs)


def store_contention(trace: ContentionTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_frame", "level"])
        w.writerows(trace.segments)


@dataclass(frozen=True, eq=False)
class SimFixture:
    """Ground truth for a simulated model: profiles, labels, jitter, boundaries."""

    name: str
    profiles: ProfileSet
    boundaries: CategoryBoundaries
    jitter: float
    labels: Tuple[str, ...]

    def executor(self, seed: int = 0, jitter: Optional[float] = None) -> SimulatedExecutor:
        cfg = SimExecutorConfig(seed=seed, jitter=self.jitter if jitter is None else jitter,
                                labels=self.labels)
        return SimulatedExecutor(self.profiles, cfg, self.boundaries)

    def to_json(self) -> dict:
        cat = self.profiles.catalog
        return {
            "name": self.name,
            "jitter": self.jitter,
            "labels": list(self.labels),
            "boundaries": list(self.boundaries.cuts),
            "factors": list(cat.factors),
            "branches": [
                {"side": b.side, "outport": b.outport,
                 "latency_ms": [float(v) for v in self.profiles.latency.row(b)],
                 "accuracy": [float(v) for v in self.profiles.accuracy.table[i]]}
                for i, b in enumerate(cat.branches)
            ],
            "switch_cost_ms": [[float(v) for v in row] for row in self.profiles.switch.table],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SimFixture":
        rows = data["branches"]
        branches = [ApproxBranch(int(r["side"]), int(r["outport"])) for r in rows]
        catalog = BranchCatalog(tuple(branches), tuple(data.get("factors", (8, 8, 16, 16, 16, 32))))
        order = [branches.index(b) for b in catalog.branches]
        lat = np.array([rows[i]["latency_ms"] for i in order], dtype=float)
        acc = np.array([rows[i]["accuracy"] for i in order], dtype=float)
        sw = np.array(data.get("switch_cost_ms", np.zeros((len(rows), len(rows)))), dtype=float)
        sw = sw[np.ix_(order, order)]
        profiles = ProfileSet(AccuracyProfile(catalog, acc), LatencyProfile(catalog, lat),
                              SwitchCostMatrix(catalog, sw))
        return cls(data.get("name", "fixture"), profiles,
                   CategoryBoundaries(tuple(data.get("boundaries", ()))),
                   float(data.get("jitter", 0.02)), tuple(data["labels"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "SimFixture":
        return cls.from_json(json.loads(Path(path).read_text()))
