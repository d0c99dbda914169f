"""Per-frame streaming loop: SCD -> (gated) FCC -> scheduler -> executor -> RCE."""
from __future__ import annotations

import bisect
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .branches import ApproxBranch, ProfileSet
from .executor import ContentionTrace, contention_at
from .fce import (CategoryBoundaries, ScdConfig, categorize_frame, is_scene_change, scd_histogram)
from .frameio import TraceManifest, load_frame
from .profiler import score_top5
from .rce import LatencyWindow, NoSamplesError, estimate_contention
from .scheduler import (DEFAULT_WINDOW, FCC_OVERHEAD_MS, SCD_OVERHEAD_MS, Scheduler,
                        UserRequirement)

log = logging.getLogger(__name__)

LOG_HEADER = ["frame", "scene_change", "category", "est_level", "true_level", "side", "outport",
              "switched", "satisfied", "infer_ms", "total_ms", "correct", "deadline_miss"]


@dataclass(frozen=True)
class PipelineConfig:
    schedule: Tuple[Tuple[int, UserRequirement], ...] = ((0, UserRequirement("rt")),)
    fce_enabled: bool = True
    scd: ScdConfig = ScdConfig()
    boundaries: CategoryBoundaries = CategoryBoundaries()
    fps: float = 30.0
    seed: int = 0
    window_capacity: int = 30
    initial_window: int = DEFAULT_WINDOW
    # constant L0 used by the scheduler; None picks SCD+FCC (or SCD only without FCE)
    scheduler_overhead_ms: Optional[float] = None

    def __post_init__(self):
        sched = tuple((int(s), r) for s, r in self.schedule)
        if not sched or sched[0][0] != 0:
            raise ValueError("requirement schedule must start at frame 0")
        if any(b[0] <= a[0] for a, b in zip(sched, sched[1:])):
            raise ValueError("requirement schedule starts must be strictly increasing")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "schedule", sched)

    @property
    def overhead_ms(self) -> float:
        if self.scheduler_overhead_ms is not None:
            return self.scheduler_overhead_ms
        return SCD_OVERHEAD_MS + (FCC_OVERHEAD_MS if self.fce_enabled else 0.0)

    def requirement_at(self, frame_index: int) -> UserRequirement:
        starts = [s for s, _ in self.schedule]
        return self.schedule[bisect.bisect_right(starts, frame_index) - 1][1]


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    scene_change: bool
    category: int
    est_level: int
    true_level: int
    side: int
    outport: int
    switched: bool
    satisfied: bool
    infer_ms: float
    total_ms: float
    correct: Optional[bool]
    deadline_miss: bool
    fcc_ran: bool = False
    switch_ms: float = 0.0
    overhead_ms: float = 0.0

    @property
    def branch(self) -> ApproxBranch:
        return ApproxBranch(self.side, self.outport)

    def csv_row(self) -> List[str]:
        def b(v):
            return "1" if v else "0"
        return [str(self.frame), b(self.scene_change), str(self.category), str(self.est_level),
                str(self.true_level), str(self.side), str(self.outport), b(self.switched),
                b(self.satisfied), repr(self.infer_ms), repr(self.total_ms),
                "" if self.correct is None else b(self.correct), b(self.deadline_miss)]


@dataclass
class PhaseMetrics:
    kind: str
    index: int
    start: int
    end: int
    label: str
    frames: int
    mean_total_ms: float
    p95_total_ms: float
    accuracy: Optional[float]
    miss_rate: float
    switches: int


@dataclass
class RunMetrics:
    frames: int
    mean_total_ms: float
    p95_total_ms: float
    accuracy: Optional[float]
    labeled_frames: int
    switch_count: int
    miss_rate: float
    fcc_count: Optional[int]
    phases: List[PhaseMetrics] = field(default_factory=list)

    def as_items(self) -> List[Tuple[str, str]]:
        def fmt(v):
            if v is None:
                return "n/a"
            if isinstance(v, float):
                return repr(v)
            return str(v)
        items = [(k, fmt(getattr(self, k))) for k in
                 ("frames", "mean_total_ms", "p95_total_ms", "accuracy", "labeled_frames",
                  "switch_count", "miss_rate", "fcc_count")]
        for p in self.phases:
            prefix = f"phase.{p.kind}{p.index}"
            for k in ("start", "end", "label", "frames", "mean_total_ms", "p95_total_ms",
                      "accuracy", "miss_rate", "switches"):
                items.append((f"{prefix}.{k}", fmt(getattr(p, k))))
        return items


def _summarize(records: Sequence[FrameRecord]):
    totals = np.array([r.total_ms for r in records])
    labeled = [r.correct for r in records if r.correct is not None]
    return (float(totals.mean()), float(np.percentile(totals, 95)),
            (sum(labeled) / len(labeled)) if labeled else None, len(labeled),
            sum(r.switched for r in records),
            sum(r.deadline_miss for r in records) / len(records))


def _segments(starts: Sequence[int], n: int):
    starts = [s for s in starts if s < n]
    return [(s, (starts[k + 1] if k + 1 < len(starts) else n)) for k, s in enumerate(starts)]


def compute_metrics(records: Sequence[FrameRecord], requirement_phases=None,
                    contention_phases=None, fcc_count: Optional[int] = None) -> RunMetrics:
    """Aggregate a frame log.

    ``requirement_phases`` and ``contention_phases`` are lists of
    ``(start_frame, label)``; when ``contention_phases`` is omitted, runs of
    equal true contention level in the log are used.
    """
    if not records:
        raise ValueError("no frame records")
    n = len(records)
    mean, p95, acc, n_lab, sw, miss = _summarize(records)
    phases = []
    if contention_phases is None:
        contention_phases = []
        for r in records:
            if not contention_phases or contention_phases[-1][1] != str(r.true_level):
                contention_phases.append((r.frame, str(r.true_level)))
    for kind, spec in (("req", requirement_phases or [(0, "all")]),
                       ("contention", contention_phases)):
        labels = dict(spec)
        for k, (s, e) in enumerate(_segments([s for s, _ in spec], n)):
            chunk = records[s:e]
            if not chunk:
                continue
            m, p, a, _, w, r = _summarize(chunk)
            phases.append(PhaseMetrics(kind, k, s, e, str(labels[s]), len(chunk), m, p, a, r, w))
    return RunMetrics(n, mean, p95, acc, n_lab, sw, miss, fcc_count, phases)


class PipelineError(RuntimeError):
    def __init__(self, msg, records):
        super().__init__(msg)
        self.records = records


def _iter_trace(trace):
    if isinstance(trace, TraceManifest):
        for entry in trace.entries:
            yield load_frame(entry.path), entry.labels, entry.path
    else:
        for item in trace:
            yield item[0], item[1], (item[2] if len(item) > 2 else None)


def run_stream(trace, contention: ContentionTrace, profiles: ProfileSet, config: PipelineConfig,
               executor, log_path=None) -> Tuple[RunMetrics, List[FrameRecord]]:
    """Run the adaptive loop over ``trace`` and return metrics and frame records.

    ``trace`` is a :class:`TraceManifest` or an iterable of ``(frame, labels)``
    / ``(frame, labels, path)`` tuples.  When ``log_path`` is given, records are
    streamed to it as CSV, so a failing run leaves a partial log behind.
    """
    if contention.max_level >= profiles.latency.levels:
        raise ValueError(f"contention trace reaches level {contention.max_level}, "
                         f"profile has {profiles.latency.levels} levels")
    n_cat = profiles.accuracy.n_categories
    scheduler = Scheduler(profiles, overhead_ms=config.overhead_ms,
                          window=config.initial_window, fps=config.fps)
    window = LatencyWindow(config.window_capacity)
    deadline = 1000.0 / config.fps
    records: List[FrameRecord] = []
    fcc_count = 0
    category = 1
    est_level = 0
    prev_hist = None

    fh = open(log_path, "w", newline="") if log_path is not None else None
    writer = csv.writer(fh, lineterminator="\n") if fh else None
    if writer:
        writer.writerow(LOG_HEADER)
    try:
        for i, (frame, labels, path) in enumerate(_iter_trace(trace)):
            hist = scd_histogram(frame, config.scd)
            scene_change = prev_hist is None or is_scene_change(prev_hist, hist, config.scd)
            prev_hist = hist
            fcc_ran = scene_change and config.fce_enabled
            if fcc_ran:
                category = min(categorize_frame(frame, config.boundaries), n_cat)
                fcc_count += 1

            current = scheduler.state.current
            if current is not None:
                try:
                    est_level = estimate_contention(window, current, profiles.latency).level
                except NoSamplesError:
                    pass

            req = config.requirement_at(i)
            decision = scheduler.decide(req, category, est_level)
            true_level = contention_at(contention, i)
            try:
                res = executor.infer(decision.branch, frame, path=path, labels=labels,
                                     level=true_level)
            except Exception as exc:
                raise PipelineError(f"frame {i}: executor failed: {exc}", records) from exc
            window.observe(decision.branch, res.infer_ms)

            overhead = SCD_OVERHEAD_MS + (FCC_OVERHEAD_MS if fcc_ran else 0.0)
            total = res.infer_ms + overhead + res.switch_ms
            rec = FrameRecord(
                frame=i, scene_change=scene_change, category=category, est_level=est_level,
                true_level=true_level, side=decision.branch.side,
                outport=decision.branch.outport, switched=decision.switched,
                satisfied=decision.satisfied, infer_ms=res.infer_ms, total_ms=total,
                correct=score_top5(res.top5, labels) if labels else None,
                deadline_miss=total > deadline, fcc_ran=fcc_ran, switch_ms=res.switch_ms,
                overhead_ms=overhead)
            records.append(rec)
            if writer:
                writer.writerow(rec.csv_row())
    finally:
        if fh:
            fh.close()

    if not records:
        raise ValueError("trace is empty")
    req_phases = [(s, str(r)) for s, r in config.schedule]
    con_phases = [(s, str(l)) for s, l in contention.segments]
    metrics = compute_metrics(records, req_phases, con_phases, fcc_count)
    log.info("run finished: %d frames, %d switches, %d FCC passes", len(records),
             metrics.switch_count, fcc_count)
    return metrics, records


def write_log(records: Sequence[FrameRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for r in records:
            w.writerow(r.csv_row())


class LogFormatError(ValueError):
    pass


def read_log(path) -> List[FrameRecord]:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != LOG_HEADER:
        raise LogFormatError(f"{path}: unexpected header")
    out = []
    flag = {"0": False, "1": True}
    for n, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        try:
            if len(r) != len(LOG_HEADER):
                raise ValueError("column count")
            out.append(FrameRecord(
                frame=int(r[0]), scene_change=flag[r[1]], category=int(r[2]),
                est_level=int(r[3]), true_level=int(r[4]), side=int(r[5]), outport=int(r[6]),
                switched=flag[r[7]], satisfied=flag[r[8]], infer_ms=float(r[9]),
                total_ms=float(r[10]), correct=None if r[11] == "" else flag[r[11]],
                deadline_miss=flag[r[12]]))
        except (ValueError, KeyError):
            raise LogFormatError(f"{path} line {n}: malformed record") from None
    if not out:
        raise LogFormatError(f"{path}: no records")
    return out


def write_metrics(metrics: RunMetrics, txt_path, csv_path=None) -> None:
    items = metrics.as_items()
    Path(txt_path).write_text("".join(f"{k}={v}\n" for k, v in items))
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "value"])
            w.writerows(items)
