"""Plain-text phase tables built from frame logs."""
from __future__ import annotations

from typing import List, Optional, Sequence

from .pipeline import PhaseMetrics, RunMetrics

COLUMNS = ("phase", "label", "frames", "mean_ms", "p95_ms", "accuracy", "miss_rate", "switches")


def _fmt(v: Optional[float], digits=3) -> str:
    return "n/a" if v is None else f"{v:.{digits}f}"


def _row(p: PhaseMetrics) -> List[str]:
    return [f"{p.kind}{p.index}[{p.start},{p.end})", p.label, str(p.frames),
            _fmt(p.mean_total_ms), _fmt(p.p95_total_ms), _fmt(p.accuracy, 4),
            _fmt(p.miss_rate, 4), str(p.switches)]


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def summary_lines(m: RunMetrics) -> List[str]:
    return [f"frames={m.frames}", f"mean_total_ms={_fmt(m.mean_total_ms)}",
            f"p95_total_ms={_fmt(m.p95_total_ms)}", f"accuracy={_fmt(m.accuracy, 4)}",
            f"miss_rate={_fmt(m.miss_rate, 4)}", f"switch_count={m.switch_count}"]


def render_report(m: RunMetrics, title: str = "") -> str:
    out = [title] if title else []
    out += summary_lines(m)
    for kind in ("req", "contention"):
        rows = [_row(p) for p in m.phases if p.kind == kind]
        if rows:
            out += ["", _table(COLUMNS, rows)]
    return "\n".join(out) + "\n"


def _delta(a: Optional[float], b: Optional[float], digits=3) -> str:
    if a is None or b is None:
        return "n/a"
    return f"{b - a:+.{digits}f}"


def render_comparison(a: RunMetrics, b: RunMetrics, names=("A", "B")) -> str:
    """Side-by-side phase metrics of two runs with ``B - A`` deltas."""
    header = ("phase", "label", f"mean_ms[{names[0]}]", f"mean_ms[{names[1]}]", "d_mean_ms",
              f"acc[{names[0]}]", f"acc[{names[1]}]", "d_acc", "d_miss_rate", "d_switches")
    rows = [["overall", "all", _fmt(a.mean_total_ms), _fmt(b.mean_total_ms),
             _delta(a.mean_total_ms, b.mean_total_ms), _fmt(a.accuracy, 4), _fmt(b.accuracy, 4),
             _delta(a.accuracy, b.accuracy, 4), _delta(a.miss_rate, b.miss_rate, 4),
             f"{b.switch_count - a.switch_count:+d}"]]
    keyed = {(p.kind, p.index): p for p in b.phases}
    for p in a.phases:
        q = keyed.get((p.kind, p.index))
        if q is None:
            continue
        rows.append([f"{p.kind}{p.index}", p.label, _fmt(p.mean_total_ms), _fmt(q.mean_total_ms),
                     _delta(p.mean_total_ms, q.mean_total_ms), _fmt(p.accuracy, 4),
                     _fmt(q.accuracy, 4), _delta(p.accuracy, q.accuracy, 4),
                     _delta(p.miss_rate, q.miss_rate, 4), f"{q.switches - p.switches:+d}"])
    return _table(header, rows) + "\n"
