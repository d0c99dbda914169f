"""Command-line entry point: ``abranch {synth,profile,run,report}``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .branches import ProfileSet, load_profiles, store_profiles
from .executor import (ContentionTrace, ExternalExecutor, ProtocolChannel, SimFixture,
                       load_contention)
from .fce import CategoryBoundaries, learn_boundaries, load_boundaries, store_boundaries
from .fixtures import FIG7_CUTS, load_builtin_fixture
from .frameio import load_frame, load_trace
from .pipeline import PipelineConfig, compute_metrics, read_log, run_stream, write_metrics
from .profiler import accuracy_samples, profile_accuracy, profile_latency, profile_switch_costs
from .report import render_comparison, render_report
from .scheduler import UserRequirement
from .synth import write_trace

log = logging.getLogger("abranch")


class UsageError(Exception):
    pass


def default_seed() -> int:
    env = os.environ.get("ABRANCH_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"ABRANCH_SEED must be an integer, got {env!r}") from None


def parse_schedule(specs):
    """``['accuracy=0.77@0', 'latency=20@100']`` -> ((0, req), (100, req))."""
    if not specs:
        return ((0, UserRequirement("rt")),)
    sched = []
    for text in specs:
        spec, sep, at = text.partition("@")
        try:
            start = int(at) if sep else 0
            req = UserRequirement.parse(spec)
        except ValueError as exc:
            raise UsageError(f"--req {text!r}: {exc}") from None
        sched.append((start, req))
    sched.sort(key=lambda t: t[0])
    starts = [s for s, _ in sched]
    if starts[0] != 0 or len(set(starts)) != len(starts):
        raise UsageError("--req schedule needs one requirement at frame 0 and distinct start frames")
    return tuple(sched)


def _open_executor(args, catalog, levels):
    if getattr(args, "connect", None):
        return ExternalExecutor(ProtocolChannel.open(args.connect, args.timeout_ms), catalog,
                                levels)
    fixture = _load_fixture(args)
    return fixture.executor(seed=args.seed)


def _load_fixture(args) -> SimFixture:
    if getattr(args, "sim_fixture", None):
        return SimFixture.load(args.sim_fixture)
    return load_builtin_fixture("table4a")


def cmd_synth(args) -> int:
    if args.frames < 1 or args.scenes < 1:
        raise UsageError("--frames and --scenes must be >= 1")
    if args.scenes > args.frames:
        raise UsageError(f"--scenes {args.scenes} exceeds --frames {args.frames}")
    path = write_trace(args.out, args.frames, args.scenes, seed=args.seed, size=args.size,
                       fps=args.fps)
    print(path)
    return 0


def cmd_profile(args) -> int:
    if args.levels < 1 or args.reps < 1:
        raise UsageError("--levels and --reps must be >= 1")
    trace = load_trace(args.trace)
    if args.connect:
        catalog_src = load_profiles(args.catalog_from).catalog if args.catalog_from else None
        if catalog_src is None:
            raise UsageError("--connect needs --catalog-from <profiles dir> to know the branch set")
        catalog = catalog_src
        executor = _open_executor(args, catalog, args.levels)
    else:
        fixture = _load_fixture(args)
        if args.levels > fixture.profiles.latency.levels:
            raise UsageError(f"--levels {args.levels} exceeds the fixture's "
                             f"{fixture.profiles.latency.levels} levels")
        catalog = fixture.profiles.catalog
        executor = fixture.executor(seed=args.seed)

    samples = [(load_frame(e.path), e.labels, e.path) for e in trace.entries]
    if args.boundaries:
        bounds = load_boundaries(args.boundaries)
    elif args.learn_boundaries:
        bounds = learn_boundaries(accuracy_samples(samples, catalog, executor),
                                  epsilon=args.epsilon, min_samples=args.min_samples)
    elif not args.connect:
        bounds = fixture.boundaries
    else:
        bounds = CategoryBoundaries(FIG7_CUTS)

    acc, inherited = profile_accuracy(samples, catalog, executor, bounds)
    first_frame, _, first_path = samples[0]
    lat, repaired = profile_latency(catalog, executor, args.levels, args.reps,
                                    warmup=args.warmup, frame=first_frame, path=first_path)
    sw = profile_switch_costs(catalog, executor, max(1, args.switch_reps),
                              frame=first_frame, path=first_path)
    out = Path(args.out)
    store_profiles(ProfileSet(acc, lat, sw), out)
    store_boundaries(bounds, out / "boundaries.csv")
    if inherited:
        log.warning("categories without frames copied a neighbour: %s", sorted(inherited))
    if repaired:
        log.warning("isotonic repair applied to %d latency rows", len(repaired))
    print(out)
    return 0


def cmd_run(args) -> int:
    schedule = parse_schedule(args.req)
    trace = load_trace(args.trace)
    profiles = load_profiles(args.profiles)
    contention = load_contention(args.contention) if args.contention else ContentionTrace()
    if args.boundaries:
        bounds = load_boundaries(args.boundaries)
    elif (Path(args.profiles) / "boundaries.csv").is_file():
        bounds = load_boundaries(Path(args.profiles) / "boundaries.csv")
    else:
        bounds = CategoryBoundaries(FIG7_CUTS)
    if bounds.n_categories > profiles.accuracy.n_categories:
        raise UsageError("boundaries define more categories than the accuracy profile")
    fps = args.fps if args.fps else trace.fps
    config = PipelineConfig(schedule=schedule, fce_enabled=not args.no_fce, boundaries=bounds,
                            fps=fps, seed=args.seed, scheduler_overhead_ms=args.overhead_ms)
    executor = _open_executor(args, profiles.catalog, profiles.latency.levels)
    metrics, _ = run_stream(trace, contention, profiles, config, executor, log_path=args.log)
    base = Path(args.metrics) if args.metrics else Path(str(args.log) + ".metrics.txt")
    write_metrics(metrics, base, base.with_suffix(".csv"))
    print(render_report(metrics), end="")
    return 0


def cmd_report(args) -> int:
    schedule = parse_schedule(args.req) if args.req else None
    req_phases = [(s, str(r)) for s, r in schedule] if schedule else None
    runs = [compute_metrics(read_log(p), req_phases) for p in args.log]
    if args.compare:
        if len(runs) != 2:
            raise UsageError("--compare needs exactly two --log files")
        print(render_comparison(runs[0], runs[1], names=("1", "2")), end="")
    else:
        for path, m in zip(args.log, runs):
            print(render_report(m, title=f"== {path}"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abranch", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic trace with known scene cuts")
    s.add_argument("--out", required=True)
    s.add_argument("--frames", type=int, required=True)
    s.add_argument("--scenes", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--size", type=int, default=96)
    s.add_argument("--fps", type=float, default=30.0)
    s.set_defaults(func=cmd_synth)

    def executor_flags(q):
        g = q.add_mutually_exclusive_group()
        g.add_argument("--sim-fixture", help="JSON fixture for the simulated executor")
        g.add_argument("--connect", help="host:port or exec:<command> of a model process")
        q.add_argument("--timeout-ms", type=float, default=5000.0)
        q.add_argument("--seed", type=int)

    s = sub.add_parser("profile", help="build accuracy, latency and switch-cost profiles")
    s.add_argument("--trace", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--levels", type=int, default=10)
    s.add_argument("--reps", type=int, default=20)
    s.add_argument("--warmup", type=int, default=3)
    s.add_argument("--switch-reps", type=int, default=3)
    s.add_argument("--boundaries", help="category boundaries CSV to use instead of learning")
    s.add_argument("--learn-boundaries", action="store_true")
    s.add_argument("--epsilon", type=float, default=0.05)
    s.add_argument("--min-samples", type=int, default=20)
    s.add_argument("--catalog-from", help="profiles dir providing the branch set for --connect")
    executor_flags(s)
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("run", help="stream a trace through the adaptive pipeline")
    s.add_argument("--trace", required=True)
    s.add_argument("--profiles", required=True)
    s.add_argument("--req", action="append", help="latency=<ms>|accuracy=<f>|rt, optional @<frame>")
    s.add_argument("--contention", help="CSV with start_frame,level")
    s.add_argument("--log", required=True)
    s.add_argument("--metrics")
    s.add_argument("--boundaries")
    s.add_argument("--fps", type=float)
    s.add_argument("--overhead-ms", type=float)
    s.add_argument("--no-fce", action="store_true")
    executor_flags(s)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="per-phase tables from one or more frame logs")
    s.add_argument("--log", action="append", required=True)
    s.add_argument("--req", action="append")
    s.add_argument("--compare", action="store_true")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = default_seed()
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except Exception as exc:
        print(f"abranch {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
