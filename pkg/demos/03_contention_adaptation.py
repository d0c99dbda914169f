"""
Adapting to resource contention
===============================

Contention ramps from idle to the heaviest level in 300-frame phases.  The
adaptive loop keeps the frame interval; a single pinned branch does not.
"""

from abranch.branches import ApproxBranch
from abranch.executor import ContentionTrace, SimExecutorConfig, SimulatedExecutor
from abranch.fixtures import table4a_fixture
from abranch.pipeline import PipelineConfig, run_stream
from abranch.synth import synth_frames

fx = table4a_fixture()
contention = ContentionTrace(tuple((300 * c, c) for c in range(10)))
frames, labels, _ = synth_frames(3000, 10, seed=6)
trace = list(zip(frames, labels))


def run(profiles):
    ex = SimulatedExecutor(profiles, SimExecutorConfig(seed=6, jitter=fx.jitter, labels=fx.labels),
                           fx.boundaries)
    return run_stream(trace, contention, profiles, PipelineConfig(boundaries=fx.boundaries), ex)


adaptive, records = run(fx.profiles)
pinned, _ = run(fx.profiles.restrict([ApproxBranch(128, 4)]))

# %%
# Mean total latency per contention phase, with the branch used most often.
print("level  adaptive_ms  miss   pinned_ms  miss   main branch")
phases_a = [p for p in adaptive.phases if p.kind == "contention"]
phases_p = [p for p in pinned.phases if p.kind == "contention"]
for a, p in zip(phases_a, phases_p):
    used = [(r.side, r.outport) for r in records[a.start:a.end]]
    side, out = max(set(used), key=used.count)
    print(f"{a.label:>5}  {a.mean_total_ms:11.2f}  {a.miss_rate:.3f}  {p.mean_total_ms:9.2f}  "
          f"{p.miss_rate:.3f}  ({side},o{out})")
print(f"switches: {adaptive.switch_count}, accuracy: {adaptive.accuracy:.4f} vs pinned {pinned.accuracy:.4f}")
