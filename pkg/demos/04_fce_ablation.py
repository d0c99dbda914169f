"""
What the complexity estimator buys
==================================

With an accuracy profile that depends on content, knowing the category lets
the scheduler spend latency only where it pays off.  The price is the
categorizer's own cost on scene-change frames.
"""

from abranch.executor import ContentionTrace
from abranch.fixtures import ablation_fixture
from abranch.pipeline import PipelineConfig, run_stream
from abranch.synth import synth_frames

fx = ablation_fixture()
frames, labels, _ = synth_frames(3000, 20, seed=12)
trace = list(zip(frames, labels))

for enabled in (True, False):
    cfg = PipelineConfig(fce_enabled=enabled, boundaries=fx.boundaries)
    m, recs = run_stream(trace, ContentionTrace(), fx.profiles, cfg, fx.executor(12))
    cats = sorted({r.category for r in recs})
    print(f"fce={'on ' if enabled else 'off'}  accuracy {m.accuracy:.4f}  mean {m.mean_total_ms:.2f} ms  "
          f"FCC passes {m.fcc_count}  categories seen {cats}")

# %%
# Per-frame overhead charged with the estimator on.
cfg = PipelineConfig(fce_enabled=True, boundaries=fx.boundaries)
_, recs = run_stream(trace, ContentionTrace(), fx.profiles, cfg, fx.executor(12))
fcc = sorted({r.overhead_ms for r in recs if r.fcc_ran})
other = sorted({r.overhead_ms for r in recs if not r.fcc_ran})
print(f"overhead on categorizer frames {fcc} ms, elsewhere {other} ms")
