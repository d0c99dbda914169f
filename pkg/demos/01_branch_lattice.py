"""
The branch lattice and its trade-off frontier
=============================================

A branch is an (input side, exit outport) pair.  An exit is only usable if
the feature map it sees is at least 7 pixels wide.
"""

import numpy as np

from abranch.branches import TradeoffPoint, enumerate_branches, outport_feature_side, pareto_frontier
from abranch.fixtures import table4a_fixture

# %%
# Feature-map side per (shape, outport); dashes mark unusable exits.
catalog = enumerate_branches()
print("side  " + "  ".join(f"o{o}" for o in range(1, 7)))
for side in (224, 192, 160, 128, 112, 96, 80):
    cells = []
    for o in range(1, 7):
        fs = outport_feature_side(side, o)
        cells.append(f"{fs:2d}" if fs >= 7 else "--")
    print(f"{side:4d}  " + "  ".join(cells))
print(f"{len(catalog)} usable branches")

# %%
# The eight measured branches all sit on the frontier at idle.
fx = table4a_fixture()
lat = fx.profiles.latency.column(0)
acc = fx.profiles.accuracy.column(1)
points = [TradeoffPoint(b, float(l), float(a)) for b, l, a in zip(fx.profiles.catalog, lat, acc)]
for p in pareto_frontier(points):
    print(f"({p.branch.side},o{p.branch.outport})  {p.latency:6.2f} ms  {p.accuracy:.4f}")

# %%
# Random clouds: how much of a cloud survives the dominance filter?
rng = np.random.default_rng(0)
branches = catalog.branches
for n in (8, 32, 64):
    sizes = []
    for _ in range(200):
        idx = rng.integers(0, len(branches), n)
        pts = [TradeoffPoint(branches[i], float(rng.uniform(10, 40)), float(rng.uniform(0.5, 0.9)))
               for i in idx]
        sizes.append(len(pareto_frontier(pts)))
    print(f"n={n:2d}: mean frontier size {np.mean(sizes):.2f}")
