r"""
Ground truth hulls and BD-rate
------------------------------
Encode every (resolution, QP) pair of the ladder space with the simulated
encoder, pick out the upper-left convex hull, and compare two ladders with
BD-rate.
"""
import numpy as np

from ladderforge.core import Ladder, LadderEntry
from ladderforge.curves import bd_rate
from ladderforge.geometry import ground_truth_hull
from ladderforge.simencoder import ShotComplexity, default_encoder_model, simulate_grid

model = default_encoder_model()
grid, cost = simulate_grid(model, ShotComplexity(spatial=1.2, temporal=0.8), shot_id="demo")
print(f"63 encodes, {cost.seconds:.1f} simulated seconds")

#%%
# Rows of the hull matrix are resolutions from 1080p down, columns are QPs
# from 16 up. A 1 marks a config that sits on the convex hull.
matrix, ladder = ground_truth_hull(grid)
print(matrix.bits)

#%%
# The ladder lists the hull points in bitrate order. Each step buys quality at
# a lower rate per kbps than the previous one.
for e in ladder:
    r = e.config.resolution
    print(f"{r.width:5d}x{r.height:<5d} qp {e.config.qp:2d}  {e.bitrate:9.1f} kbps  quality {e.quality:5.1f}")

#%%
# A fixed ladder, say 1080p at every QP, costs extra bits for the same quality.
top = Ladder(tuple(LadderEntry(p.config, p.bitrate, p.quality) for p in grid.points[0][::-1]))
print(f"1080p-only ladder vs hull: {bd_rate(ladder, top):+.2f}% bitrate")

#%%
# Scaling every rate by k shifts BD-rate by exactly (k - 1) * 100.
scaled = Ladder(tuple(LadderEntry(e.config, 1.25 * e.bitrate, e.quality) for e in ladder))
print(f"rates x1.25: {bd_rate(ladder, scaled):.2f}%")
print("hull size across temporal complexity:",
      [int(ground_truth_hull(simulate_grid(model, ShotComplexity(1, t))[0])[0].bits.sum())
       for t in np.geomspace(0.3, 3, 5)])
