"""Sweep the LD component count and report test accuracy per value.

Uses 75 distractor dimensions so that large component counts fit inside
the input width. Expect about a minute and a half of CPU time.
"""

from dwl.experiments import BlobsTask, component_sweep

rows = component_sweep([2, 8, 32, 64], range(5), BlobsTask(distractor_dims=75))
print("   r  test_acc  epochs_to_95pct_of_best  wall_s")
for r, seed, acc, reach, wall in rows:
    if seed == "median":
        print(f"{r:4d}  {acc:8.3f}  {reach:23g}  {wall:6.2f}")
