"""Ask ARD for six components on rank-2 data and watch it keep two.

The pruning statistic scales each column's precision by the energy it
adds beyond the columns already kept, so redundant and vanished columns
both score high and are dropped.
"""

import numpy as np

from dwl.bdr import BdrConfig, bdr_fit, pca_baseline, pruning_statistic, run_cavi
from dwl.datasets import make_lowrank
from dwl.numerics import principal_angles, seeded_rng

data, _ = make_lowrank(seeded_rng(1), d=20, n=200, rank=2, noise_std=0.01)
config = BdrConfig(r=6)

xc = data.x - data.x.mean(axis=1, keepdims=True)
state, _ = run_cavi(xc, config)
stat = pruning_statistic(state.q_mu, state.phi_mean)
np.set_printoptions(precision=3, suppress=False)
print("column norms    ", np.linalg.norm(state.q_mu, axis=0))
print("ARD precisions  ", state.phi_mean)
print("prune statistic ", stat)
print(f"threshold        {config.prune_threshold:g}")

model, _ = bdr_fit(data.x, config)
print(f"retained columns {model.retained}")
angle = principal_angles(pca_baseline(data.x, 2), model.q_orth).max()
print(f"retained span vs rank-2 PCA: max angle {angle:.2e} rad")
