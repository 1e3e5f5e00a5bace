"""Measure how class-aligned each layer's activations are.

k-means clusters the test activations at three depths and the clusters
are scored against the true classes with the adjusted Rand index.
"""

from dwl.experiments import BlobsTask, layer_ari_trend

medians, per_seed = layer_ari_trend(range(5), BlobsTask(), r=2)
for seed, row in zip(range(5), per_seed):
    print(f"seed {seed}: " + "  ".join(f"{k}={v:.3f}" for k, v in row.items()))
print("median:  " + "  ".join(f"{k}={v:.3f}" for k, v in medians.items()))
