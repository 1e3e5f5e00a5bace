"""Classification and clustering-quality metrics."""

import numpy as np

from .errors import BadKError, BadLabelError, LengthMismatchError
from .numerics import seeded_rng


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatchError(f"partitions differ in length: {a.shape} vs {b.shape}")
    return a, b


def accuracy(pred, truth):
    pred, truth = _pair(pred, truth)
    if pred.size == 0:
        raise LengthMismatchError("empty partitions")
    return float(np.count_nonzero(pred == truth)) / pred.size


def confusion(pred, truth, k):
    """``k x k`` counts; rows are true classes, columns predictions."""
    pred, truth = _pair(pred, truth)
    for name, lab in (("pred", pred), ("truth", truth)):
        if lab.size and (lab.min() < 0 or lab.max() >= k):
            raise BadLabelError(f"{name} labels must lie in [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (truth.astype(np.intp), pred.astype(np.intp)), 1)
    return cm


def contingency(a, b):
    a, b = _pair(a, b)
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max(initial=-1) + 1, ib.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _comb2(n):
    n = np.asarray(n, dtype=np.float64)
    return n * (n - 1) / 2.0


def adjusted_rand_index(a, b):
    """Hubert-Arabie adjusted Rand index.

    When the chance-corrected denominator vanishes (both partitions a single
    cluster, or both all singletons) the result is 1.0 for identical
    partitions up to relabeling and 0.0 otherwise.
    """
    a, b = _pair(a, b)
    n = a.size
    if n < 2:
        raise LengthMismatchError("ARI needs at least two samples")
    table = contingency(a, b)
    index = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        identical = (table > 0).sum(axis=1).max() == 1 and (table > 0).sum(axis=0).max() == 1
        return 1.0 if identical else 0.0
    return float((index - expected) / (max_index - expected))


def _sq_dists(x, centroids):
    d = (x**2).sum(axis=1)[:, None] - 2.0 * x @ centroids.T + (centroids**2).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_fit(features, k, seed, max_iter=100):
    """Lloyd's k-means.

    Returns ``(labels, centroids, objective_history)``; the history records
    the within-cluster sum of squares after every assignment step.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise BadKError(f"k={k} must lie in [1, N={n}]")
    rng = seeded_rng(seed)
    centroids = x[rng.choice(n, size=k, replace=False)].copy()
    labels = None
    history = []
    for _ in range(max_iter):
        dists = _sq_dists(x, centroids)
        new_labels = np.argmin(dists, axis=1)  # ties -> lowest centroid index
        history.append(float(dists[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = x[members].mean(axis=0)
        for j in range(k):
            if not np.any(labels == j):
                own = ((x - centroids[labels]) ** 2).sum(axis=1)
                sizes = np.bincount(labels, minlength=k)
                own[sizes[labels] < 2] = -1.0  # never empty another cluster
                far = int(np.argmax(own))
                old = labels[far]
                labels[far] = j
                centroids[j] = x[far]
                centroids[old] = x[labels == old].mean(axis=0)
    return labels, centroids, history


def kmeans(features, k, seed, max_iter=100):
    return kmeans_fit(features, k, seed, max_iter)[0]


def feature_ari(features, truth_labels, seed):
    """ARI between k-means clusters of ``features`` and the true labels."""
    truth = np.asarray(truth_labels)
    k = np.unique(truth).size
    return adjusted_rand_index(kmeans(features, k, seed), truth)


def median_feature_ari(features, truth_labels, seeds):
    return float(np.median([feature_ari(features, truth_labels, s) for s in seeds]))
