"""Desk-scale experiment protocols on the blobs-with-distractors task.

Each protocol is a pure function of its task settings and seed list. The
same seed drives data generation, the split, the BDR initialization and
network training, so one integer reproduces an entire arm.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import nn
from .bdr import BdrConfig
from .datasets import SplitSpec, make_blobs, split, standardize_apply, standardize_fit
from .dnet import (
    BdrSource,
    Classification,
    DNetConfig,
    LAYER_TAGS,
    PcaSource,
    TrainConfig,
    dnet_predict,
    dnet_train,
    extract_layer_features,
)
from .metrics import accuracy, feature_ari
from .numerics import seeded_rng

# Literal BDR turns towards the principal subspace at a rate set by the gap
# in 1/eigenvalue, which is slow on noisy data; the LD channel is only
# useful once the fit has actually converged.
LD_MAX_ITER = 5000
LD_TOL = 1e-6


@dataclass(frozen=True)
class BlobsTask:
    k: int = 3
    dim: int = 5
    n_per_class: int = 200
    spread: float = 1.0
    distractor_dims: int = 20
    distractor_std: float = 1.0
    standardize: bool = True

    @property
    def d(self):
        return self.dim + self.distractor_dims


def make_task_splits(task, seed):
    """Seeded dataset and 70/15/15 split, z-scored with training statistics."""
    ds = make_blobs(seeded_rng(seed), task.k, task.dim, task.n_per_class, task.spread,
                    task.distractor_dims, task.distractor_std)
    parts = split(ds, SplitSpec(seed=seed))
    if task.standardize:
        stats = standardize_fit(parts[0])
        parts = tuple(standardize_apply(stats, p) for p in parts)
    return parts


def ld_bdr_config(r, seed):
    return BdrConfig(r=r, seed=seed, max_iter=LD_MAX_ITER, tol=LD_TOL)


def ld_source_for(kind, r, seed):
    if kind == "bdr":
        return BdrSource(ld_bdr_config(r, seed))
    if kind == "pca":
        return PcaSource(r)
    return None


def blobs_dnet_config(task, ld_source, hd_width=16, fusion_width=16):
    """One dense HD layer, a dense fusion layer and a softmax head."""
    return DNetConfig(
        input_shape=(task.d,),
        hd_layers=(nn.Dense(task.d, hd_width), nn.Relu()),
        ld_source=ld_source,
        fusion_width=fusion_width,
        head=Classification(task.k),
    )


def epochs_to_threshold(history, threshold):
    """First (1-based) epoch whose validation accuracy reaches ``threshold``, else None."""
    for epoch, acc in enumerate(history.val_acc, start=1):
        if acc >= threshold:
            return epoch
    return None


@dataclass
class ArmResult:
    seed: int
    epochs_to_95: int | None
    test_accuracy: float
    history: object
    model: object
    wall_time: float


def run_arm(task, seed, ld_kind="bdr", r=2, max_epochs=300, threshold=0.95):
    train, val, test = make_task_splits(task, seed)
    config = blobs_dnet_config(task, ld_source_for(ld_kind, r, seed))
    start = time.perf_counter()
    model, history = dnet_train(config, TrainConfig(seed=seed, max_epochs=max_epochs), train, val)
    wall = time.perf_counter() - start
    acc = accuracy(dnet_predict(model, test), test.y)
    return ArmResult(seed, epochs_to_threshold(history, threshold), acc, history, model, wall)


def _median_epochs(results):
    # an arm that never reaches the threshold counts as infinitely slow
    return float(np.median([np.inf if r.epochs_to_95 is None else r.epochs_to_95
                            for r in results]))


def compare_channels(seeds, task=BlobsTask(), r=2, ld_kind="bdr"):
    """Dual (LD + HD) versus single (HD only) arms over ``seeds``."""
    dual = [run_arm(task, s, ld_kind, r) for s in seeds]
    single = [run_arm(task, s, "none") for s in seeds]
    return {
        "dual": dual,
        "single": single,
        "dual_median_epochs": _median_epochs(dual),
        "single_median_epochs": _median_epochs(single),
        "dual_median_test_acc": float(np.median([a.test_accuracy for a in dual])),
        "single_median_test_acc": float(np.median([a.test_accuracy for a in single])),
    }


def component_sweep(r_values, seeds, task=BlobsTask(), ld_kind="bdr"):
    """Rows ``(r, seed, test_accuracy, epochs_to_95pct_of_best, wall_time)``.

    Per-seed rows come first for each ``r``, followed by a median row whose
    seed field is ``"median"``.
    """
    rows = []
    for r in r_values:
        per_seed = []
        for s in seeds:
            arm = run_arm(task, s, ld_kind, r)
            best = max(arm.history.val_acc)
            reach = epochs_to_threshold(arm.history, 0.95 * best)
            per_seed.append((r, s, arm.test_accuracy, reach, arm.wall_time))
        rows.extend(per_seed)
        rows.append((r, "median",
                     float(np.median([p[2] for p in per_seed])),
                     float(np.median([p[3] for p in per_seed])),
                     float(np.median([p[4] for p in per_seed]))))
    return rows


def layer_ari(model, data, seed):
    """feature_ari of the test activations at every layer tag."""
    return {tag: feature_ari(extract_layer_features(model, data, tag), data.y, seed)
            for tag in LAYER_TAGS}


def layer_ari_trend(seeds, task=BlobsTask(), r=2):
    """Median feature_ari per layer tag over dual-channel models trained with ``seeds``."""
    per_seed = []
    for s in seeds:
        arm = run_arm(task, s, "bdr", r)
        test = make_task_splits(task, s)[2]
        per_seed.append(layer_ari(arm.model, test, s))
    return {tag: float(np.median([p[tag] for p in per_seed])) for tag in LAYER_TAGS}, per_seed
