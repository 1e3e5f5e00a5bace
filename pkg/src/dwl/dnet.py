"""Dual-channel network: cached low-dimensional features fused with a learned stack.

The high-dimensional (HD) channel is an ordinary layer stack applied to
each sample. The low-dimensional (LD) channel is a linear projector (BDR
or PCA) fitted once on the whole training split; its per-sample features
are cached and fed alongside the HD activations into a dense fusion layer
followed by a classification or regression head. With no LD source the
same code path is a plain single-channel network.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .bdr import BdrConfig, bdr_fit, pca_fit
from .datasets import STD_FLOOR, Dataset
from .errors import (
    BadConfigError,
    BadTagError,
    EmptySplitError,
    NanLossError,
    ShapeMismatchError,
)
from .metrics import accuracy

LAYER_TAGS = ("hd_out", "fused", "pre_head")
AGGREGATIONS = ("concat", "sum")


@dataclass(frozen=True)
class BdrSource:
    config: BdrConfig


@dataclass(frozen=True)
class PcaSource:
    r: int


@dataclass(frozen=True)
class Classification:
    k: int


@dataclass(frozen=True)
class Regression:
    out_dim: int = 1


@dataclass(frozen=True)
class DNetConfig:
    input_shape: tuple
    hd_layers: tuple = ()
    ld_source: BdrSource | PcaSource | None = None
    aggregation: str = "concat"
    fusion_width: int = 16
    head: Classification | Regression = Classification(2)
    ld_standardize: bool = True
    fusion_relu: bool = True

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "hd_layers", tuple(self.hd_layers))
        if self.aggregation not in AGGREGATIONS:
            raise BadConfigError(f"aggregation must be one of {AGGREGATIONS}")
        if self.fusion_width < 1:
            raise BadConfigError("fusion_width must be >= 1")
        out = self.hd_shape()
        if len(out) != 1:
            raise ShapeMismatchError(f"HD stack must end flat (add Flatten), ends at {out}")

    def hd_shape(self):
        shapes = nn.chain_shapes(self.hd_layers, self.input_shape)
        return shapes[-1] if shapes else (int(np.prod(self.input_shape)),)

    @property
    def hd_width(self):
        return self.hd_shape()[0]

    @property
    def out_dim(self):
        return self.head.k if isinstance(self.head, Classification) else self.head.out_dim


@dataclass(frozen=True)
class AugmentConfig:
    reflect: bool = True
    translate_px: int = 3
    scale_range: tuple = (0.9, 1.1)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.scale_range)
        if not (0 < lo <= hi < 2):
            raise BadConfigError(f"scale_range must lie within (0, 2), got {self.scale_range}")
        if self.translate_px < 0:
            raise BadConfigError("translate_px must be non-negative")
        object.__setattr__(self, "scale_range", (lo, hi))


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 1000
    patience: int = 10
    lr: float = 0.002
    seed: int = 0
    shuffle_each_epoch: bool = True
    augmentation: AugmentConfig | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise BadConfigError("batch_size, patience and max_epochs must be >= 1")
        if not self.lr > 0:
            raise BadConfigError("lr must be positive")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def epochs_run(self):
        return len(self.val_loss)

    def rows(self):
        return [(e + 1, self.train_loss[e], self.train_acc[e], self.val_loss[e], self.val_acc[e])
                for e in range(self.epochs_run)]


class EarlyStopping:
    """Track the best score; signal a stop after ``patience`` epochs without improvement.

    Ties do not count as improvement, so the earliest best epoch wins.
    """

    def __init__(self, patience):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch, score):
        """Return ``(improved, stop)`` after recording ``score`` for ``epoch``."""
        if score > self.best:
            self.best, self.best_epoch, self.wait = score, epoch, 0
            return True, False
        self.wait += 1
        return False, self.wait >= self.patience


# -- LD channel -----------------------------------------------------------

@dataclass
class LdChannel:
    """Fitted projector plus the training-split feature statistics."""

    projector: object
    mean: np.ndarray
    std: np.ndarray
    standardize: bool = True

    @property
    def width(self):
        return self.projector.n_components

    def features(self, x_cols):
        u = self.projector.project(x_cols)
        if self.standardize:
            u = (u - self.mean) / self.std
        return u


def fit_ld_channel(ld_source, x_train, standardize=True):
    if isinstance(ld_source, BdrSource):
        projector, _ = bdr_fit(x_train, ld_source.config)
    elif isinstance(ld_source, PcaSource):
        projector = pca_fit(x_train, ld_source.r)
    else:
        raise BadConfigError(f"unknown LD source {ld_source!r}")
    u = projector.project(x_train)
    return LdChannel(projector, u.mean(axis=0), np.maximum(u.std(axis=0), STD_FLOOR),
                     standardize)


def compute_ld_features(ld_source, dataset, standardize=True):
    """Fit the LD channel on ``dataset`` and return ``(features, channel)``."""
    x = dataset.x if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.float64)
    channel = fit_ld_channel(ld_source, x, standardize)
    return channel.features(x), channel


def aggregate(f_h, f_l, mode="concat"):
    """Combine HD and LD feature blocks; ``concat`` puts the HD block first."""
    if f_l is None:
        return f_h
    if mode == "concat":
        return np.concatenate([f_h, f_l], axis=1)
    if mode == "sum":
        if f_h.shape != f_l.shape:
            raise ShapeMismatchError(f"sum aggregation needs equal widths: {f_h.shape} vs {f_l.shape}")
        return f_h + f_l
    raise BadConfigError(f"unknown aggregation {mode!r}")


# -- model ----------------------------------------------------------------

@dataclass
class DNetModel:
    config: DNetConfig
    hd_params: list
    fusion: dict
    head: dict
    ld: LdChannel | None = None

    @property
    def ld_width(self):
        return 0 if self.ld is None else self.ld.width

    def layers(self):
        fused = self.config.hd_width
        if self.ld is not None and self.config.aggregation == "concat":
            fused += self.ld_width
        return (list(self.config.hd_layers),
                nn.Dense(fused, self.config.fusion_width),
                nn.Dense(self.config.fusion_width, self.config.out_dim))

    def params(self):
        """All trainable arrays in a fixed order (HD stack, fusion, head)."""
        return nn.flatten_params(self.hd_params + [self.fusion, self.head])

    def ld_features(self, x_cols):
        return None if self.ld is None else self.ld.features(x_cols)


def build_model(config, ld, rng):
    """Kaiming-initialized model for ``config`` with LD channel ``ld``."""
    if ld is not None and config.aggregation == "sum" and ld.width != config.hd_width:
        raise ShapeMismatchError(
            f"sum aggregation needs HD width {config.hd_width} == LD width {ld.width}")
    model = DNetModel(config, [], {}, {}, ld)
    hd_layers, fusion, head = model.layers()
    model.hd_params = nn.init_params(rng, hd_layers)
    model.fusion = nn.kaiming_init(rng, fusion)
    model.head = nn.kaiming_init(rng, head)
    return model


def _flat_hd(model, batch_x):
    x = np.asarray(batch_x, dtype=np.float64)
    expected = model.config.input_shape
    if x.shape[1:] != expected:
        if x.ndim == 2 and x.shape[1] == int(np.prod(expected)):
            x = x.reshape((x.shape[0],) + expected)
        else:
            raise ShapeMismatchError(f"expected samples of shape {expected}, got {x.shape[1:]}")
    return x


def dnet_forward(model, batch_x, batch_ld=None, return_cache=False):
    """Logits (classification) or predictions (regression) for a batch.

    ``batch_x`` is batch-major; ``batch_ld`` holds the cached LD features of
    the same samples in the same order.
    """
    hd_layers, fusion, head = model.layers()
    x = _flat_hd(model, batch_x)
    h, hd_cache = nn.forward(hd_layers, model.hd_params, x)
    h = h.reshape(h.shape[0], -1)
    if model.ld is not None:
        if batch_ld is None or batch_ld.shape != (h.shape[0], model.ld_width):
            raise ShapeMismatchError(
                f"LD batch must have shape {(h.shape[0], model.ld_width)}")
    f = aggregate(h, batch_ld if model.ld is not None else None, model.config.aggregation)
    z_pre, fusion_cache = fusion.forward(model.fusion, f)
    z = np.maximum(z_pre, 0.0) if model.config.fusion_relu else z_pre
    out, head_cache = head.forward(model.head, z)
    if not return_cache:
        return out
    return out, {"hd": hd_cache, "h": h, "f": f, "z_pre": z_pre, "z": z,
                 "fusion": fusion_cache, "head": head_cache}


def dnet_backward(model, cache, grad_out):
    """Gradients of every trainable array (order of :meth:`DNetModel.params`)
    plus the gradient w.r.t. the HD input and the LD features."""
    hd_layers, fusion, head = model.layers()
    gz, g_head = head.backward(model.head, cache["head"], grad_out)
    if model.config.fusion_relu:
        gz = np.where(cache["z_pre"] > 0, gz, 0.0)
    gf, g_fusion = fusion.backward(model.fusion, cache["fusion"], gz)
    n_h = cache["h"].shape[1]
    g_ld = None
    if model.ld is None:
        gh = gf
    elif model.config.aggregation == "concat":
        gh, g_ld = gf[:, :n_h], gf[:, n_h:]
    else:
        gh, g_ld = gf, gf
    gx, g_hd = nn.backward(hd_layers, model.hd_params, cache["hd"],
                           gh.reshape((gh.shape[0],) + model.config.hd_shape()))
    grads = nn.flatten_params(g_hd + [g_fusion, g_head])
    return grads, gx, g_ld


def task_loss(model, out, y):
    if isinstance(model.config.head, Classification):
        return nn.softmax_ce(out, y)
    target = np.asarray(y, dtype=np.float64).reshape(out.shape)
    return nn.mse(out, target)


def dnet_grad_check(model, batch_x, batch_ld, y, h=1e-6):
    """Max relative error of :func:`dnet_backward` against central differences."""
    x = _flat_hd(model, batch_x).copy()
    out, cache = dnet_forward(model, x, batch_ld, return_cache=True)
    _, gout = task_loss(model, out, y)
    grads, gx, _ = dnet_backward(model, cache, gout)

    def f():
        return task_loss(model, dnet_forward(model, x, batch_ld), y)[0]

    worst = 0.0
    for p, g in zip(model.params(), grads):
        worst = max(worst, float(nn.relative_error(g, nn.numerical_gradient(f, p, h)).max()))
    worst = max(worst, float(nn.relative_error(gx, nn.numerical_gradient(f, x, h)).max()))
    return worst


# -- augmentation ---------------------------------------------------------

def translate(img, dy, dx):
    """Shift a ``(C, H, W)`` image by whole pixels, zero-filling."""
    out = np.zeros_like(img)
    _, h, w = img.shape
    if abs(dy) >= h or abs(dx) >= w:
        return out
    src_y = slice(max(0, -dy), h - max(0, dy))
    dst_y = slice(max(0, dy), h - max(0, -dy))
    src_x = slice(max(0, -dx), w - max(0, dx))
    dst_x = slice(max(0, dx), w - max(0, -dx))
    out[:, dst_y, dst_x] = img[:, src_y, src_x]
    return out


def rescale(img, s):
    """Nearest-neighbour zoom by ``s`` about the image centre, same output size."""
    _, h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    src_y = np.rint(cy + (np.arange(h) - cy) / s).astype(int)
    src_x = np.rint(cx + (np.arange(w) - cx) / s).astype(int)
    valid_y = (src_y >= 0) & (src_y < h)
    valid_x = (src_x >= 0) & (src_x < w)
    out = np.zeros_like(img)
    sub = img[:, src_y.clip(0, h - 1)][:, :, src_x.clip(0, w - 1)]
    mask = valid_y[:, None] & valid_x[None, :]
    out[:, mask] = sub[:, mask]
    return out


def augment_batch(rng, images, config):
    """Random reflection, translation and scaling, drawn per image."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise BadConfigError(f"augmentation needs (batch, C, H, W) images, got {images.shape}")
    if config is None:
        return images.copy()
    _, _, h, w = images.shape
    t = config.translate_px
    if t >= min(h, w):
        raise BadConfigError(f"translate_px={t} must be smaller than the image ({h}x{w})")
    lo, hi = config.scale_range
    out = np.empty_like(images)
    for i, img in enumerate(images):
        if config.reflect and rng.random() < 0.5:
            img = img[:, :, ::-1]
        if t:
            dy, dx = rng.integers(-t, t + 1, size=2)
            img = translate(img, int(dy), int(dx))
        if hi > lo or lo != 1.0:
            img = rescale(img, rng.uniform(lo, hi))
        out[i] = img
    return out


# -- training -------------------------------------------------------------

def _evaluate(model, xs, ld, y, chunk=1024):
    outs = [dnet_forward(model, xs[i:i + chunk], None if ld is None else ld[i:i + chunk])
            for i in range(0, xs.shape[0], chunk)]
    out = np.concatenate(outs, axis=0)
    loss, _ = task_loss(model, out, y)
    if isinstance(model.config.head, Classification):
        return loss, accuracy(np.argmax(out, axis=1), y)
    return loss, float("nan")


def dnet_train(config, tcfg, train, val, epoch_callback=None):
    """Train a D-Net with Adam, early stopping and best-epoch restoration.

    The LD channel is fitted on ``train`` only; validation LD features come
    from projecting ``val`` with that fit. Returns ``(model, history)``.
    """
    if train.n == 0 or val.n == 0:
        raise EmptySplitError("training and validation splits must be non-empty")
    if train.y is None or val.y is None:
        raise EmptySplitError("training and validation splits need targets")
    init_ss, shuffle_ss, aug_ss = np.random.SeedSequence(tcfg.seed).spawn(3)
    init_rng = np.random.Generator(np.random.PCG64(init_ss))
    shuffle_rng = np.random.Generator(np.random.PCG64(shuffle_ss))
    aug_rng = np.random.Generator(np.random.PCG64(aug_ss))

    ld = None
    if config.ld_source is not None:
        ld = fit_ld_channel(config.ld_source, train.x, config.ld_standardize)
    ld_train = None if ld is None else ld.features(train.x)
    ld_val = None if ld is None else ld.features(val.x)

    model = build_model(config, ld, init_rng)
    xs_train = _flat_hd(model, train.x.T)
    xs_val = _flat_hd(model, val.x.T)
    classification = isinstance(config.head, Classification)
    augment = tcfg.augmentation is not None and len(config.input_shape) == 3

    params = model.params()
    adam = nn.AdamState.for_params(params, lr=tcfg.lr)
    history = TrainHistory()
    stopper = EarlyStopping(tcfg.patience)
    best = copy.deepcopy(model)
    n = train.n
    order = np.arange(n)
    for epoch in range(1, tcfg.max_epochs + 1):
        if tcfg.shuffle_each_epoch:
            order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for b, start in enumerate(range(0, n, tcfg.batch_size)):
            idx = order[start:start + tcfg.batch_size]
            xb = xs_train[idx]
            if augment:
                xb = augment_batch(aug_rng, xb, tcfg.augmentation)
            out, cache = dnet_forward(model, xb, None if ld is None else ld_train[idx],
                                      return_cache=True)
            loss, gout = task_loss(model, out, train.y[idx])
            if not np.isfinite(loss):
                raise NanLossError(epoch, b)
            grads, _, _ = dnet_backward(model, cache, gout)
            nn.adam_step(adam, params, grads)
            loss_sum += loss * idx.size
            if classification:
                correct += int(np.count_nonzero(np.argmax(out, axis=1) == train.y[idx]))
        history.train_loss.append(loss_sum / n)
        history.train_acc.append(correct / n if classification else float("nan"))
        val_loss, val_acc = _evaluate(model, xs_val, ld_val, val.y)
        if not np.isfinite(val_loss):
            raise NanLossError(epoch, -1)
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)
        improved, stop = stopper.update(epoch, val_acc if classification else -val_loss)
        if improved:
            best = copy.deepcopy(model)
        if epoch_callback is not None:
            epoch_callback(epoch, history)
        if stop:
            history.stopped_early = True
            break
    history.best_epoch = stopper.best_epoch
    return best, history


# -- inference ------------------------------------------------------------

def _columns(model, data):
    x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    d = int(np.prod(model.config.input_shape))
    if x.ndim != 2 or x.shape[0] != d:
        raise ShapeMismatchError(f"expected {d} features per sample, got shape {x.shape}")
    return x


def dnet_outputs(model, data):
    x = _columns(model, data)
    return dnet_forward(model, x.T, model.ld_features(x))


def dnet_predict(model, data):
    """Class labels (argmax, ties to the lowest index) or regression values."""
    out = dnet_outputs(model, data)
    if isinstance(model.config.head, Classification):
        return np.argmax(out, axis=1)
    return out


def extract_layer_features(model, data, layer_tag):
    """Activations at ``hd_out``, ``fused`` or ``pre_head``, one row per sample."""
    if layer_tag not in LAYER_TAGS:
        raise BadTagError(f"layer_tag must be one of {LAYER_TAGS}, got {layer_tag!r}")
    x = _columns(model, data)
    _, cache = dnet_forward(model, x.T, model.ld_features(x), return_cache=True)
    return {"hd_out": cache["h"], "fused": cache["f"], "pre_head": cache["z"]}[layer_tag]
