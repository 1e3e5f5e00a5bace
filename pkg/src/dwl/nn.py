"""Minimal neural-network layers with explicit forward and backward passes.

Layers are immutable descriptions; their parameters live in plain dicts
of arrays so they can be copied, optimized and serialized without ceremony.
Activations are batch-major: dense paths use ``(batch, features)`` and
image paths ``(batch, channel, height, width)``.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BadConfigError, BadLabelError, ShapeMismatchError


class Layer:
    """Interface shared by every layer spec."""

    has_params = False

    def init(self, rng):
        return {}

    def output_shape(self, in_shape):
        return in_shape

    def forward(self, params, x):
        raise NotImplementedError

    def backward(self, params, cache, grad_out):
        raise NotImplementedError


@dataclass(frozen=True)
class Dense(Layer):
    n_in: int
    n_out: int
    has_params = True

    @property
    def fan_in(self):
        return self.n_in

    def init(self, rng):
        std = np.sqrt(2.0 / self.fan_in)
        return {"W": std * rng.standard_normal((self.n_in, self.n_out)),
                "b": np.zeros(self.n_out)}

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.n_in,):
            raise ShapeMismatchError(f"Dense expects ({self.n_in},), got {tuple(in_shape)}")
        return (self.n_out,)

    def forward(self, params, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeMismatchError(f"Dense expects (batch, {self.n_in}), got {x.shape}")
        return x @ params["W"] + params["b"], x

    def backward(self, params, cache, grad_out):
        x = cache
        grads = {"W": x.T @ grad_out, "b": grad_out.sum(axis=0)}
        return grad_out @ params["W"].T, grads


@dataclass(frozen=True)
class Relu(Layer):
    def forward(self, params, x):
        # np.maximum keeps NaN so corrupted inputs surface as a NaN loss
        return np.maximum(x, 0.0), x > 0

    def backward(self, params, cache, grad_out):
        return np.where(cache, grad_out, 0.0), {}


@dataclass(frozen=True)
class Conv2d(Layer):
    """3x3, stride-1 convolution with ``same`` or ``valid`` padding."""

    in_ch: int
    out_ch: int
    kernel: int = 3
    stride: int = 1
    pad: str = "same"
    has_params = True

    def __post_init__(self):
        if self.kernel != 3 or self.stride != 1:
            raise BadConfigError("only kernel=3, stride=1 convolutions are supported")
        if self.pad not in ("same", "valid"):
            raise BadConfigError(f"pad must be 'same' or 'valid', got {self.pad!r}")

    @property
    def fan_in(self):
        return self.in_ch * self.kernel**2

    @property
    def _p(self):
        return 1 if self.pad == "same" else 0

    def init(self, rng):
        std = np.sqrt(2.0 / self.fan_in)
        shape = (self.out_ch, self.in_ch, self.kernel, self.kernel)
        return {"W": std * rng.standard_normal(shape), "b": np.zeros(self.out_ch)}

    def output_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_ch:
            raise ShapeMismatchError(
                f"Conv2d expects ({self.in_ch}, H, W), got {tuple(in_shape)}")
        _, h, w = in_shape
        shrink = self.kernel - 1 - 2 * self._p
        if h - shrink < 1 or w - shrink < 1:
            raise ShapeMismatchError(f"image {h}x{w} too small for a valid convolution")
        return (self.out_ch, h - shrink, w - shrink)

    def forward(self, params, x):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ShapeMismatchError(
                f"Conv2d expects (batch, {self.in_ch}, H, W), got {x.shape}")
        p = self._p
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        windows = sliding_window_view(xp, (self.kernel, self.kernel), axis=(2, 3))
        y = np.einsum("bchwij,ocij->bohw", windows, params["W"])
        y += params["b"][None, :, None, None]
        return y, (xp.shape, windows)

    def backward(self, params, cache, grad_out):
        xp_shape, windows = cache
        k, p = self.kernel, self._p
        grads = {"W": np.einsum("bchwij,bohw->ocij", windows, grad_out),
                 "b": grad_out.sum(axis=(0, 2, 3))}
        gxp = np.zeros(xp_shape)
        ho, wo = grad_out.shape[2:]
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + ho, j:j + wo] += np.einsum(
                    "bohw,oc->bchw", grad_out, params["W"][:, :, i, j])
        if p:
            gxp = gxp[:, :, p:-p, p:-p]
        return gxp, grads


@dataclass(frozen=True)
class MaxPool2(Layer):
    """Non-overlapping 2x2 max pooling; odd trailing rows/columns are dropped.

    Ties route the gradient to the first maximal element in row-major order.
    """

    window: int = 2

    def __post_init__(self):
        if self.window != 2:
            raise BadConfigError("only 2x2 pooling is supported")

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatchError(f"MaxPool2 expects (C, H, W), got {tuple(in_shape)}")
        c, h, w = in_shape
        if h < 2 or w < 2:
            raise ShapeMismatchError(f"image {h}x{w} too small to pool")
        return (c, h // 2, w // 2)

    def forward(self, params, x):
        if x.ndim != 4:
            raise ShapeMismatchError(f"MaxPool2 expects a 4-axis tensor, got {x.shape}")
        b, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        blocks = (x[:, :, :2 * h2, :2 * w2]
                  .reshape(b, c, h2, 2, w2, 2)
                  .transpose(0, 1, 2, 4, 3, 5)
                  .reshape(b, c, h2, w2, 4))
        idx = np.argmax(blocks, axis=-1)
        y = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
        return y, (x.shape, idx)

    def backward(self, params, cache, grad_out):
        shape, idx = cache
        b, c, h, w = shape
        h2, w2 = idx.shape[2:]
        blocks = np.zeros((b, c, h2, w2, 4))
        np.put_along_axis(blocks, idx[..., None], grad_out[..., None], axis=-1)
        gx = np.zeros(shape)
        gx[:, :, :2 * h2, :2 * w2] = (blocks.reshape(b, c, h2, w2, 2, 2)
                                      .transpose(0, 1, 2, 4, 3, 5)
                                      .reshape(b, c, 2 * h2, 2 * w2))
        return gx, {}


@dataclass(frozen=True)
class Flatten(Layer):
    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, params, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, params, cache, grad_out):
        return grad_out.reshape(cache), {}


# -- stacks ---------------------------------------------------------------

def chain_shapes(layers, in_shape):
    """Per-layer output shapes; raises ShapeMismatchError if they do not chain."""
    shapes = []
    shape = tuple(in_shape)
    for layer in layers:
        shape = tuple(layer.output_shape(shape))
        shapes.append(shape)
    return shapes


def kaiming_init(rng, layer):
    """Weights ~ N(0, 2 / fan_in), zero biases."""
    if not layer.has_params:
        raise BadConfigError(f"{type(layer).__name__} has no parameters")
    return layer.init(rng)


def init_params(rng, layers):
    return [layer.init(rng) for layer in layers]


def forward(layers, params, x):
    caches = []
    for layer, p in zip(layers, params):
        x, cache = layer.forward(p, x)
        caches.append(cache)
    return x, caches


def backward(layers, params, caches, grad_out):
    grads = [None] * len(layers)
    for i in reversed(range(len(layers))):
        grad_out, grads[i] = layers[i].backward(params[i], caches[i], grad_out)
    return grad_out, grads


# -- losses ---------------------------------------------------------------

def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_ce(logits, labels):
    """Mean cross-entropy of ``softmax(logits)`` and its gradient w.r.t. logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,) or np.any(labels < 0) or np.any(labels >= k):
        raise BadLabelError(f"labels must be {n} integers in [0, {k})")
    labels = labels.astype(np.intp)
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    log_p = z[np.arange(n), labels] - log_norm
    loss = -log_p.mean()
    grad = np.exp(z - log_norm[:, None])
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def mse(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


# -- optimizer ------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **kwargs):
        state = cls(**kwargs)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state


def adam_step(state, params, grads):
    """Bias-corrected Adam update of ``params`` (a list of arrays), in place."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"param {p.shape} vs grad {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params, state


def flatten_params(params):
    """Arrays of a list-of-dicts parameter tree in a fixed order."""
    return [p[k] for p in params for k in sorted(p)]


# -- gradient checking ----------------------------------------------------

def relative_error(analytic, numeric):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return np.abs(analytic - numeric) / denom


def numerical_gradient(f, arr, h=1e-6):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated, restored)."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def grad_check(layers, params, x, loss, h=1e-6, check_input=True):
    """Max relative error between backprop and central differences.

    ``loss`` maps the network output to ``(value, grad_wrt_output)``.
    """
    x = np.array(x, dtype=np.float64)
    out, caches = forward(layers, params, x)
    _, gout = loss(out)
    gx, grads = backward(layers, params, caches, gout)

    def f():
        return loss(forward(layers, params, x)[0])[0]

    worst = 0.0
    for p, g in zip(params, grads):
        for key in sorted(p):
            num = numerical_gradient(f, p[key], h)
            worst = max(worst, float(relative_error(g[key], num).max(initial=0.0)))
    if check_input:
        num = numerical_gradient(f, x, h)
        worst = max(worst, float(relative_error(gx, num).max(initial=0.0)))
    return worst
