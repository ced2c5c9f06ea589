"""Minimal deterministic ReLU network: 1-D convolutions + dense layers,
mean-L1 loss, hand-derived gradients, Adam.

Conventions that the rest of the package relies on:

* A dense weight matrix has shape (out_dim, in_dim) and acts as
  y_j = sum_i W[j, i] x_i + b[j].
* A conv weight tensor has shape (out_ch, in_ch, k); valid convolution,
  output length (L - k) // stride + 1.
* The loss is the MEAN of absolute errors over output dimension and batch,
  so percentile metrics are comparable across output sizes.
* Subgradient of |u| and of ReLU at 0 is 0.
* Everything is a pure function of (inputs, seed); nothing hidden mutates.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .seeding import rng_for, TAG_NET_INIT, TAG_TRAIN


@dataclass(frozen=True)
class Conv1D:
    in_channels: int
    out_channels: int
    kernel_width: int
    stride: int = 1


@dataclass(frozen=True)
class Dense:
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class ReLU:
    pass


class ShapeError(ValueError):
    pass


def _is_param_layer(layer):
    return isinstance(layer, (Conv1D, Dense))


def validate_spec(spec, input_dim=None):
    """Check adjacent-layer compatibility; returns the final output dim.

    With ``input_dim`` given the walk is exact (conv lengths and the implicit
    conv-to-dense flatten are resolved); without it only channel/dim chaining
    between parameterized layers is checked and None is returned.
    """
    if not spec:
        raise ShapeError("layer list is empty")
    for layer in spec:
        if isinstance(layer, Conv1D):
            if min(layer.in_channels, layer.out_channels, layer.kernel_width,
                   layer.stride) < 1:
                raise ShapeError(f"non-positive field in {layer}")
        elif isinstance(layer, Dense):
            if min(layer.in_dim, layer.out_dim) < 1:
                raise ShapeError(f"non-positive field in {layer}")

    if input_dim is None:
        prev = None
        for i, layer in enumerate(spec):
            if not _is_param_layer(layer):
                continue
            if prev is not None:
                pi, pl = prev
                if isinstance(pl, Conv1D) and isinstance(layer, Conv1D):
                    if pl.out_channels != layer.in_channels:
                        raise ShapeError(
                            f"layer {pi} ({pl}) feeds layer {i} ({layer}): "
                            f"channel mismatch")
                elif isinstance(pl, Dense) and isinstance(layer, Dense):
                    if pl.out_dim != layer.in_dim:
                        raise ShapeError(
                            f"layer {pi} ({pl}) feeds layer {i} ({layer}): "
                            f"dim mismatch")
                elif isinstance(pl, Dense) and isinstance(layer, Conv1D):
                    raise ShapeError(
                        f"layer {pi} ({pl}) feeds layer {i} ({layer}): "
                        f"conv after dense is unsupported")
            prev = (i, layer)
        return None

    # exact walk: shape is either ("flat", dim) or ("conv", channels, length)
    shape = ("flat", int(input_dim))
    prev_i = "input"
    for i, layer in enumerate(spec):
        if isinstance(layer, ReLU):
            continue
        if isinstance(layer, Conv1D):
            if shape[0] == "flat":
                dim = shape[1]
                if dim % layer.in_channels != 0:
                    raise ShapeError(
                        f"layer {prev_i} output dim {dim} not divisible by "
                        f"in_channels of layer {i} ({layer})")
                shape = ("conv", layer.in_channels, dim // layer.in_channels)
            if shape[1] != layer.in_channels:
                raise ShapeError(
                    f"layer {prev_i} outputs {shape[1]} channels, layer {i} "
                    f"({layer}) expects {layer.in_channels}")
            out_len = (shape[2] - layer.kernel_width) // layer.stride + 1
            if out_len < 1:
                raise ShapeError(
                    f"layer {i} ({layer}) on length {shape[2]} yields empty "
                    f"output")
            shape = ("conv", layer.out_channels, out_len)
        else:  # Dense
            dim = shape[1] if shape[0] == "flat" else shape[1] * shape[2]
            if dim != layer.in_dim:
                raise ShapeError(
                    f"layer {prev_i} output dim {dim} != in_dim of layer {i} "
                    f"({layer})")
            shape = ("flat", layer.out_dim)
        prev_i = i
    return shape[1] if shape[0] == "flat" else shape[1] * shape[2]


@dataclass
class NetParams:
    """Weights and biases in LayerSpec order; value-semantic via copy()."""

    spec: tuple
    weights: list
    biases: list

    def copy(self):
        return NetParams(self.spec, [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    @property
    def dtype(self):
        return self.weights[0].dtype if self.weights else np.dtype(np.float64)

    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def param_layers(self):
        return [l for l in self.spec if _is_param_layer(l)]


def init_net(spec, seed, input_dim=None, dtype=np.float64):
    """He-style initialization: weights uniform on +-sqrt(6/fan_in), zero bias."""
    spec = tuple(spec)
    validate_spec(spec, input_dim)
    rng = rng_for(seed, TAG_NET_INIT)
    weights, biases = [], []
    for layer in spec:
        if isinstance(layer, Conv1D):
            fan_in = layer.in_channels * layer.kernel_width
            shape = (layer.out_channels, layer.in_channels, layer.kernel_width)
            nb = layer.out_channels
        elif isinstance(layer, Dense):
            fan_in = layer.in_dim
            shape = (layer.out_dim, layer.in_dim)
            nb = layer.out_dim
        else:
            continue
        half = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-half, half, size=shape).astype(dtype))
        biases.append(np.zeros(nb, dtype=dtype))
    return NetParams(spec, weights, biases)


def default_net_spec(input_dim, output_dim):
    """Desk-scale default: two width-5 conv layers + two dense layers when
    the input is long enough to survive both kernels, otherwise a plain MLP
    (a handful of scalar parameters is not a signal worth convolving)."""
    k = 5
    l2 = input_dim - 2 * (k - 1)
    if l2 < 1:
        return (Dense(input_dim, 128), ReLU(), Dense(128, 128), ReLU(),
                Dense(128, output_dim))
    return (Conv1D(1, 8, k), ReLU(), Conv1D(8, 8, k), ReLU(),
            Dense(8 * l2, 128), ReLU(), Dense(128, output_dim))


def _forward_walk(net, x2d, keep_cache):
    """Run the layer stack on a (batch, input_dim) array.

    Returns (output (batch, out_dim), caches). Each cache entry is the input
    the layer saw, in the layer's native shape; flatten/reshape transitions
    are recoverable from those shapes.
    """
    cur = x2d
    caches = [] if keep_cache else None
    pi = 0
    for layer in net.spec:
        if isinstance(layer, Conv1D):
            if cur.ndim == 2:
                dim = cur.shape[1]
                if dim % layer.in_channels != 0:
                    raise ShapeError(
                        f"input dim {dim} not divisible by in_channels of "
                        f"{layer}")
                cur = np.ascontiguousarray(
                    cur.reshape(cur.shape[0], layer.in_channels, -1))
            if cur.shape[1] != layer.in_channels:
                raise ShapeError(f"{layer} got {cur.shape[1]} channels")
            if cur.shape[2] < layer.kernel_width:
                raise ShapeError(f"{layer} got length {cur.shape[2]}")
            if keep_cache:
                caches.append(cur)
            cur = kernels.conv1d_forward(cur, net.weights[pi], net.biases[pi],
                                         layer.stride)
            pi += 1
        elif isinstance(layer, Dense):
            if cur.ndim == 3:
                cur = np.ascontiguousarray(cur.reshape(cur.shape[0], -1))
            if cur.shape[1] != layer.in_dim:
                raise ShapeError(
                    f"{layer} got input dim {cur.shape[1]}")
            if keep_cache:
                caches.append(cur)
            cur = cur @ net.weights[pi].T + net.biases[pi]
            pi += 1
        else:  # ReLU
            if keep_cache:
                caches.append(cur)
            cur = np.maximum(cur, 0.0)
    if cur.ndim == 3:
        cur = cur.reshape(cur.shape[0], -1)
    return cur, caches


def forward(net, x):
    """Evaluate the network; x is one input vector or a (batch, dim) array."""
    x = np.asarray(x, dtype=net.dtype)
    single = x.ndim == 1
    out, _ = _forward_walk(net, x[None, :] if single else x, keep_cache=False)
    return out[0] if single else out


def l1_loss(pred, truth):
    """Mean absolute error over every element of pred/truth."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ShapeError(f"pred shape {pred.shape} != truth shape {truth.shape}")
    return float(np.mean(np.abs(pred - truth)))


def per_sample_l1(pred, truth):
    """Mean absolute error per row of a (batch, dim) pair."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ShapeError(f"pred shape {pred.shape} != truth shape {truth.shape}")
    return np.abs(pred - truth).mean(axis=1)


@dataclass
class Grads:
    weights: list
    biases: list


def grad(net, batch):
    """Exact gradient of the mean L1 loss over a (X, Y) batch.

    Uses the 0-subgradient convention at kinks of |.| and ReLU, so the
    gradient at an exact fit is exactly zero.
    """
    x, y = batch
    x = np.asarray(x, dtype=net.dtype)
    y = np.asarray(y, dtype=net.dtype)
    if x.ndim == 1:
        x = x[None, :]
        y = y[None, :]
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    out, caches = _forward_walk(net, x, keep_cache=True)
    if out.shape != y.shape:
        raise ShapeError(f"output shape {out.shape} != target shape {y.shape}")
    g, _ = _backward_walk(net, caches, np.sign(out - y) / out.size)
    return g


def _backward_walk(net, caches, dout):
    """Backpropagate dout (gradient at the flattened output)."""
    gw = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    pi = len(net.weights)
    cur = dout
    for li in range(len(net.spec) - 1, -1, -1):
        layer = net.spec[li]
        cache = caches[li]
        if isinstance(layer, Conv1D):
            pi -= 1
            if cur.ndim == 2:  # was flattened downstream (or at the output)
                out_len = (cache.shape[2] - layer.kernel_width) // layer.stride + 1
                cur = cur.reshape(cur.shape[0], layer.out_channels, out_len)
            cur = np.ascontiguousarray(cur)
            dx, dw, db = kernels.conv1d_backward(cache, net.weights[pi],
                                                 layer.stride, cur)
            gw[pi], gb[pi] = dw, db
            cur = dx
        elif isinstance(layer, Dense):
            pi -= 1
            gw[pi] = cur.T @ cache
            gb[pi] = cur.sum(axis=0)
            cur = cur @ net.weights[pi]
        else:  # ReLU
            if cur.ndim != cache.ndim:
                # undoes the implicit flatten of a 3-D conv output
                cur = cur.reshape(cache.shape)
            cur = cur * (cache > 0)
    return Grads(gw, gb), cur


@dataclass
class AdamState:
    """First/second-moment accumulators mirroring NetParams, plus step count."""

    m_w: list
    v_w: list
    m_b: list
    v_b: list
    t: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, net, learning_rate=0.001, beta1=0.9, beta2=0.999,
                   eps=1e-8):
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases],
                   [np.zeros_like(b) for b in net.biases],
                   0, learning_rate, beta1, beta2, eps)

    def copy(self):
        return AdamState([a.copy() for a in self.m_w],
                         [a.copy() for a in self.v_w],
                         [a.copy() for a in self.m_b],
                         [a.copy() for a in self.v_b],
                         self.t, self.learning_rate, self.beta1, self.beta2,
                         self.eps)


def _adam_update_inplace(param, g, m, v, t, lr, b1, b2, eps):
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    mhat = m / (1.0 - b1 ** t)
    vhat = v / (1.0 - b2 ** t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


def _adam_step_inplace(net, grads, state):
    state.t += 1
    for i in range(len(net.weights)):
        _adam_update_inplace(net.weights[i], grads.weights[i], state.m_w[i],
                             state.v_w[i], state.t, state.learning_rate,
                             state.beta1, state.beta2, state.eps)
        _adam_update_inplace(net.biases[i], grads.biases[i], state.m_b[i],
                             state.v_b[i], state.t, state.learning_rate,
                             state.beta1, state.beta2, state.eps)


def adam_step(net, grads, state):
    """One Adam update with bias correction; returns (new net, new state)."""
    for w, g in zip(net.weights, grads.weights):
        if w.shape != g.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {w.shape}")
    net2 = net.copy()
    state2 = state.copy()
    _adam_step_inplace(net2, grads, state2)
    return net2, state2


@dataclass(frozen=True)
class TrainConfig:
    minibatch_size: int = 32
    learning_rate: float = 0.001
    # high enough that patience, not the cap, normally ends training
    max_epochs: int = 600
    patience: int = 20
    seed: int = 0


@dataclass
class TrainLog:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    best_val: float = math.inf
    epochs_run: int = 0


def train(net, labeled, val, cfg):
    """Adam minibatch training; returns (params at best validation L1, log).

    Epoch shuffles come from the config seed; epoch 0 (the untouched input
    net) participates in the best-validation comparison, so max_epochs=0
    returns the input unchanged.
    """
    x, y = labeled
    xv, yv = val
    x = np.asarray(x, dtype=net.dtype)
    y = np.asarray(y, dtype=net.dtype)
    m = x.shape[0]
    if m == 0:
        raise ValueError("empty labeled set")
    log = TrainLog()
    best = net.copy()
    log.best_val = l1_loss(forward(net, xv), yv)
    if cfg.max_epochs == 0:
        return best, log

    cur = net.copy()
    state = AdamState.zeros_like(cur, learning_rate=cfg.learning_rate)
    rng = rng_for(cfg.seed, TAG_TRAIN)
    bsz = min(cfg.minibatch_size, m)
    since_best = 0
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(m)
        loss_sum = 0.0
        for a in range(0, m, bsz):
            idx = perm[a:a + bsz]
            xb, yb = x[idx], y[idx]
            out, caches = _forward_walk(cur, xb, keep_cache=True)
            loss_sum += float(np.abs(out - yb).sum()) / out.shape[1]
            g, _ = _backward_walk(cur, caches, np.sign(out - yb) / out.size)
            _adam_step_inplace(cur, g, state)
        vl = l1_loss(forward(cur, xv), yv)
        log.train_loss.append(loss_sum / m)
        log.val_loss.append(vl)
        log.epochs_run = epoch
        if vl < log.best_val:
            log.best_val = vl
            log.best_epoch = epoch
            best = cur.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return best, log


def per_layer_weight_sums(net):
    """For each parameterized layer, the largest absolute weight sum feeding
    any single output node (biases excluded)."""
    if not net.weights:
        raise ValueError("net has no parameterized layer")
    sums = []
    for layer, w in zip(net.param_layers(), net.weights):
        if isinstance(layer, Conv1D):
            sums.append(float(np.abs(w).reshape(w.shape[0], -1).sum(axis=1).max()))
        else:
            sums.append(float(np.abs(w).sum(axis=1).max()))
    return sums


# --- net spec <-> text (used by the config format) ---------------------------

def spec_to_string(spec):
    parts = []
    for layer in spec:
        if isinstance(layer, Conv1D):
            parts.append(f"conv1d({layer.in_channels},{layer.out_channels},"
                         f"{layer.kernel_width},{layer.stride})")
        elif isinstance(layer, Dense):
            parts.append(f"dense({layer.in_dim},{layer.out_dim})")
        else:
            parts.append("relu")
    return "; ".join(parts)


def string_to_spec(text):
    spec = []
    for raw in text.split(";"):
        token = raw.strip().lower()
        if not token:
            continue
        if token == "relu":
            spec.append(ReLU())
        elif token.startswith("conv1d(") and token.endswith(")"):
            args = [int(v) for v in token[7:-1].split(",")]
            if len(args) == 3:
                args.append(1)
            if len(args) != 4:
                raise ValueError(f"bad conv1d spec: {raw!r}")
            spec.append(Conv1D(*args))
        elif token.startswith("dense(") and token.endswith(")"):
            args = [int(v) for v in token[6:-1].split(",")]
            if len(args) != 2:
                raise ValueError(f"bad dense spec: {raw!r}")
            spec.append(Dense(*args))
        else:
            raise ValueError(f"unknown layer spec: {raw!r}")
    return tuple(spec)
