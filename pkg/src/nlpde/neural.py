"""Dense feedforward networks with hand-written reverse-mode gradients.

All parameters of a net live in one flat vector.  Layer ``k`` occupies a
contiguous block holding its weight matrix ``W_k`` (shape ``out x in``,
row-major) followed by its bias ``b_k``; :attr:`NeuralNet.weights` and
:attr:`NeuralNet.biases` are views into that vector.  Optimizers therefore
work on plain arrays and a checkpoint is simply the vector in order.

Checkpoint format (text, one token group per line)::

    nlpde-net 1
    dims 1 51 51 1
    hidden tanh
    output square
    dtype float64
    <one parameter per line, repr precision>
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "Activation",
    "GradientBuffer",
    "NeuralNet",
    "backward",
    "default_dims",
    "forward",
    "forward_batch",
    "init_xavier",
    "load_checkpoint",
    "parameter_count",
    "save_checkpoint",
]

CHECKPOINT_MAGIC = "nlpde-net"
CHECKPOINT_VERSION = 1


class Activation(str, Enum):
    TANH = "tanh"
    RELU = "relu"
    LOGISTIC = "logistic"
    SQUARE = "square"
    IDENTITY = "identity"

    def apply(self, z):
        if self is Activation.TANH:
            return np.tanh(z)
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        if self is Activation.LOGISTIC:
            return 0.5 * (1.0 + np.tanh(0.5 * z))
        if self is Activation.SQUARE:
            return z * z
        return z

    def derivative(self, z, a):
        """Derivative at pre-activation ``z`` given the output ``a``; ReLU uses 0 at 0."""
        if self is Activation.TANH:
            return 1.0 - a * a
        if self is Activation.RELU:
            return (z > 0).astype(z.dtype)
        if self is Activation.LOGISTIC:
            return a * (1.0 - a)
        if self is Activation.SQUARE:
            return 2.0 * z
        return np.ones_like(z)


def default_dims(d: int, width_offset: int = 50) -> tuple[int, ...]:
    return (d, d + width_offset, d + width_offset, 1)


def parameter_count(layer_dims) -> int:
    return sum((n_in + 1) * n_out for n_in, n_out in zip(layer_dims[:-1], layer_dims[1:]))


def _layer_slices(layer_dims):
    out, start = [], 0
    for n_in, n_out in zip(layer_dims[:-1], layer_dims[1:]):
        w = slice(start, start + n_out * n_in)
        b = slice(w.stop, w.stop + n_out)
        out.append((w, b, n_in, n_out))
        start = b.stop
    return out


@dataclass(frozen=True)
class GradientBuffer:
    """Flat gradient congruent with a net's parameter vector."""

    flat: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, net: "NeuralNet") -> "GradientBuffer":
        return cls(np.zeros_like(net.params), 0)

    def __add__(self, other: "GradientBuffer") -> "GradientBuffer":
        if self.flat.shape != other.flat.shape:
            raise ValueError("gradient buffers of different shape")
        return GradientBuffer(self.flat + other.flat, self.count + other.count)


class NeuralNet:
    """Feedforward net ``x -> A_L(W_L ... act(W_1 x + b_1) ... + b_L)``.

    Hidden layers share one activation; the last layer has its own.
    """

    def __init__(self, layer_dims, hidden=Activation.TANH, output=Activation.IDENTITY, params=None, dtype=np.float64):
        dims = tuple(int(k) for k in layer_dims)
        if len(dims) < 2 or min(dims) < 1:
            raise ValueError(f"layer_dims needs at least two positive entries, got {dims}")
        self.layer_dims = dims
        self.hidden = Activation(hidden)
        self.output = Activation(output)
        size = parameter_count(dims)
        if params is None:
            params = np.zeros(size, dtype=dtype)
        params = np.array(params, dtype=dtype, copy=True).reshape(-1)
        if params.shape != (size,):
            raise ValueError(f"expected {size} parameters, got {params.shape[0]}")
        self.params = params
        self._slices = _layer_slices(dims)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def dtype(self):
        return self.params.dtype

    @property
    def weights(self) -> list[np.ndarray]:
        return [self.params[w].reshape(n_out, n_in) for w, _, n_in, n_out in self._slices]

    @property
    def biases(self) -> list[np.ndarray]:
        return [self.params[b] for _, b, _, _ in self._slices]

    def copy(self) -> "NeuralNet":
        return NeuralNet(self.layer_dims, self.hidden, self.output, self.params, self.dtype)

    def __repr__(self):
        return f"NeuralNet(dims={list(self.layer_dims)}, hidden={self.hidden.value}, output={self.output.value})"

    def _check_batch(self, xs):
        xs = np.asarray(xs, dtype=self.dtype)
        if xs.ndim != 2 or xs.shape[1] != self.input_dim:
            raise ValueError(f"expected points of shape (J, {self.input_dim}), got {xs.shape}")
        return xs

    def forward_cached(self, xs):
        """Outputs ``(J,)`` plus the per-layer ``(pre, post)`` activations backward needs."""
        xs = self._check_batch(xs)
        a = xs
        cache = [(None, xs)]
        last = len(self._slices) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W.T + b
            act = self.output if k == last else self.hidden
            a = act.apply(z)
            cache.append((z, a))
        return a[:, 0] if a.shape[1] == 1 else a, cache

    def forward_batch(self, xs) -> np.ndarray:
        return self.forward_cached(xs)[0]

    def forward(self, x) -> float:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected a point of shape ({self.input_dim},), got {x.shape}")
        return float(self.forward_batch(x[None])[0])

    def __call__(self, xs):
        return self.forward_batch(xs)

    def backward_cached(self, cache, upstream) -> GradientBuffer:
        """Gradient of ``sum_j upstream_j * net(x_j)`` from a :meth:`forward_cached` cache."""
        J = cache[0][1].shape[0]
        upstream = np.asarray(upstream, dtype=self.dtype)
        if upstream.shape[0] != J:
            raise ValueError(f"upstream has length {upstream.shape[0]}, batch has {J}")
        grad = np.zeros_like(self.params)
        weights = self.weights
        delta = upstream.reshape(J, -1)
        last = len(self._slices) - 1
        for k in range(last, -1, -1):
            z, a = cache[k + 1]
            act = self.output if k == last else self.hidden
            delta = delta * act.derivative(z, a)
            w_sl, b_sl, _, _ = self._slices[k]
            grad[w_sl] = (delta.T @ cache[k][1]).reshape(-1)
            grad[b_sl] = delta.sum(axis=0)
            if k > 0:
                delta = delta @ weights[k]
        return GradientBuffer(grad, J)

    def backward(self, xs, upstream) -> GradientBuffer:
        return self.backward_cached(self.forward_cached(xs)[1], upstream)


def forward(net: NeuralNet, x) -> float:
    return net.forward(x)


def forward_batch(net: NeuralNet, xs) -> np.ndarray:
    return net.forward_batch(xs)


def backward(net: NeuralNet, xs, upstream) -> GradientBuffer:
    return net.backward(xs, upstream)


def init_xavier(
    layer_dims, hidden=Activation.TANH, output=Activation.IDENTITY, rng=None, dtype=np.float64, biases="zero"
) -> NeuralNet:
    """Glorot-uniform weights on ``+-sqrt(6 / (fan_in + fan_out))``.

    Biases are zero by default.  ``biases="xavier"`` draws them from the same
    per-layer law, which matters when every training input is the same point:
    with zero biases a net fed the origin has a Square output stuck at a
    critical point.
    """
    if rng is None:
        raise ValueError("init_xavier needs a random stream")
    if biases not in ("zero", "xavier"):
        raise ValueError(f"unknown bias initialisation {biases!r}")
    net = NeuralNet(layer_dims, hidden, output, dtype=dtype)
    for w_sl, b_sl, n_in, n_out in net._slices:
        bound = np.sqrt(6.0 / (n_in + n_out))
        net.params[w_sl] = bound * (2.0 * rng.uniform(n_out * n_in) - 1.0)
        if biases == "xavier":
            net.params[b_sl] = bound * (2.0 * rng.uniform(n_out) - 1.0)
    return net


def save_checkpoint(net: NeuralNet, path) -> None:
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        "dims " + " ".join(str(k) for k in net.layer_dims),
        f"hidden {net.hidden.value}",
        f"output {net.output.value}",
        f"dtype {np.dtype(net.dtype).name}",
    ]
    lines += [repr(float(v)) for v in net.params]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> NeuralNet:
    lines = Path(path).read_text().split("\n")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != CHECKPOINT_MAGIC or int(magic[1]) != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} network checkpoint")
    header = {}
    for line in lines[1:5]:
        key, _, value = line.partition(" ")
        header[key] = value
    dims = [int(k) for k in header["dims"].split()]
    params = np.array([float(v) for v in lines[5:] if v.strip()])
    return NeuralNet(dims, header["hidden"], header["output"], params, np.dtype(header["dtype"]))
