"""Minimal dense-network stack: forward, analytic backward, Adam.

Everything is float64 and batch-first. A network is a list of
(weights, bias, activation) layers with activation in {relu, identity,
sigmoid}; caches from `forward` feed `backward`, which produces exact
reverse-mode gradients. This is all the autodiff the estimators, the
policy and the value function need.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import RngState

ACTIVATIONS = ("relu", "identity", "sigmoid")


@dataclass
class Layer:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)
    activation: str


class DenseNet:
    """A chain of affine layers with elementwise activations."""

    def __init__(self, layers: list[Layer]):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.W.shape[1] != nxt.W.shape[0]:
                raise ValueError("consecutive layer dimensions must chain")
        for layer in layers:
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
        self.layers = layers

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].W.shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.W)
            out.append(layer.b)
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])


def dense_net(sizes: list[int], activations: list[str], rng: RngState) -> DenseNet:
    """Build a network with fan-in scaled uniform initialization.

    relu layers use He-style scaling, others Glorot-style; biases start at 0.
    """
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
        if act == "relu":
            bound = np.sqrt(6.0 / fan_in)
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.gen.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append(Layer(W=W, b=np.zeros(fan_out), activation=act))
    return DenseNet(layers)


def _apply(act: str, z: np.ndarray) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "sigmoid":
        return sigmoid(z)
    return z


def _d_apply(act: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    # a is the already-computed activation of z
    if act == "relu":
        return (z > 0.0).astype(np.float64)
    if act == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Evaluate the network; the cache retains pre-activations for backward."""
    squeeze = x.ndim == 1
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if h.shape[1] != net.in_dim:
        raise ValueError(f"input dim {h.shape[1]} != expected {net.in_dim}")
    cache = [h]
    for layer in net.layers:
        z = h @ layer.W + layer.b
        h = _apply(layer.activation, z)
        cache.append(z)
        cache.append(h)
    out = h[0] if squeeze else h
    return out, cache


def backward(net: DenseNet, cache: list, output_grad: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact gradients of the forward composition.

    Returns (param_grads, input_grad) where param_grads is ordered like
    net.params(). output_grad is d(loss)/d(output) for the cached batch.
    """
    if len(cache) != 2 * len(net.layers) + 1:
        raise ValueError("cache does not match network depth")
    g = np.atleast_2d(np.asarray(output_grad, dtype=np.float64))
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        z = cache[2 * i + 1]
        a = cache[2 * i + 2]
        h_in = cache[2 * i]
        gz = g * _d_apply(layer.activation, z, a)
        grads[2 * i] = h_in.T @ gz
        grads[2 * i + 1] = gz.sum(axis=0)
        g = gz @ layer.W.T
    return grads, g


class AdamState:
    """Bias-corrected Adam over a parameter list."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """One in-place Adam update. Non-finite gradients abort the run."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter/gradient shapes do not match optimizer state")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for i, (p, g) in enumerate(zip(params, grads)):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient encountered")
        if state.weight_decay:
            g = g + state.weight_decay * p
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / (1.0 - b1 ** state.t)
        v_hat = state.v[i] / (1.0 - b2 ** state.t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def gradient_check(net: DenseNet, x: np.ndarray, loss_grad_fn, step: float = 1e-5) -> float:
    """Max relative error between analytic and central finite-difference grads.

    loss_grad_fn maps the network output to (scalar loss, d loss/d output);
    the same function drives both routes, so the comparison is honest.
    """
    out, cache = forward(net, x)
    _, output_grad = loss_grad_fn(out)
    analytic, _ = backward(net, cache, output_grad)
    worst = 0.0
    params = net.params()
    for p, g in zip(params, analytic):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            lp, _ = loss_grad_fn(forward(net, x)[0])
            p[idx] = orig - step
            lm, _ = loss_grad_fn(forward(net, x)[0])
            p[idx] = orig
            fd = (lp - lm) / (2.0 * step)
            denom = max(abs(fd), abs(g[idx]), 1e-8)
            worst = max(worst, abs(fd - g[idx]) / denom)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints: self-describing header then little-endian float64 parameters.
# ---------------------------------------------------------------------------

_MAGIC = b"RVNN"


def save_net(net: DenseNet, path: str) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(net.layers)))
        for layer in net.layers:
            act = ACTIVATIONS.index(layer.activation)
            f.write(struct.pack("<III", layer.W.shape[0], layer.W.shape[1], act))
        for layer in net.layers:
            f.write(layer.W.astype("<f8").tobytes())
            f.write(layer.b.astype("<f8").tobytes())


def load_net(path: str) -> DenseNet:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError("not a network checkpoint")
        (n_layers,) = struct.unpack("<I", f.read(4))
        shapes = []
        for _ in range(n_layers):
            fan_in, fan_out, act = struct.unpack("<III", f.read(12))
            shapes.append((fan_in, fan_out, ACTIVATIONS[act]))
        layers = []
        for fan_in, fan_out, act in shapes:
            W = np.frombuffer(f.read(8 * fan_in * fan_out), dtype="<f8").reshape(fan_in, fan_out).copy()
            b = np.frombuffer(f.read(8 * fan_out), dtype="<f8").copy()
            layers.append(Layer(W=W, b=b, activation=act))
        return DenseNet(layers)
