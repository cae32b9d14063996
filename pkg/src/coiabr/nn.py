"""Feed-forward networks with hand-written backprop and Adam/SGD."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

RELU = "relu"
LINEAR = "linear"
ACTIVATIONS = (RELU, LINEAR)
CHECKPOINT_VERSION = 1


class DimensionMismatch(ValueError):
    pass


@dataclass
class Layer:
    weights: np.ndarray  # (in_dim, out_dim)
    biases: np.ndarray   # (out_dim,)
    activation: str = RELU

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[1],):
            raise DimensionMismatch("bias length must equal the layer's output width")


@dataclass
class Network:
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weights.shape[1] != b.weights.shape[0]:
                raise DimensionMismatch("consecutive layer dimensions are incompatible")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [l.weights.shape[1] for l in self.layers]

    def params(self) -> list[np.ndarray]:
        out = []
        for l in self.layers:
            out += [l.weights, l.biases]
        return out

    def copy(self) -> "Network":
        return Network([Layer(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers])

    def __call__(self, x):
        return forward(self, x)


def init_network(dims: Sequence[int], seed: int = 0, hidden_activation: str = RELU,
                 output_activation: str = LINEAR, rng: np.random.Generator | None = None) -> Network:
    """He-uniform init for rectifier layers, Xavier-uniform for linear ones; zero biases."""
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    rng = rng if rng is not None else np.random.default_rng(seed)
    layers = []
    for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
        act = output_activation if i == len(dims) - 2 else hidden_activation
        limit = np.sqrt(6.0 / n_in) if act == RELU else np.sqrt(6.0 / (n_in + n_out))
        layers.append(Layer(rng.uniform(-limit, limit, size=(n_in, n_out)), np.zeros(n_out), act))
    return Network(layers)


def _check_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (net.input_dim,) or x.ndim > 2:
        raise DimensionMismatch(f"expected input width {net.input_dim}, got shape {x.shape}")
    return x


def forward_trace(net: Network, x) -> list[np.ndarray]:
    """Activations of every layer, input first; accepts a vector or a batch of rows."""
    x = _check_input(net, x)
    acts = [x]
    for l in net.layers:
        z = acts[-1] @ l.weights + l.biases
        acts.append(np.maximum(z, 0.0) if l.activation == RELU else z)
    return acts


def forward(net: Network, x) -> np.ndarray:
    return forward_trace(net, x)[-1]


def backward(net: Network, x, output_gradient, acts: list[np.ndarray] | None = None):
    """Gradients of ``sum(output * output_gradient)`` w.r.t. every parameter.

    Returns ``[(dW, db), ...]`` per layer. For batched input the gradient is
    summed over rows.
    """
    if acts is None:
        acts = forward_trace(net, x)
    g = np.asarray(output_gradient, dtype=np.float64)
    if g.shape != acts[-1].shape:
        raise DimensionMismatch(f"output gradient shape {g.shape} != output shape {acts[-1].shape}")
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        l = net.layers[i]
        if l.activation == RELU:
            g = g * (acts[i + 1] > 0)
        a = acts[i]
        if a.ndim == 1:
            grads[i] = (np.outer(a, g), g.copy())
        else:
            grads[i] = (a.T @ g, g.sum(axis=0))
        if i:
            g = g @ l.weights.T
    return grads


@dataclass
class OptimizerState:
    method: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first: list[np.ndarray] | None = None
    second: list[np.ndarray] | None = None

    def __post_init__(self):
        if self.method not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.method!r}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def step(self, net: Network, grads) -> Network:
        return optimizer_step(self, net, grads)


def optimizer_step(opt: OptimizerState, net: Network, grads) -> Network:
    """Update ``net`` in place from per-layer ``(dW, db)`` and return it."""
    flat = [g for pair in grads for g in pair]
    params = net.params()
    if len(flat) != len(params) or any(g.shape != p.shape for g, p in zip(flat, params)):
        raise DimensionMismatch("gradient shapes do not match parameters")
    lr = opt.learning_rate
    if opt.method == "sgd":
        for p, g in zip(params, flat):
            p -= lr * g
        return net
    if opt.first is None:
        opt.first = [np.zeros_like(p) for p in params]
        opt.second = [np.zeros_like(p) for p in params]
    opt.step_count += 1
    t = opt.step_count
    b1, b2 = opt.beta1, opt.beta2
    scale = lr * np.sqrt(1.0 - b2 ** t) / (1.0 - b1 ** t)
    eps_hat = opt.eps * np.sqrt(1.0 - b2 ** t)
    for p, g, m, v in zip(params, flat, opt.first, opt.second):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= scale * m / (np.sqrt(v) + eps_hat)
    return net


def soft_update(target: Network, source: Network, tau: float) -> None:
    """``target <- tau * source + (1 - tau) * target``, in place."""
    for t, s in zip(target.params(), source.params()):
        t *= 1.0 - tau
        t += tau * s


def _forward_extended(params, activations, x) -> np.ndarray:
    h = np.asarray(x, dtype=np.longdouble)
    for (w, b), act in zip(params, activations):
        h = h @ w + b
        if act == RELU:
            h = np.maximum(h, 0)
    return h


def gradient_check(net: Network, loss: Callable[[np.ndarray], tuple[float, np.ndarray]], x,
                   step: float = 1e-5) -> float:
    """Max relative error between backprop and central differences.

    ``loss(output)`` returns ``(value, d value / d output)``. The
    finite-difference side runs the network in extended precision, so the
    loss should stay in numpy arithmetic (a Python ``float`` cast reintroduces
    double-precision cancellation in ``plus - minus``).
    """
    _, dout = loss(forward(net, x))
    analytic = [g for pair in backward(net, x, dout) for g in pair]
    params = [(l.weights.astype(np.longdouble), l.biases.astype(np.longdouble)) for l in net.layers]
    acts = [l.activation for l in net.layers]
    flat = [p for pair in params for p in pair]
    worst = 0.0
    for p, a in zip(flat, analytic):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            plus = loss(_forward_extended(params, acts, x))[0]
            p[idx] = orig - step
            minus = loss(_forward_extended(params, acts, x))[0]
            p[idx] = orig
            numeric = float((plus - minus) / (2 * step))
            denom = max(abs(a[idx]), abs(numeric), 1e-8)
            worst = max(worst, abs(a[idx] - numeric) / denom)
    return worst


def network_to_dict(net: Network) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "dims": net.dims,
        "activations": [l.activation for l in net.layers],
        "layers": [
            {"weights": l.weights.ravel().tolist(), "biases": l.biases.tolist()} for l in net.layers
        ],
    }


def network_from_dict(doc: dict) -> Network:
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    dims = doc["dims"]
    layers = []
    for i, (spec, act) in enumerate(zip(doc["layers"], doc["activations"])):
        w = np.array(spec["weights"], dtype=np.float64).reshape(dims[i], dims[i + 1])
        layers.append(Layer(w, np.array(spec["biases"], dtype=np.float64), act))
    return Network(layers)


def save_network(net: Network, path) -> None:
    with open(path, "w") as f:
        json.dump(network_to_dict(net), f)


def load_network(path) -> Network:
    with open(path) as f:
        return network_from_dict(json.load(f))
