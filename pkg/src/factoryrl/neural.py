"""Small dense networks with hand-written backprop and ADAM.

Everything runs in float64 numpy. Networks are plain parameter containers;
``forward``/``backward``/``adam_step`` are free functions so target copies
and finite-difference checks stay trivial.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1


def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(x))


def elu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, np.exp(x))


_ACTIVATIONS = {"elu": (elu, elu_grad), "linear": (lambda x: x, lambda x: np.ones_like(x))}


@dataclass
class DenseNet:
    """Fully-connected net: ``sizes[0] -> sizes[1] -> ... -> sizes[-1]``.

    ``activations`` names one activation per layer ('elu' or 'linear').
    """

    sizes: tuple[int, ...]
    activations: tuple[str, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.sizes) < 2:
            raise ValueError("need at least one layer")
        if len(self.activations) != len(self.sizes) - 1:
            raise ValueError("one activation per layer required")
        for act in self.activations:
            if act not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise ValueError(f"layer {i} parameter shapes do not chain")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "DenseNet":
        return DenseNet(
            self.sizes,
            self.activations,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def copy_from(self, other: "DenseNet") -> None:
        for mine, theirs in zip(self.weights, other.weights):
            mine[...] = theirs
        for mine, theirs in zip(self.biases, other.biases):
            mine[...] = theirs


@dataclass
class Gradient:
    """Per-parameter partials of a scalar loss, shaped like the net."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: DenseNet) -> "Gradient":
        return cls(
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
        )


def init_dense(
    sizes: tuple[int, ...],
    seed: int | np.random.Generator = 0,
    activations: tuple[str, ...] | None = None,
) -> DenseNet:
    """Fan-scaled uniform init: bound sqrt(6 / (fan_in + fan_out)), zero biases.

    Defaults to ELU on hidden layers and a linear output.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if activations is None:
        activations = ("elu",) * (len(sizes) - 2) + ("linear",)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNet(tuple(sizes), tuple(activations), weights, biases)


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Evaluate the net; accepts a single vector or a (batch, in) matrix."""
    h, squeeze = _as_batch(x)
    if h.shape[1] != net.sizes[0]:
        raise ValueError(f"input size {h.shape[1]} != expected {net.sizes[0]}")
    for w, b, act in zip(net.weights, net.biases, net.activations):
        h = _ACTIVATIONS[act][0](h @ w + b)
    return h[0] if squeeze else h


def backward(net: DenseNet, x: np.ndarray, grad_out: np.ndarray) -> Gradient:
    """Exact gradient of ``sum(grad_out * forward(net, x))`` w.r.t. parameters.

    ``grad_out`` is the loss gradient at the network output; batch rows are
    summed, so any 1/batch factor belongs in ``grad_out``.
    """
    h, _ = _as_batch(x)
    g, _ = _as_batch(grad_out)
    if g.shape != (h.shape[0], net.sizes[-1]):
        raise ValueError("grad_out shape does not match the output layer")
    inputs, pre_acts = [], []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        inputs.append(h)
        z = h @ w + b
        pre_acts.append(z)
        h = _ACTIVATIONS[act][0](z)
    grad = Gradient.zeros_like(net)
    upstream = g
    for layer in reversed(range(len(net.weights))):
        dz = upstream * _ACTIVATIONS[net.activations[layer]][1](pre_acts[layer])
        grad.weights[layer][...] = inputs[layer].T @ dz
        grad.biases[layer][...] = dz.sum(axis=0)
        upstream = dz @ net.weights[layer].T
    return grad


def backward_input(net: DenseNet, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Gradient of the same scalar w.r.t. the input vector(s)."""
    h, squeeze = _as_batch(x)
    g, _ = _as_batch(grad_out)
    pre_acts = []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = h @ w + b
        pre_acts.append(z)
        h = _ACTIVATIONS[act][0](z)
    upstream = g
    for layer in reversed(range(len(net.weights))):
        dz = upstream * _ACTIVATIONS[net.activations[layer]][1](pre_acts[layer])
        upstream = dz @ net.weights[layer].T
    return upstream[0] if squeeze else upstream


@dataclass
class AdamState:
    """Moment accumulators and step counter for one DenseNet."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(net: DenseNet, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for w, b in zip(net.weights, net.biases):
        state.m.extend([np.zeros_like(w), np.zeros_like(b)])
        state.v.extend([np.zeros_like(w), np.zeros_like(b)])
    return state


def reset_moments(state: AdamState) -> None:
    """Zero both moment accumulators and the step counter."""
    state.step = 0
    for m in state.m:
        m[...] = 0.0
    for v in state.v:
        v[...] = 0.0


def adam_step(net: DenseNet, grad: Gradient, state: AdamState) -> None:
    """One bias-corrected ADAM update, in place."""
    state.step += 1
    t = state.step
    params = []
    grads = []
    for w, b, gw, gb in zip(net.weights, net.biases, grad.weights, grad.biases):
        params.extend([w, b])
        grads.extend([gw, gb])
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def save_checkpoint(net: DenseNet, path) -> None:
    """Binary checkpoint with a version header; loadable via load_checkpoint."""
    arrays = {
        "version": np.array([CHECKPOINT_VERSION]),
        "sizes": np.array(net.sizes),
        "activations": np.array(net.activations),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_checkpoint(path) -> DenseNet:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"][0])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = tuple(int(s) for s in data["sizes"])
        activations = tuple(str(a) for a in data["activations"])
        weights = [data[f"w{i}"].copy() for i in range(len(sizes) - 1)]
        biases = [data[f"b{i}"].copy() for i in range(len(sizes) - 1)]
    return DenseNet(sizes, activations, weights, biases)


def clone(net: DenseNet) -> DenseNet:
    return copy.deepcopy(net)
