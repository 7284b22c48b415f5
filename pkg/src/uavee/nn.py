"""Small fully connected Q-network in plain numpy (float64).

ReLU on hidden layers, identity output, masked mean-squared error and an
RMSprop optimiser. Weights are stored as ``(fan_in, fan_out)`` matrices so a
batch ``x`` of shape ``(B, fan_in)`` maps through ``x @ W + b``.

Checkpoint layout (``.npz``): ``format_version`` (int, currently 1),
``sizes`` (int array of layer widths), then ``W0, b0, W1, b1, ...``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_VERSION = 1
QNET_SIZES = (27, 128, 64, 5)


@dataclass
class ParameterSet:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def copy(self) -> "ParameterSet":
        return ParameterSet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        """Flat view order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def equals(self, other: "ParameterSet") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def init_params(sizes: Sequence[int], rng: np.random.Generator) -> ParameterSet:
    """Glorot-uniform weights, zero biases."""
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output size")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ParameterSet(weights, biases)


def zeros_like(params: ParameterSet) -> ParameterSet:
    return ParameterSet([np.zeros_like(w) for w in params.weights],
                        [np.zeros_like(b) for b in params.biases])


def copy_params(params: ParameterSet) -> ParameterSet:
    return params.copy()


def _check_input(params: ParameterSet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n_in = params.weights[0].shape[0]
    if x.shape[-1] != n_in or x.ndim > 2:
        raise ValueError(f"input shape {x.shape} does not match network input size {n_in}")
    return x


def forward(params: ParameterSet, x) -> np.ndarray:
    x = _check_input(params, x)
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k < last:
            np.maximum(h, 0.0, out=h)
    return h


def backward(params: ParameterSet, inputs, targets, mask) -> tuple[ParameterSet, float]:
    """Gradient of the masked MSE ``mean_b sum_a mask*(Q - target)^2``.

    ``mask`` is one-hot over actions (the taken action per sample), so each
    sample contributes ``(Q(s, a) - y)^2``.
    """
    x = _check_input(params, inputs)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("backward needs a non-empty 2D batch")
    targets = np.asarray(targets, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    n = len(x)

    acts = [x]
    pre = []
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k < last else z
        acts.append(h)

    err = (acts[-1] - targets) * mask
    loss = float(np.sum(err * err) / n)
    delta = 2.0 * err / n

    gw = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    for k in range(last, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k].T) * (pre[k - 1] > 0)
    return ParameterSet(gw, gb), loss


class RMSprop:
    """cache <- decay*cache + (1-decay)*g^2; p <- p - lr*g/(sqrt(cache)+eps)."""

    def __init__(self, params: ParameterSet, learning_rate: float, decay: float = 0.99,
                 eps: float = 1e-8):
        self.lr = learning_rate
        self.decay = decay
        self.eps = eps
        self.cache = zeros_like(params)

    def update(self, params: ParameterSet, grads: ParameterSet) -> ParameterSet:
        rmsprop_update(params, grads, self.cache, self.lr, self.decay, self.eps)
        return params


def rmsprop_update(params: ParameterSet, grads: ParameterSet, cache: ParameterSet,
                   learning_rate: float, decay: float = 0.99, eps: float = 1e-8) -> ParameterSet:
    """In-place RMSprop step on ``params`` and ``cache``; returns ``params``."""
    for p, g, c in zip(params.arrays(), grads.arrays(), cache.arrays()):
        if p.shape != g.shape or p.shape != c.shape:
            raise ValueError(f"shape mismatch {p.shape} / {g.shape} / {c.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    for p, g, c in zip(params.arrays(), grads.arrays(), cache.arrays()):
        c *= decay
        c += (1.0 - decay) * g * g
        p -= learning_rate * g / (np.sqrt(c) + eps)
    return params


def save_params(path, params: ParameterSet) -> None:
    arrays = {"format_version": np.array(CHECKPOINT_VERSION),
              "sizes": np.array(params.sizes, dtype=np.int64)}
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{k}"] = w
        arrays[f"b{k}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_params(path) -> ParameterSet:
    path = Path(path)
    with np.load(path) as z:
        if "format_version" not in z or int(z["format_version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint format")
        n_layers = len(z["sizes"]) - 1
        params = ParameterSet([z[f"W{k}"].astype(np.float64) for k in range(n_layers)],
                              [z[f"b{k}"].astype(np.float64) for k in range(n_layers)])
    if not all(np.all(np.isfinite(a)) for a in params.arrays()):
        raise ValueError(f"{path}: checkpoint contains non-finite values")
    return params
