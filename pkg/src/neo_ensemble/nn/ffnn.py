"""Dense feed-forward branch (default 8:16:32:1, ReLU hidden, sigmoid output)."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .functional import bce_loss, relu, sigmoid


def glorot_uniform(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def check_arch(arch, min_len=2):
    arch = [int(a) for a in arch]
    if len(arch) < min_len:
        raise ConfigError(f"architecture {arch} needs at least {min_len} layers")
    if any(a <= 0 for a in arch):
        raise ConfigError(f"architecture {arch} has a non-positive layer size")
    if arch[-1] != 1:
        raise ConfigError(f"architecture {arch} must end in a single output unit")
    return arch


class FfnnModel:
    """Weights are stored ``(out, in)``; hidden layers use ``activation``."""

    kind = "ffnn"

    def __init__(self, sizes, weights, biases, activation="relu"):
        self.sizes = list(sizes)
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.activation = activation
        if activation != "relu":
            raise ConfigError(f"unsupported hidden activation {activation!r}")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[k + 1], self.sizes[k]) or b.shape != (self.sizes[k + 1],):
                raise ConfigError(f"layer {k} parameter shapes disagree with sizes {self.sizes}")

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def param_names(self):
        return [f"{p}{k}" for k in range(len(self.weights)) for p in ("W", "b")]

    @property
    def n_inputs(self):
        return self.sizes[0]

    def copy(self):
        return FfnnModel(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input of width {self.sizes[0]}, got shape {X.shape}")
        return X

    def _forward(self, X):
        acts = [X]
        a = X
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = z if k == last else relu(z)
            acts.append(a)
        return acts

    def logits(self, X):
        """Pre-sigmoid output score for each row of ``X``."""
        return self._forward(self._check(X))[-1][:, 0]

    def forward(self, X):
        return sigmoid(self.logits(X))

    def loss_and_grads(self, X, y):
        """Mean BCE over the batch and its gradient for every entry of ``params``."""
        X = self._check(X)
        y = np.asarray(y, dtype=np.float64)
        acts = self._forward(X)
        p = sigmoid(acts[-1][:, 0])
        loss = bce_loss(p, y)
        delta = ((p - y) / len(y))[:, None]
        grads = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            grads[2 * k] = delta.T @ acts[k]
            grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k]) * (acts[k] > 0)
        return loss, grads


def init_ffnn(arch, seed=0, activation="relu"):
    """Glorot-uniform weights, zero biases; deterministic for a given seed."""
    arch = check_arch(arch)
    rng = np.random.default_rng(seed)
    weights = [glorot_uniform(rng, arch[k + 1], arch[k]) for k in range(len(arch) - 1)]
    biases = [np.zeros(arch[k + 1]) for k in range(len(arch) - 1)]
    return FfnnModel(arch, weights, biases, activation)


def ffnn_forward(m: FfnnModel, x):
    """Probability for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("ffnn_forward takes a single vector")
    return float(m.forward(x[None, :])[0])
