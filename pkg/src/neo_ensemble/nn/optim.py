"""SGD, Adam and the Adam-then-SGD schedule, updating parameter arrays in place."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError

OPTIMIZERS = ("adam", "sgd", "adam_then_sgd")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 100
    epochs: int = 100
    optimizer: str = "adam_then_sgd"
    switch_epoch: Optional[int] = None  # default: first half of ``epochs``, rounded up
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if int(self.batch_size) < 1:
            raise ConfigError("batch_size must be >= 1")
        if int(self.epochs) < 1:
            raise ConfigError("epochs must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")

    @property
    def effective_switch_epoch(self):
        return (self.epochs + 1) // 2 if self.switch_epoch is None else self.switch_epoch

    def method_for_epoch(self, epoch):
        if self.optimizer == "adam_then_sgd":
            return "adam" if epoch < self.effective_switch_epoch else "sgd"
        return self.optimizer

    def to_dict(self):
        return {
            "batch_size": self.batch_size,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epochs": self.epochs,
            "eps": self.eps,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "seed": self.seed,
            "switch_epoch": self.switch_epoch,
        }


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def sgd_step(params, grads, lr):
    for p, g in zip(params, grads):
        p -= lr * g


def adam_step(params, grads, state: AdamState, cfg: TrainConfig):
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def optimizer_step(params, grads, state: Optional[AdamState], cfg: TrainConfig, epoch: int = 0):
    """Apply one update in place and return ``(params, state)``."""
    if len(params) != len(grads):
        raise ValueError("parameter and gradient lists differ in length")
    if state is None:
        state = AdamState.for_params(params)
    if cfg.method_for_epoch(epoch) == "adam":
        adam_step(params, grads, state, cfg)
    else:
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        sgd_step(params, grads, cfg.learning_rate)
    return params, state
