"""Fixed-weight aggregation of the two branch probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .nn import ffnn_forward, rnn_forward
from .nn.functional import classify


@dataclass(frozen=True)
class EnsembleConfig:
    weights: tuple = (0.5, 0.5)
    threshold: float = 0.5

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != 2 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
            raise ConfigError(f"ensemble weights must be two nonnegative numbers summing to 1, got {w}")
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")

    def to_dict(self):
        return {"threshold": self.threshold, "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d.get("weights", (0.5, 0.5))), float(d.get("threshold", 0.5)))


def aggregate(p_ffnn, p_rnn, cfg: EnsembleConfig = EnsembleConfig()):
    """Weighted average ``w_ffnn * p_ffnn + w_rnn * p_rnn`` (scalars or arrays)."""
    a = np.asarray(p_ffnn, dtype=np.float64)
    b = np.asarray(p_rnn, dtype=np.float64)
    if np.any((a < 0) | (a > 1)) or np.any((b < 0) | (b > 1)):
        raise ValueError("branch probabilities must lie in [0, 1]")
    w1, w2 = cfg.weights
    out = w1 * a + w2 * b
    # rounding can push a convex combination a hair outside its inputs
    out = np.clip(out, np.minimum(a, b), np.maximum(a, b))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PreparedRecord:
    """Both model views of one preprocessed record."""

    numeric: np.ndarray  # dense-branch input
    sequence: np.ndarray  # (time, width)
    valid_len: int


def predict(ffnn, rnn, record: PreparedRecord, cfg: EnsembleConfig = EnsembleConfig()):
    """Return ``(probability, label)`` for a single record."""
    p = aggregate(ffnn_forward(ffnn, record.numeric), rnn_forward(rnn, record.sequence, record.valid_len), cfg)
    return p, classify(p, cfg.threshold)


def predict_batch(p_ffnn, p_rnn, cfg: EnsembleConfig = EnsembleConfig()):
    """Vectorised :func:`predict` over precomputed branch probabilities."""
    p = aggregate(p_ffnn, p_rnn, cfg)
    return p, classify(p, cfg.threshold)
