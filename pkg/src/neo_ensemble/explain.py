"""Epsilon-rule relevance propagation for the dense branch and correlation screening."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .nn.ffnn import FfnnModel

LRP_EPS = 1e-6


def lrp(m: FfnnModel, x, eps: float = LRP_EPS) -> np.ndarray:
    """Input-feature relevances of the pre-sigmoid output for one record.

    Starting from the output score, each dense layer hands relevance back as
    ``R_j = a_j * sum_k w_kj R_k / (z_k + eps * sign(z_k))`` where
    ``z_k = sum_j a_j w_kj`` excludes the bias, so the input relevances sum
    to the output score up to the epsilon leakage.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.n_inputs,):
        raise ValueError(f"expected an input vector of length {m.n_inputs}, got shape {x.shape}")
    acts = m._forward(x[None, :])
    R = acts[-1][0]
    for k in range(len(m.weights) - 1, -1, -1):
        a = acts[k][0]
        W = m.weights[k]
        z = W @ a
        denom = z + eps * np.where(z >= 0, 1.0, -1.0)
        R = a * (W.T @ (R / denom))
    return R


def lrp_batch(m: FfnnModel, X, eps: float = LRP_EPS) -> np.ndarray:
    return np.array([lrp(m, x, eps) for x in np.asarray(X, dtype=np.float64)]).reshape(-1, m.n_inputs)


def mean_abs_relevance(m: FfnnModel, X, eps: float = LRP_EPS) -> np.ndarray:
    """Aggregate importance per feature: mean of ``|R_i|`` over the rows of ``X``."""
    return np.mean(np.abs(lrp_batch(m, X, eps)), axis=0)


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    degenerate: tuple  # per column: True when the column has zero variance

    def __post_init__(self):
        object.__setattr__(self, "degenerate", tuple(bool(x) for x in self.degenerate))


def correlation_matrix(X) -> CorrelationMatrix:
    """Pearson correlations between columns; zero-variance columns get 0 everywhere."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("correlation needs at least 2 rows")
    C = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(C**2, axis=0))
    degenerate = norms == 0
    safe = np.where(degenerate, 1.0, norms)
    Cn = C / safe
    R = Cn.T @ Cn
    R = np.clip((R + R.T) / 2.0, -1.0, 1.0)
    R[degenerate, :] = 0.0
    R[:, degenerate] = 0.0
    np.fill_diagonal(R, np.where(degenerate, 0.0, 1.0))
    return CorrelationMatrix(R, degenerate)


def redundancy_report(cm: CorrelationMatrix, threshold: float = 0.75):
    """Unordered feature pairs ``(i, j)``, ``i < j``, with ``|r| > threshold``."""
    R = cm.values
    p = R.shape[0]
    return [(i, j) for i in range(p) for j in range(i + 1, p) if abs(R[i, j]) > threshold]
