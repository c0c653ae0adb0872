"""Synthetic minority over-sampling (SMOTE) with exact brute-force neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    target_ratio: float = 1.0
    seed: int = 0
    apply_to: tuple = ("train",)

    def __post_init__(self):
        object.__setattr__(self, "apply_to", tuple(self.apply_to))
        if int(self.k) < 1:
            raise ConfigError(f"SMOTE k must be >= 1, got {self.k}")
        if not self.target_ratio > 0:
            raise ConfigError(f"SMOTE target_ratio must be > 0, got {self.target_ratio}")
        leaked = [s for s in self.apply_to if s != "train"]
        if leaked:
            raise ConfigError(f"SMOTE may only be applied to the training split, not {leaked}")


def minority_neighbors(X_min: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows for every row of ``X_min``.

    Euclidean distance, ties broken by the lower row index; ``k`` is clamped
    to ``len(X_min) - 1``.
    """
    X_min = np.asarray(X_min, dtype=np.float64)
    m = X_min.shape[0]
    if m < 2:
        raise DataError("SMOTE needs at least 2 minority rows to interpolate")
    k = min(int(k), m - 1)
    out = np.empty((m, k), dtype=np.int64)
    for i in range(m):
        # exact differences, so duplicates tie at exactly 0
        d2 = np.sum((X_min - X_min[i]) ** 2, axis=1)
        d2[i] = np.inf
        out[i] = np.argsort(d2, kind="stable")[:k]
    return out


def synthesize(s, n, u):
    """Point at fraction ``u`` along the segment from ``s`` to ``n``."""
    s = np.asarray(s, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if s.shape != n.shape:
        raise ValueError(f"dimension mismatch: {s.shape} vs {n.shape}")
    return s + u * (n - s)


def oversample(X, y, cfg: SmoteConfig = SmoteConfig()):
    """Grow the minority class until it is ``round(target_ratio * majority)``.

    Originals come first and unchanged; synthetic rows follow. Each synthetic
    row picks a random minority sample, one of its ``k`` nearest minority
    neighbours and ``u ~ U[0, 1]``.

    Returns
    -------
    X_out, y_out : ndarray
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.shape[0] != y.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]} labels")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) != 2:
        raise DataError("SMOTE requires both classes to be present")
    minority = classes[np.argmin(counts)] if counts[0] != counts[1] else classes[1]
    n_min, n_maj = counts.min(), counts.max()
    target = int(round(cfg.target_ratio * n_maj))
    n_new = target - n_min
    if n_new <= 0:
        return X.copy(), y.copy()

    min_idx = np.flatnonzero(y == minority)
    X_min = X[min_idx]
    nbrs = minority_neighbors(X_min, cfg.k)

    rng = np.random.default_rng(cfg.seed)
    base = rng.integers(0, len(min_idx), size=n_new)
    pick = rng.integers(0, nbrs.shape[1], size=n_new)
    u = rng.random(size=n_new)
    S = X_min[base]
    N = X_min[nbrs[base, pick]]
    synthetic = S + u[:, None] * (N - S)
    X_out = np.vstack([X, synthetic])
    y_out = np.concatenate([y, np.full(n_new, minority, dtype=np.int64)])
    return X_out, y_out
