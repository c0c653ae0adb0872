"""Seeded mini-batch training loop shared by both branches."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from .functional import bce_loss
from .optim import AdamState, TrainConfig, optimizer_step

log = logging.getLogger(__name__)


@dataclass
class History:
    loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {"loss": list(self.loss), "val_loss": list(self.val_loss), "warnings": list(self.warnings)}


def _take(data, idx):
    if isinstance(data, tuple):
        return tuple(a[idx] for a in data)
    return data[idx]


def _n_rows(data):
    return len(data[0]) if isinstance(data, tuple) else len(data)


def _apply(fn, data, chunk):
    n = _n_rows(data)
    out = np.empty(n)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        batch = _take(data, idx)
        out[idx] = fn(*batch) if isinstance(batch, tuple) else fn(batch)
    return out


def predict_proba(model, data, chunk=512):
    """Probabilities for every row of ``data`` (matrix, tuple or lazy dataset), in order."""
    return _apply(model.forward, data, chunk)


def predict_logits(model, data, chunk=512):
    return _apply(model.logits, data, chunk)


def train(model, data, y, cfg: TrainConfig, val=None):
    """Train a copy of ``model`` and return it with its per-epoch history.

    ``data`` is whatever ``model.loss_and_grads`` accepts: a matrix for the
    dense branch, an ``(X, lengths)`` tuple for the recurrent one. Rows are
    reshuffled every epoch from a generator seeded by ``cfg.seed``.
    ``val`` is an optional ``(data, y)`` pair scored after every epoch.
    """
    y = np.asarray(y)
    n = _n_rows(data)
    if n == 0 or len(y) != n:
        raise DataError("training data must be non-empty with one label per row")
    if not np.isin(y, (0, 1)).all():
        raise DataError("training labels must be binary")
    history = History()
    if len(np.unique(y)) < 2:
        history.warnings.append("single-class training data")
        log.warning("training on single-class data")

    model = model.copy()
    params = model.params
    state = AdamState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    bs = int(cfg.batch_size)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = perm[start : start + bs]
            loss, grads = model.loss_and_grads(_take(data, idx), y[idx])
            optimizer_step(params, grads, state, cfg, epoch)
            total += loss * len(idx)
        history.loss.append(total / n)
        if val is not None:
            vdata, vy = val
            p = predict_proba(model, vdata)
            history.val_loss.append(bce_loss(p, vy))
        log.debug("epoch %d loss %.6f", epoch, history.loss[-1])
    return model, history
