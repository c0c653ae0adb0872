"""Confusion matrix, derived rates, ROC curve and trapezoidal AUC."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .nn.functional import bce_loss, classify


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self):
        return {"fn": self.fn, "fp": self.fp, "tn": self.tn, "tp": self.tp}


@dataclass(frozen=True)
class Rates:
    accuracy: float
    recall: float
    specificity: float
    precision: float
    f1: float
    degenerate: tuple = ()  # names of rates defined by convention (0/0)

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "degenerate": list(self.degenerate),
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "specificity": self.specificity,
        }


def _binary(a, name):
    a = np.asarray(a).astype(np.int64).ravel()
    if not np.isin(a, (0, 1)).all():
        raise DataError(f"{name} must be binary")
    return a


def confusion(preds, truth) -> ConfusionMatrix:
    preds = _binary(preds, "predictions")
    truth = _binary(truth, "truth")
    if preds.shape != truth.shape:
        raise DataError(f"length mismatch: {preds.size} predictions vs {truth.size} labels")
    return ConfusionMatrix(
        tp=int(np.sum((preds == 1) & (truth == 1))),
        fp=int(np.sum((preds == 1) & (truth == 0))),
        tn=int(np.sum((preds == 0) & (truth == 0))),
        fn=int(np.sum((preds == 0) & (truth == 1))),
    )


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def rates(cm: ConfusionMatrix) -> Rates:
    """Accuracy, recall, specificity, precision and F1; 0/0 cases yield 0 and are flagged."""
    if cm.total == 0:
        raise DataError("empty confusion matrix")
    flags = []
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", flags)
    specificity = _ratio(cm.tn, cm.tn + cm.fp, "specificity", flags)
    precision = _ratio(cm.tp, cm.tp + cm.fp, "precision", flags)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", flags)
    return Rates((cm.tp + cm.tn) / cm.total, recall, specificity, precision, f1, tuple(flags))


def roc_curve(scores, truth):
    """ROC points ``(threshold, fpr, tpr)`` in order of descending threshold.

    Thresholds are a sentinel (max score + 1) followed by every distinct
    score; a record counts as positive when ``score >= threshold``.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    truth = _binary(truth, "truth")
    if scores.shape != truth.shape:
        raise DataError("scores and labels differ in length")
    P = int(truth.sum())
    N = truth.size - P
    if P == 0 or N == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = truth[order]
    tp = np.cumsum(t)
    fp = np.cumsum(1 - t)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    points = [(float(s[0] + 1.0), 0.0, 0.0)]
    for e in ends:
        points.append((float(s[e]), float(fp[e] / N), float(tp[e] / P)))
    return points


def auc(points) -> float:
    """Trapezoidal area under ROC points (as returned by :func:`roc_curve`)."""
    if len(points) < 2:
        raise DataError("an ROC curve needs at least two points")
    fpr = np.array([p[1] for p in points])
    tpr = np.array([p[2] for p in points])
    if np.any(np.diff(fpr) < 0) or np.any(np.diff(tpr) < 0):
        raise DataError("ROC points are not monotone")
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc(scores, truth) -> float:
    return auc(roc_curve(scores, truth))


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    rates: Rates
    roc: list
    auc: float
    loss: float
    threshold: float = 0.5
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing=False):
        out = {
            "auc": self.auc,
            "confusion": self.confusion.to_dict(),
            "loss": self.loss,
            "n": self.confusion.total,
            "rates": self.rates.to_dict(),
            "roc_points": len(self.roc),
            "threshold": self.threshold,
        }
        if include_timing:
            out["timing"] = dict(sorted(self.timing.items()))
        return out

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return self.to_dict() == other.to_dict() and self.roc == other.roc


def evaluate(scores, truth, threshold=0.5) -> EvalReport:
    """Full report for probabilities ``scores`` against binary ``truth``."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = _binary(truth, "truth")
    cm = confusion(classify(scores, threshold), truth)
    points = roc_curve(scores, truth)
    return EvalReport(cm, rates(cm), points, auc(points), bce_loss(scores, truth), threshold)


def write_roc_csv(points, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for thr, fpr, tpr in points:
            w.writerow([repr(float(thr)), repr(float(fpr)), repr(float(tpr))])
    return path
