"""Figures written next to the delimited report files."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FRAME_COLOR = "0.35"


def new_figure(width=6.0, height=None):
    """Figure and axes with a golden-ratio default height."""
    if height is None:
        height = width * (math.sqrt(5) - 1.0) / 2.0
    fig, ax = plt.subplots(figsize=(width, height), facecolor="w")
    return fig, ax


def set_axes_props(ax, xlabel=None, ylabel=None, title=None, legend=False):
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    for spine in ax.spines.values():
        spine.set_edgecolor(FRAME_COLOR)
    ax.tick_params(color=FRAME_COLOR, labelcolor=FRAME_COLOR, labelsize=8)
    if xlabel:
        ax.set_xlabel(xlabel, color=FRAME_COLOR)
    if ylabel:
        ax.set_ylabel(ylabel, color=FRAME_COLOR)
    if title:
        ax.set_title(title, color=FRAME_COLOR, fontsize=10)
    if legend:
        ax.legend(frameon=False, fontsize=8)


def save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_roc(curves, path):
    """``curves`` maps a label to ``(roc_points, auc)``."""
    fig, ax = new_figure(4.5, 4.5)
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="0.6", label="random (AUC = 0.5)")
    for name, (points, area) in curves.items():
        fpr = [p[1] for p in points]
        tpr = [p[2] for p in points]
        ax.plot(fpr, tpr, lw=1.5, label=f"{name} (AUC = {area:.4f})")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    set_axes_props(ax, "false positive rate", "true positive rate", "ROC", legend=True)
    return save(fig, path)


def plot_loss(histories, path):
    fig, ax = new_figure()
    for name, hist in histories.items():
        epochs = np.arange(1, len(hist["loss"]) + 1)
        ax.plot(epochs, hist["loss"], marker="o", ms=3, label=f"{name} train")
        if hist.get("val_loss"):
            ax.plot(epochs, hist["val_loss"], ls="--", label=f"{name} validation")
    ax.set_yscale("log")
    set_axes_props(ax, "epoch", "mean BCE", "training loss", legend=True)
    return save(fig, path)


def plot_confusion(cm, path, title="confusion matrix"):
    grid = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]])
    fig, ax = new_figure(3.6, 3.2)
    ax.imshow(grid, cmap="Blues")
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, str(v), ha="center", va="center", color="black" if v < grid.max() / 2 else "white")
    ax.set_xticks([0, 1], ["pred 0", "pred 1"])
    ax.set_yticks([0, 1], ["true 0", "true 1"])
    set_axes_props(ax, title=title)
    return save(fig, path)


def plot_relevance(names, values, path):
    fig, ax = new_figure()
    ax.bar(range(len(values)), values, color="tab:blue")
    ax.set_xticks(range(len(names)), names)
    set_axes_props(ax, "feature", "mean |relevance|", "LRP feature relevance")
    return save(fig, path)


def plot_correlation(names, matrix, path, threshold=0.75):
    fig, ax = new_figure(5.0, 4.4)
    im = ax.imshow(matrix, cmap="coolwarm", vmin=-1, vmax=1)
    for (i, j), v in np.ndenumerate(matrix):
        weight = "bold" if i != j and abs(v) > threshold else "normal"
        ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=6, fontweight=weight)
    ax.set_xticks(range(len(names)), names, rotation=45)
    ax.set_yticks(range(len(names)), names)
    fig.colorbar(im, ax=ax, fraction=0.046)
    set_axes_props(ax, title="Pearson correlation")
    return save(fig, path)
