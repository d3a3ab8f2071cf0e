"""Matplotlib renderings of the report artifacts.

Every figure is written to a file next to its CSV/JSON counterpart; nothing
is shown interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_training_curves(history, path):
    """Loss and validation curves over epochs."""
    epochs = [r.epoch for r in history.records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(epochs, [r.task_loss for r in history.records], label="task")
    disc = [r.disc_loss for r in history.records]
    if np.isfinite(disc).any():
        ax1.plot(epochs, [r.adv_loss for r in history.records], label="adversarial")
        ax1.plot(epochs, [r.cls_loss for r in history.records], label="component cls")
        ax1.plot(epochs, disc, label="discriminator")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend()
    ax2.plot(epochs, [r.val_acc for r in history.records], color="tab:green")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation score")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_matrix_heatmap(matrix, path, title="", vmin=None, vmax=None, annotate=False):
    """Heatmap of a small matrix (confusion) or a large one (similarity)."""
    m = np.asarray(matrix, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(m, cmap="viridis", vmin=vmin, vmax=vmax, interpolation="nearest")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax)
    if annotate and m.shape[0] <= 12:
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                ax.text(j, i, f"{m[i, j]:.2f}", ha="center", va="center",
                        color="white", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_ablation_bars(rows, path):
    """Mean +/- std of test scores per ablation variant."""
    variants = []
    for r in rows:
        if r["variant"] not in variants:
            variants.append(r["variant"])
    means, stds = [], []
    for v in variants:
        scores = [r["test_score"] for r in rows if r["variant"] == v]
        means.append(float(np.mean(scores)))
        stds.append(float(np.std(scores)))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(variants)), means, yerr=stds, capsize=4, color="tab:blue")
    ax.set_xticks(range(len(variants)))
    ax.set_xticklabels(variants, rotation=20, ha="right")
    ax.set_ylabel("test score")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_graph_scores(scores, path):
    """Bar chart comparing label-propagation scores of adjacency variants."""
    names = list(scores)
    vals = [scores[k] for k in names]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(range(len(names)), vals, color="tab:purple")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=15, ha="right")
    ax.set_ylabel("label propagation accuracy")
    for i, v in enumerate(vals):
        ax.text(i, v, f"{v:.3f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
