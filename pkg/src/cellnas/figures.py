"""Figure rendering for CLI reports.

Every report-producing command writes a PNG next to its JSON/CSV output.
The Agg backend keeps rendering headless and byte-deterministic, which the
report determinism guarantee relies on.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120


def save_loss_figure(history, path) -> str:
    """Training loss over epochs on a log-scaled y axis."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    epochs = np.arange(1, len(history) + 1)
    ax.semilogy(epochs, history, color="tab:blue", linewidth=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.set_title("surrogate training")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def save_search_figure(evo_history, prune_scores, path) -> str:
    """Evolution's best-per-generation curve and pruning's per-step scores."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    if evo_history:
        ax.plot(np.arange(len(evo_history)), evo_history,
                color="tab:blue", linewidth=1.2, label="evolution best")
    if prune_scores:
        ax.plot(np.arange(len(prune_scores)), prune_scores,
                color="tab:orange", linewidth=1.2, marker="o",
                markersize=3, label="pruning supernet score")
    ax.set_xlabel("generation / pruning step")
    ax.set_ylabel("score")
    ax.set_title("search progress")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def save_matrix_figure(matrix, labels, path) -> str:
    """Heatmap of the pairwise rank-correlation matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n = len(labels)
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * n, 0.8 + 0.6 * n))
    masked = np.ma.masked_invalid(matrix)
    im = ax.imshow(masked, vmin=-1.0, vmax=1.0, cmap="RdBu_r")
    ax.set_xticks(range(n), labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(n), labels, fontsize=8)
    for i in range(n):
        for j in range(n):
            if not np.isnan(matrix[i, j]):
                ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center",
                        fontsize=7)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title("pairwise rank correlation", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)
