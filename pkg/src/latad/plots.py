"""Static matplotlib outputs written into run directories."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def score_trace(
    path: str | Path,
    timestamps: np.ndarray,
    scores: np.ndarray,
    threshold: Optional[float] = None,
    labels: Optional[np.ndarray] = None,
) -> None:
    fig, ax = plt.subplots(figsize=(10, 3.5))
    ax.plot(timestamps, scores, lw=0.8, label="anomaly score")
    if threshold is not None:
        ax.axhline(threshold, color="red", ls="--", lw=1, label=f"threshold {threshold:.4g}")
    if labels is not None:
        labels = np.asarray(labels)
        ax.fill_between(
            timestamps,
            0,
            scores.max() if len(scores) else 1.0,
            where=labels > 0,
            alpha=0.15,
            color="orange",
            label="true anomaly",
        )
    ax.set_xlabel("timestamp")
    ax.set_ylabel("score")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def correlation_heatmap(path: str | Path, values: np.ndarray, feature_names: Sequence[str]) -> None:
    """Pearson correlation between features; constant features correlate as 0."""
    values = np.asarray(values, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(values, rowvar=False)
    corr = np.nan_to_num(np.atleast_2d(corr))
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(corr, vmin=-1, vmax=1, cmap="coolwarm")
    ticks = np.arange(len(feature_names))
    ax.set_xticks(ticks, feature_names, rotation=90, fontsize=7)
    ax.set_yticks(ticks, feature_names, fontsize=7)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def feature_trends(
    path: str | Path,
    window_values: np.ndarray,
    ranked_features: Sequence[int],
    feature_names: Sequence[str],
    start_timestamp: int = 0,
) -> None:
    """One small panel per flagged feature over the diagnosed window."""
    window_values = np.asarray(window_values, dtype=float)
    n = max(1, len(ranked_features))
    fig, axes = plt.subplots(n, 1, figsize=(8, 1.8 * n), sharex=True, squeeze=False)
    t = start_timestamp + np.arange(len(window_values))
    for ax, feat in zip(axes[:, 0], ranked_features):
        ax.plot(t, window_values[:, feat], lw=0.9)
        ax.set_ylabel(feature_names[feat] if feat < len(feature_names) else f"f{feat}", fontsize=8)
    axes[-1, 0].set_xlabel("timestamp")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
