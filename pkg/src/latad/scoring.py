"""Latent-similarity anomaly scoring and threshold selection.

A spherical K-means reference model is fitted on a coreset of training
features; the anomaly score of a window is the adjusted cosine distance to
the nearest center, divided by the feature norm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import torch

from .evaluation import pa_percent_k, point_adjust, prf1, segments_from_labels
from .preprocessing import window_starts


class CoresetSmallerThanKWarning(UserWarning):
    pass


class EmptyCandidateSetWarning(UserWarning):
    pass


@dataclass
class ReferenceModel:
    centers: np.ndarray  # (K, d_model), unit rows
    coreset_fraction: float = 0.10

    @property
    def k(self) -> int:
        return len(self.centers)

    def save(self, path) -> None:
        np.savez(path, centers=self.centers, coreset_fraction=self.coreset_fraction)

    @classmethod
    def load(cls, path) -> "ReferenceModel":
        data = np.load(path)
        return cls(centers=data["centers"], coreset_fraction=float(data["coreset_fraction"]))


@dataclass
class ScoreSeries:
    scores: np.ndarray
    threshold: Optional[float] = None
    predictions: Optional[np.ndarray] = None
    window: int = 0
    metadata: dict = field(default_factory=dict)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize zero feature vectors")
    return x / norms


def spherical_kmeans(
    points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100
) -> tuple[np.ndarray, list[float]]:
    """Cosine-similarity K-means on unit-normalized points.

    Returns unit centers and the per-iteration objective (sum of cosine
    similarity to the assigned center), which is non-decreasing.
    """
    x = _unit_rows(np.asarray(points, dtype=float))
    n = len(x)
    if k < 1 or k > n:
        raise ValueError(f"k={k} invalid for {n} points")
    centers = x[rng.choice(n, size=k, replace=False)].copy()
    assign = np.full(n, -1)
    objective: list[float] = []
    for _ in range(max_iter):
        sims = x @ centers.T  # (n, k)
        new_assign = sims.argmax(axis=1)
        objective.append(float(sims[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = x[assign == j]
            if len(members) == 0:
                continue  # empty cluster keeps its previous center
            mean = members.sum(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                centers[j] = mean / norm
    return centers, objective


def fit_reference(
    train_features: np.ndarray,
    clusters: int = 10,
    coreset_fraction: float = 0.10,
    seed: int = 0,
    max_iter: int = 100,
) -> ReferenceModel:
    """Fit the K-means reference on a uniformly sampled coreset of features."""
    feats = np.asarray(train_features, dtype=float)
    if len(feats) < 1:
        raise ValueError("no training features to fit on")
    rng = np.random.default_rng(seed)
    size = int(np.ceil(coreset_fraction * len(feats)))
    size = max(1, min(size, len(feats)))
    coreset = feats[rng.choice(len(feats), size=size, replace=False)]
    k = clusters
    if k > len(coreset):
        warnings.warn(
            f"coreset of {len(coreset)} points smaller than K={k}; reducing K",
            CoresetSmallerThanKWarning,
        )
        k = len(coreset)
    centers, _ = spherical_kmeans(coreset, k, rng, max_iter)
    return ReferenceModel(centers=centers, coreset_fraction=coreset_fraction)


def anomaly_scores(
    features: np.ndarray, ref: ReferenceModel, divide_by_norm: bool = True
) -> np.ndarray:
    """Nearest adjusted-cosine distance to the reference centers, per feature vector.

    With divide_by_norm the distance is additionally scaled by 1/||z||.
    """
    z = np.asarray(features, dtype=float)
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0):
        raise ValueError("anomaly score undefined for zero feature vectors")
    unit = z / norms[:, None]
    sims = unit @ _unit_rows(ref.centers).T  # (n, K)
    dist = (1.0 - sims.max(axis=1)) / 2.0
    return dist / norms if divide_by_norm else dist


def anomaly_score(z: np.ndarray, ref: ReferenceModel, divide_by_norm: bool = True) -> float:
    return float(anomaly_scores(np.asarray(z, dtype=float)[None, :], ref, divide_by_norm)[0])


def predict_labels(scores: np.ndarray, threshold: float) -> np.ndarray:
    """1 where the score strictly exceeds the threshold."""
    return (np.asarray(scores, dtype=float) > threshold).astype(np.int64)


def _variant_f1(scores: np.ndarray, labels: np.ndarray, segments, threshold: float, adjust, pa_percent) -> float:
    preds = predict_labels(scores, threshold)
    if adjust == "pa":
        preds = point_adjust(preds, segments)
    elif adjust == "pa_k":
        preds = pa_percent_k(preds, segments, pa_percent)
    return prf1(labels, preds)[2]


def search_threshold(
    scores: np.ndarray,
    labels: np.ndarray,
    val_scores: Optional[np.ndarray] = None,
    adjust: str = "none",
    pa_percent: float = 50.0,
) -> float:
    """Exhaustive scan over distinct score values above the validation mean.

    Maximizes F1 of the chosen variant ("none", "pa", "pa_k"); ties break
    toward the larger threshold (fewer alarms).  An empty candidate set
    falls back to the validation mean with a warning.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(np.int64)
    floor = -np.inf if val_scores is None else float(np.mean(val_scores))
    candidates = np.unique(scores)
    candidates = candidates[candidates > floor]
    if len(candidates) == 0:
        warnings.warn(
            "no candidate thresholds above the validation mean; using the mean",
            EmptyCandidateSetWarning,
        )
        return floor
    segments = segments_from_labels(labels)
    best_t = None
    best_f1 = -1.0
    for threshold in candidates[::-1]:  # descending: first max wins ties
        f1 = _variant_f1(scores, labels, segments, float(threshold), adjust, pa_percent)
        if f1 > best_f1:
            best_f1 = f1
            best_t = float(threshold)
    return best_t


def extract_features(
    series: np.ndarray,
    window: int,
    extractor: torch.nn.Module,
    stride: int = 1,
    batch_size: int = 256,
) -> np.ndarray:
    """Latent features of sliding windows, batched, no gradients."""
    series = np.asarray(series, dtype=float)
    starts = window_starts(len(series), window, stride)
    dtype = next(extractor.parameters()).dtype
    out = []
    extractor.eval()
    with torch.no_grad():
        for lo in range(0, len(starts), batch_size):
            chunk = starts[lo : lo + batch_size]
            batch = torch.stack(
                [torch.as_tensor(series[s : s + window], dtype=dtype) for s in chunk]
            )
            out.append(extractor(batch).numpy())
    return np.concatenate(out, axis=0)


def score_series(
    test_series: np.ndarray,
    window: int,
    extractor: torch.nn.Module,
    ref: ReferenceModel,
    divide_by_norm: bool = True,
    batch_size: int = 256,
) -> ScoreSeries:
    """Per-timestamp scores from stride-1 windows.

    Each window's score lands on its final timestamp; the first window also
    covers the leading window-1 timestamps so the output aligns 1:1 with the
    series.
    """
    feats = extract_features(test_series, window, extractor, stride=1, batch_size=batch_size)
    window_scores = anomaly_scores(feats, ref, divide_by_norm)
    scores = np.empty(len(test_series), dtype=float)
    scores[: window - 1] = window_scores[0]
    scores[window - 1 :] = window_scores
    return ScoreSeries(scores=scores, window=window)


def quantile_threshold(val_scores: np.ndarray, quantile: float = 0.995) -> float:
    """Label-free deployment threshold: a high quantile of validation scores."""
    return float(np.quantile(np.asarray(val_scores, dtype=float), quantile))
