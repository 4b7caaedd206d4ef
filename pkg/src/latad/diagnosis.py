"""Gradient-based root-cause attribution for a flagged window."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from .scoring import ReferenceModel


@dataclass
class GradientMap:
    raw: np.ndarray  # (w, d) input gradients of the anomaly score
    normalized: np.ndarray  # per-feature standardized copy


@dataclass
class RootCauseReport:
    ranking: list[tuple[int, int]]  # (feature index, appearance count), best first
    top_k: int
    window_start: int = 0
    feature_names: Optional[list[str]] = None

    def to_dict(self) -> dict:
        names = self.feature_names or []
        return {
            "top_k": self.top_k,
            "window_start": self.window_start,
            "ranking": [
                {
                    "feature": int(i),
                    "name": names[i] if i < len(names) else f"f{i}",
                    "count": int(c),
                }
                for i, c in self.ranking
            ],
        }


def score_graph(
    window_values: torch.Tensor, extractor: torch.nn.Module, ref: ReferenceModel, divide_by_norm: bool = True
) -> torch.Tensor:
    """Differentiable anomaly score of one window (exact ties pick the first center)."""
    z = extractor(window_values.unsqueeze(0))[0]
    norm = torch.linalg.norm(z)
    if float(norm) == 0.0:
        raise ValueError("anomaly score undefined for zero feature vector")
    centers = torch.as_tensor(ref.centers, dtype=window_values.dtype)
    centers = centers / torch.linalg.norm(centers, dim=1, keepdim=True)
    sims = centers @ (z / norm)
    dists = (1.0 - sims) / 2.0
    nearest = int(torch.argmin(dists))  # argmin returns the first index on ties
    score = dists[nearest]
    return score / norm if divide_by_norm else score


def input_gradients(
    window_values: np.ndarray,
    extractor: torch.nn.Module,
    ref: ReferenceModel,
    divide_by_norm: bool = True,
) -> GradientMap:
    """d(score)/d(input) via reverse-mode differentiation through the extractor."""
    dtype = next(extractor.parameters()).dtype
    x = torch.as_tensor(np.asarray(window_values, dtype=float), dtype=dtype).requires_grad_(True)
    score = score_graph(x, extractor, ref, divide_by_norm)
    score.backward()
    raw = x.grad.detach().numpy().astype(float)
    return GradientMap(raw=raw, normalized=normalize_gradients(raw))


def normalize_gradients(g: np.ndarray) -> np.ndarray:
    """Standardize each feature column over the window; constant columns map to zeros."""
    g = np.asarray(g, dtype=float)
    mean = g.mean(axis=0)
    std = g.std(axis=0)  # population std over the window's timestamps
    out = np.zeros_like(g)
    live = std > 0
    out[:, live] = (g[:, live] - mean[live]) / std[live]
    return out


def root_causes(g_norm: np.ndarray, top_k: int = 4) -> RootCauseReport:
    """Rank features by how often they dominate |normalized gradient| per timestep.

    Ties at a timestep and ties in counts both break toward the lower
    feature index; only features that dominate at least once are listed.
    """
    g_norm = np.asarray(g_norm, dtype=float)
    w, d = g_norm.shape
    if top_k < 1 or top_k > d:
        raise ValueError(f"top_k={top_k} invalid for {d} features")
    winners = np.abs(g_norm).argmax(axis=1)  # first max per row
    counts = np.bincount(winners, minlength=d)
    order = sorted(range(d), key=lambda i: (-counts[i], i))
    ranking = [(i, int(counts[i])) for i in order if counts[i] > 0][:top_k]
    return RootCauseReport(ranking=ranking, top_k=top_k)


def diagnose_window(
    window_values: np.ndarray,
    window_start: int,
    extractor: torch.nn.Module,
    ref: ReferenceModel,
    top_k: int = 4,
    divide_by_norm: bool = True,
    feature_names: Optional[list[str]] = None,
) -> tuple[RootCauseReport, GradientMap]:
    grad = input_gradients(window_values, extractor, ref, divide_by_norm)
    report = root_causes(grad.normalized, top_k)
    report.window_start = window_start
    report.feature_names = feature_names
    return report, grad
