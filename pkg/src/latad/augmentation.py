"""Positive and negative sample construction for contrastive training.

Positives are windows drawn from the stationary temporal neighborhood of an
anchor (neighborhood width grown until an ADF test rejects stationarity).
Negatives are the anchor deformed by learnable sigmoid masks, one per
generator.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from statsmodels.tools.sm_exceptions import InterpolationWarning
from statsmodels.tsa.stattools import adfuller

MIN_ADF_LENGTH = 16


def _adf_pvalue(column: np.ndarray) -> float:
    """p-value of the unit-root test; low means stationary."""
    if np.allclose(column, column[0]):
        return 0.0  # a constant segment is trivially stationary
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InterpolationWarning)
            warnings.simplefilter("ignore", RuntimeWarning)
            return float(adfuller(column)[1])
    except Exception:
        return 1.0


def find_neighborhood_eta(
    series: np.ndarray,
    center: int,
    delta: int,
    p_threshold: float = 0.01,
    eta_max: int = 3,
) -> int:
    """Widest integer scale whose segment [center +- eta*delta/2] stays stationary.

    Grows eta from 1; stops as soon as the worst per-feature p-value exceeds
    the threshold or the segment cannot support the test. Never below 1.
    """
    series = np.asarray(series, dtype=float)
    t = len(series)
    best = 1
    for eta in range(1, eta_max + 1):
        half = eta * delta // 2
        lo, hi = max(0, center - half), min(t, center + half)
        segment = series[lo:hi]
        if len(segment) < MIN_ADF_LENGTH:
            break
        worst = max(_adf_pvalue(segment[:, j]) for j in range(segment.shape[1]))
        if worst > p_threshold:
            break
        best = eta
    return best


def draw_positive_centers(
    center: int,
    eta: int,
    delta: int,
    count: int,
    rng: np.random.Generator,
    sigma_floor: float = 1.0,
) -> np.ndarray:
    """Gaussian center draws around the anchor; std = eta*delta, floored."""
    sigma = max(sigma_floor, float(eta * delta))
    return rng.normal(float(center), sigma, size=count)


def sample_positives(
    series: np.ndarray,
    start: int,
    window: int,
    eta: int,
    count: int,
    rng: np.random.Generator,
    sigma_floor: float = 1.0,
) -> np.ndarray:
    """Windows centered at Gaussian draws around the anchor center, clipped in-range.

    Returns an array of shape (count, window, d).
    """
    series = np.asarray(series, dtype=float)
    t = len(series)
    center = start + window // 2
    centers = np.rint(draw_positive_centers(center, eta, window, count, rng, sigma_floor)).astype(int)
    starts = np.clip(centers - window // 2, 0, t - window)
    return np.stack([series[s : s + window] for s in starts])


class NeighborhoodSampler:
    """Per-anchor positive sampler with a cache of neighborhood scales."""

    def __init__(
        self,
        series: np.ndarray,
        window: int,
        p_threshold: float = 0.01,
        eta_max: int = 3,
        sigma_floor: float = 1.0,
    ):
        self.series = np.asarray(series, dtype=float)
        self.window = window
        self.p_threshold = p_threshold
        self.eta_max = eta_max
        self.sigma_floor = sigma_floor
        self._eta_cache: dict[int, int] = {}

    def eta(self, start: int) -> int:
        center = start + self.window // 2
        if center not in self._eta_cache:
            self._eta_cache[center] = find_neighborhood_eta(
                self.series, center, self.window, self.p_threshold, self.eta_max
            )
        return self._eta_cache[center]

    def positives(self, start: int, count: int, rng: np.random.Generator) -> np.ndarray:
        return sample_positives(
            self.series, start, self.window, self.eta(start), count, rng, self.sigma_floor
        )


class MaskGenerator(nn.Module):
    """Two affine layers mapping a flattened window to a same-shape mask in (0, 1)."""

    def __init__(self, window: int, features: int, slope: float = 0.2):
        super().__init__()
        flat = window * features
        hidden = max(1, flat // 2)
        self.window = window
        self.features = features
        self.slope = slope
        self.layer1 = nn.Linear(flat, hidden)
        self.layer2 = nn.Linear(hidden, flat)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        shape = x.shape
        flat = x.reshape(shape[0], -1)
        hidden = F.leaky_relu(self.layer1(flat), self.slope)
        return torch.sigmoid(self.layer2(hidden)).reshape(shape)


def build_generators(
    window: int, features: int, count: int, slope: float = 0.2, seed: int = 0
) -> nn.ModuleList:
    """Deterministically initialized mask generators (fan-in uniform, zero biases)."""
    torch.manual_seed(seed)
    generators = nn.ModuleList(MaskGenerator(window, features, slope) for _ in range(count))
    for g in generators:
        for layer in (g.layer1, g.layer2):
            bound = 1.0 / math.sqrt(layer.weight.shape[1])
            nn.init.uniform_(layer.weight, -bound, bound)
            nn.init.zeros_(layer.bias)
    return generators


def generate_masks(x: torch.Tensor, generators: nn.ModuleList) -> torch.Tensor:
    """Masks from every generator, stacked to (batch, n_generators, window, d)."""
    return torch.stack([g(x) for g in generators], dim=1)


def generate_negatives(x: torch.Tensor, generators: nn.ModuleList) -> torch.Tensor:
    """Elementwise-masked copies of the anchor, one per generator."""
    return generate_masks(x, generators) * x.unsqueeze(1)


def mask_min_distance(x: torch.Tensor, generators: nn.ModuleList) -> float:
    """Smallest pairwise Frobenius distance between the masks of a probe window.

    Tracked as a diagnostic: collapsed generators would drive this to zero.
    """
    with torch.no_grad():
        masks = generate_masks(x, generators)[0]  # (N, w, d)
    n = masks.shape[0]
    if n < 2:
        return float("inf")
    best = math.inf
    for i in range(n):
        for j in range(i + 1, n):
            best = min(best, torch.linalg.norm(masks[i] - masks[j]).item())
    return best
