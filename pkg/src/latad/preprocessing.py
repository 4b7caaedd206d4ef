"""Preprocessing chain for raw multivariate series.

Order of operations: gap filling, block-mean downsampling, per-feature
min-max scaling against training statistics, IQR-fence outlier removal
(training split only), sliding-window segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass
class NormalizationStats:
    """Per-feature min/max taken from the training split only."""

    train_min: np.ndarray
    train_max: np.ndarray

    def __post_init__(self) -> None:
        self.train_min = np.asarray(self.train_min, dtype=float)
        self.train_max = np.asarray(self.train_max, dtype=float)
        if self.train_min.shape != self.train_max.shape:
            raise ValueError("min/max shape mismatch")
        if np.any(self.train_max < self.train_min):
            raise ValueError("train_max must be >= train_min per feature")


@dataclass
class Window:
    """Fixed-length segment of a series; the unit of model input and scoring."""

    data: np.ndarray  # (w, d)
    start_index: int
    label: Optional[np.ndarray] = None


@dataclass
class TimeSeriesDataset:
    values: np.ndarray  # (T, d)
    timestamps: np.ndarray  # (T,)
    labels: Optional[np.ndarray] = None
    role: str = "train"
    feature_names: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be a (T, d) matrix")
        self.timestamps = np.asarray(self.timestamps)
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps length must match values")
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps.astype(float)) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.labels is not None:
            self.labels = np.asarray(self.labels).astype(np.int64)
            if len(self.labels) != len(self.values):
                raise ValueError("labels length must match values")
            if not np.isin(self.labels, (0, 1)).all():
                raise ValueError("labels must be binary")
        if not self.feature_names:
            self.feature_names = [f"f{i}" for i in range(self.values.shape[1])]


def _interp_column(col: np.ndarray) -> np.ndarray:
    """Linear interpolation over invalid entries; ends extend the nearest valid value."""
    valid = np.isfinite(col)
    if valid.all():
        return col
    if not valid.any():
        raise ValueError("column has no valid values")
    idx = np.arange(len(col))
    out = col.copy()
    out[~valid] = np.interp(idx[~valid], idx[valid], col[valid])
    return out


def fill_missing(raw: np.ndarray, feature_names: Sequence[str] | None = None) -> np.ndarray:
    """Replace non-finite entries by linear interpolation between valid neighbors.

    Raises ValueError naming the column when a column has no valid value at all.
    """
    raw = np.asarray(raw, dtype=float)
    out = raw.copy()
    for j in range(raw.shape[1]):
        try:
            out[:, j] = _interp_column(raw[:, j])
        except ValueError:
            name = feature_names[j] if feature_names else f"column {j}"
            raise ValueError(f"cannot fill feature {name!r}: no valid values") from None
    return out


def downsample(series: np.ndarray, k: int) -> np.ndarray:
    """Average consecutive blocks of k rows; a trailing partial block is dropped."""
    if k < 1:
        raise ValueError("downsample factor k must be >= 1")
    series = np.asarray(series, dtype=float)
    if k == 1:
        return series.copy()
    m = len(series) // k
    return series[: m * k].reshape(m, k, series.shape[1]).mean(axis=1)


def downsample_labels(labels: np.ndarray, k: int) -> np.ndarray:
    """A downsampled step is anomalous when any raw step in its block is."""
    if k < 1:
        raise ValueError("downsample factor k must be >= 1")
    labels = np.asarray(labels).astype(np.int64)
    if k == 1:
        return labels.copy()
    m = len(labels) // k
    return labels[: m * k].reshape(m, k).max(axis=1)


def fit_normalization(train: np.ndarray) -> NormalizationStats:
    train = np.asarray(train, dtype=float)
    return NormalizationStats(train.min(axis=0), train.max(axis=0))


def minmax_normalize(series: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Scale each feature by the training min/max; constant features map to 0."""
    series = np.asarray(series, dtype=float)
    span = stats.train_max - stats.train_min
    out = np.zeros_like(series)
    live = span > 0
    out[:, live] = (series[:, live] - stats.train_min[live]) / span[live]
    return out


def iqr_filter(series: np.ndarray, multiplier: float = 1.5) -> np.ndarray:
    """Remove points outside the quartile fences and re-interpolate them.

    Fences are [Q1 - m*IQR, Q3 + m*IQR] per feature, quartiles by linear
    interpolation of order statistics.
    """
    series = np.asarray(series, dtype=float)
    if len(series) < 4:
        raise ValueError("iqr_filter needs at least 4 rows per column")
    out = series.copy()
    for j in range(series.shape[1]):
        col = series[:, j]
        q1, q3 = np.quantile(col, [0.25, 0.75])
        iqr = q3 - q1
        bad = (col < q1 - multiplier * iqr) | (col > q3 + multiplier * iqr)
        if not bad.any():
            continue
        masked = col.copy()
        masked[bad] = np.nan
        out[:, j] = _interp_column(masked)
    return out


def make_windows(
    series: np.ndarray,
    window: int,
    stride: int,
    labels: Optional[np.ndarray] = None,
) -> list[Window]:
    """Sliding windows at starts 0, stride, 2*stride, ...; count floor((T-w)/stride)+1."""
    series = np.asarray(series, dtype=float)
    t = len(series)
    if window < 1 or window > t:
        raise ValueError(f"window length {window} invalid for series of length {t}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out = []
    for start in range(0, t - window + 1, stride):
        lab = labels[start : start + window] if labels is not None else None
        out.append(Window(series[start : start + window], start, lab))
    return out


def window_starts(length: int, window: int, stride: int) -> np.ndarray:
    if window < 1 or window > length:
        raise ValueError(f"window length {window} invalid for series of length {length}")
    return np.arange(0, length - window + 1, stride)


def preprocess_train(
    raw: np.ndarray,
    k: int,
    iqr_multiplier: float = 1.5,
    feature_names: Sequence[str] | None = None,
) -> tuple[np.ndarray, NormalizationStats]:
    """Full training-split chain; returns the cleaned series and the fitted stats."""
    filled = fill_missing(raw, feature_names)
    down = downsample(filled, k)
    stats = fit_normalization(down)
    norm = minmax_normalize(down, stats)
    return iqr_filter(norm, iqr_multiplier), stats


def preprocess_eval(
    raw: np.ndarray,
    k: int,
    stats: NormalizationStats,
    labels: Optional[np.ndarray] = None,
    feature_names: Sequence[str] | None = None,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Validation/test chain: no outlier removal, training stats reused."""
    filled = fill_missing(raw, feature_names)
    down = downsample(filled, k)
    norm = minmax_normalize(down, stats)
    down_labels = downsample_labels(labels, k) if labels is not None else None
    return norm, down_labels
