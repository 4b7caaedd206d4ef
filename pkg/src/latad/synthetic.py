"""Seeded synthetic multivariate series with planted anomalies.

The base process mixes per-feature sinusoids through a random matrix and adds
small Gaussian noise.  Anomalies are injected only into the test split:
point spikes, contextual level shifts, and collective foreign patterns.
Labels are exactly the union of the planned intervals.
"""

from __future__ import annotations

import numpy as np

from .config import AnomalySpec, SyntheticConfig
from .preprocessing import TimeSeriesDataset


def _base_series(cfg: SyntheticConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = cfg.features
    total = cfg.train_len + cfg.test_len
    periods = np.asarray(
        cfg.periods if cfg.periods is not None else np.linspace(60, 180, d), dtype=float
    )
    amplitudes = np.asarray(
        cfg.amplitudes if cfg.amplitudes is not None else np.full(d, 1.0), dtype=float
    )
    if len(periods) != d or len(amplitudes) != d:
        raise ValueError("periods/amplitudes must have one entry per feature")
    phases = rng.uniform(0, 2 * np.pi, size=d)
    t = np.arange(total, dtype=float)[:, None]
    signals = amplitudes * np.sin(2 * np.pi * t / periods + phases)
    mixing = np.eye(d) + cfg.mixing_strength * rng.uniform(0, 1, size=(d, d)) / d
    mixed = signals @ mixing.T
    noisy = mixed + rng.normal(0, cfg.noise_std, size=mixed.shape)
    return noisy, amplitudes, periods


def _check_plan(plan: list[AnomalySpec], test_len: int, features: int) -> None:
    intervals = sorted((a.start, a.start + a.length) for a in plan)
    for (s1, e1), (s2, _) in zip(intervals, intervals[1:]):
        if s2 < e1:
            raise ValueError(f"anomaly intervals overlap: [{s1},{e1}) and starting {s2}")
    for a in plan:
        if a.start < 0 or a.start + a.length > test_len:
            raise ValueError(
                f"anomaly [{a.start}, {a.start + a.length}) outside test split of length {test_len}"
            )
        if a.feature is not None and not 0 <= a.feature < features:
            raise ValueError(f"anomaly feature {a.feature} out of range")


def _inject(
    test: np.ndarray,
    plan: list[AnomalySpec],
    amplitudes: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    labels = np.zeros(len(test), dtype=np.int64)
    for a in plan:
        sl = slice(a.start, a.start + a.length)
        cols = [a.feature] if a.feature is not None else list(range(test.shape[1]))
        for j in cols:
            amp = amplitudes[j]
            if a.kind == "point":
                # isolated drop-out spike (sensor glitch toward zero signal)
                test[sl, j] -= a.magnitude * amp
            elif a.kind == "contextual":
                # level shift: plausible magnitude, wrong for its surroundings
                test[sl, j] -= a.magnitude * amp * 0.8
            else:  # collective: replace with a foreign pattern (noise burst)
                test[sl, j] = rng.normal(0.0, a.magnitude * amp, size=a.length)
        labels[sl] = 1
    return labels


def synth_generate(cfg: SyntheticConfig, seed: int = 0) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Deterministic (train, test) pair; anomalies and labels only in test."""
    rng = np.random.default_rng(cfg.seed if cfg.seed is not None else seed)
    _check_plan(cfg.anomalies, cfg.test_len, cfg.features)
    values, amplitudes, _ = _base_series(cfg, rng)
    train = values[: cfg.train_len].copy()
    test = values[cfg.train_len :].copy()
    labels = _inject(test, cfg.anomalies, amplitudes, rng)
    names = [f"f{i}" for i in range(cfg.features)]
    train_ds = TimeSeriesDataset(
        values=train,
        timestamps=np.arange(cfg.train_len),
        labels=None,
        role="train",
        feature_names=names,
    )
    test_ds = TimeSeriesDataset(
        values=test,
        timestamps=np.arange(cfg.train_len, cfg.train_len + cfg.test_len),
        labels=labels,
        role="test",
        feature_names=names,
    )
    return train_ds, test_ds
