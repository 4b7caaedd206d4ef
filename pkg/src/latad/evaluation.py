"""Point-wise and point-adjusted detection metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class AnomalySegment:
    start: int
    end: int  # inclusive

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError("segment start after end")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass
class MetricResult:
    variant: str
    threshold: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


@dataclass
class EvalReport:
    variants: dict[str, MetricResult]
    anomaly_ratio: float
    degenerate: bool
    threshold_policy: str
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "variants": {name: m.to_dict() for name, m in self.variants.items()},
            "anomaly_ratio": self.anomaly_ratio,
            "degenerate": self.degenerate,
            "threshold_policy": self.threshold_policy,
            "metadata": self.metadata,
        }


def segments_from_labels(y: np.ndarray) -> list[AnomalySegment]:
    """Maximal runs of 1s as inclusive [start, end] segments."""
    y = np.asarray(y).astype(np.int64)
    if y.ndim != 1:
        raise ValueError("labels must be a vector")
    padded = np.concatenate(([0], y, [0]))
    diff = np.diff(padded)
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1) - 1
    return [AnomalySegment(int(s), int(e)) for s, e in zip(starts, ends)]


def expand_segments(segments: list[AnomalySegment], length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.int64)
    for seg in segments:
        out[seg.start : seg.end + 1] = 1
    return out


def prf1(y: np.ndarray, y_hat: np.ndarray) -> tuple[float, float, float]:
    """Precision, recall, F1 with zero denominators mapping to 0."""
    y = np.asarray(y).astype(bool)
    y_hat = np.asarray(y_hat).astype(bool)
    if y.shape != y_hat.shape:
        raise ValueError("label/prediction length mismatch")
    tp = int(np.sum(y & y_hat))
    fp = int(np.sum(~y & y_hat))
    fn = int(np.sum(y & ~y_hat))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def confusion(y: np.ndarray, y_hat: np.ndarray) -> tuple[int, int, int]:
    y = np.asarray(y).astype(bool)
    y_hat = np.asarray(y_hat).astype(bool)
    return (
        int(np.sum(y & y_hat)),
        int(np.sum(~y & y_hat)),
        int(np.sum(y & ~y_hat)),
    )


def point_adjust(y_hat: np.ndarray, segments: list[AnomalySegment]) -> np.ndarray:
    """Mark a whole true segment detected when any of its timestamps is flagged."""
    out = np.asarray(y_hat).astype(np.int64).copy()
    for seg in segments:
        if out[seg.start : seg.end + 1].any():
            out[seg.start : seg.end + 1] = 1
    return out


def pa_percent_k(y_hat: np.ndarray, segments: list[AnomalySegment], k: float) -> np.ndarray:
    """Point adjustment restricted to segments whose hit ratio strictly exceeds k percent."""
    if not 0 <= k <= 100:
        raise ValueError("k must be a percentage in [0, 100]")
    out = np.asarray(y_hat).astype(np.int64).copy()
    for seg in segments:
        hits = int(out[seg.start : seg.end + 1].sum())
        if hits and hits / seg.length > k / 100.0:
            out[seg.start : seg.end + 1] = 1
    return out


def evaluate_all(
    scores: np.ndarray,
    labels: np.ndarray,
    val_scores: Optional[np.ndarray] = None,
    pa_percentages: Optional[list[float]] = None,
) -> EvalReport:
    """Best-threshold F1 for the raw, PA, and PA%k variants.

    Each variant gets its own exhaustive threshold search.  The search is
    label-aware (an oracle protocol), which the report states explicitly.
    """
    from .scoring import predict_labels, search_threshold  # local: avoids import cycle

    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores/labels length mismatch")
    pa_percentages = [50.0] if pa_percentages is None else list(pa_percentages)
    segments = segments_from_labels(labels)
    degenerate = len(segments) == 0

    def build(variant: str, adjust: str, pa_percent: float = 50.0) -> MetricResult:
        threshold = search_threshold(scores, labels, val_scores, adjust=adjust, pa_percent=pa_percent)
        preds = predict_labels(scores, threshold)
        if adjust == "pa":
            preds = point_adjust(preds, segments)
        elif adjust == "pa_k":
            preds = pa_percent_k(preds, segments, pa_percent)
        precision, recall, f1 = prf1(labels, preds)
        tp, fp, fn = confusion(labels, preds)
        return MetricResult(variant, threshold, precision, recall, f1, tp, fp, fn)

    variants = {"f1": build("f1", "none")}
    for k in pa_percentages:
        name = f"f1_pa{k:g}"
        variants[name] = build(name, "pa_k", k)
    variants["f1_pa"] = build("f1_pa", "pa")

    return EvalReport(
        variants=variants,
        anomaly_ratio=float(labels.mean()) if len(labels) else 0.0,
        degenerate=degenerate,
        threshold_policy="label-aware best-F1 search (oracle protocol; per-variant threshold)",
        metadata={"segments": len(segments), "length": int(len(labels))},
    )


def format_report_table(report: EvalReport, name: str = "dataset") -> str:
    """Fixed-width text row per variant, benchmark-table style."""
    lines = [f"{'variant':<12} {'thresh':>10} {'prec':>7} {'recall':>7} {'f1':>7}"]
    for variant, m in report.variants.items():
        lines.append(
            f"{variant:<12} {m.threshold:>10.6f} {m.precision:>7.4f} {m.recall:>7.4f} {m.f1:>7.4f}"
        )
    header = f"results for {name} (anomaly ratio {report.anomaly_ratio:.4f})"
    if report.degenerate:
        header += " [degenerate: no anomaly segments]"
    return header + "\n" + "\n".join(lines)
