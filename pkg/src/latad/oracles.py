"""Independent brute-force reference implementations used by the test suite.

Everything here trades speed for obviousness: plain loops, no vectorization,
no shared code with the main implementations.  Golden cases produced from
these oracles are checked into tests/golden and can be regenerated with
``python -m latad.oracles --write <dir>``.
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path
from typing import Callable, Sequence


# ---------------------------------------------------------------- preprocessing


def oracle_interpolate(column: Sequence[float]) -> list[float]:
    """Gap fill by scanning for the nearest valid neighbors of every gap."""
    n = len(column)
    out = list(column)
    valid = [i for i, v in enumerate(column) if math.isfinite(v)]
    if not valid:
        raise ValueError("no valid values")
    for i in range(n):
        if math.isfinite(column[i]):
            continue
        before = max((j for j in valid if j < i), default=None)
        after = min((j for j in valid if j > i), default=None)
        if before is None:
            out[i] = column[after]
        elif after is None:
            out[i] = column[before]
        else:
            frac = (i - before) / (after - before)
            out[i] = column[before] + frac * (column[after] - column[before])
    return out


def oracle_block_means(matrix: Sequence[Sequence[float]], k: int) -> list[list[float]]:
    rows = len(matrix)
    blocks = rows // k
    out = []
    for b in range(blocks):
        row = []
        for j in range(len(matrix[0])):
            total = 0.0
            for i in range(b * k, b * k + k):
                total += matrix[i][j]
            row.append(total / k)
        out.append(row)
    return out


def oracle_quartiles(column: Sequence[float]) -> tuple[float, float]:
    """Q1/Q3 by linear interpolation between sorted order statistics."""
    data = sorted(column)
    n = len(data)

    def at(q: float) -> float:
        pos = q * (n - 1)
        lo = int(math.floor(pos))
        hi = int(math.ceil(pos))
        if lo == hi:
            return data[lo]
        return data[lo] + (pos - lo) * (data[hi] - data[lo])

    return at(0.25), at(0.75)


def oracle_iqr_outliers(column: Sequence[float], multiplier: float = 1.5) -> list[bool]:
    q1, q3 = oracle_quartiles(column)
    iqr = q3 - q1
    lo, hi = q1 - multiplier * iqr, q3 + multiplier * iqr
    return [v < lo or v > hi for v in column]


# ------------------------------------------------------------------- extractor


def oracle_depthwise_conv(x, kernels, biases) -> list[list[float]]:
    """Sliding dot product per feature with zero padding, then ReLU."""
    w = len(x)
    d = len(x[0])
    ksize = len(kernels[0])
    half = ksize // 2
    out = [[0.0] * d for _ in range(w)]
    for j in range(d):
        for t in range(w):
            acc = biases[j]
            for tap in range(ksize):
                src = t + tap - half
                if 0 <= src < w:
                    acc += kernels[j][tap] * x[src][j]
            out[t][j] = max(0.0, acc)
    return out


def oracle_graph_attention(columns, attention_vector, slope: float):
    """Pairwise scores, row softmax, sigmoid mixing; columns are (d, w)."""
    d = len(columns)
    w = len(columns[0])

    def leaky(v: float) -> float:
        return v if v >= 0 else slope * v

    scores = [[0.0] * d for _ in range(d)]
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for t in range(w):
                acc += attention_vector[t] * columns[i][t]
                acc += attention_vector[w + t] * columns[j][t]
            scores[i][j] = leaky(acc)
    alpha = [[0.0] * d for _ in range(d)]
    for i in range(d):
        m = max(scores[i])
        exps = [math.exp(s - m) for s in scores[i]]
        total = sum(exps)
        for j in range(d):
            alpha[i][j] = exps[j] / total
    mixed = [[0.0] * w for _ in range(d)]
    for i in range(d):
        for t in range(w):
            acc = 0.0
            for j in range(d):
                acc += alpha[i][j] * columns[j][t]
            mixed[i][t] = 1.0 / (1.0 + math.exp(-acc))
    return alpha, mixed


def oracle_scaled_attention(q, k, v):
    """softmax(QK^T / sqrt(dk)) V for a single head, plain loops."""
    w = len(q)
    dk = len(q[0])
    scores = [[0.0] * w for _ in range(w)]
    for a in range(w):
        for b in range(w):
            acc = 0.0
            for c in range(dk):
                acc += q[a][c] * k[b][c]
            scores[a][b] = acc / math.sqrt(dk)
    out = [[0.0] * len(v[0]) for _ in range(w)]
    weights = [[0.0] * w for _ in range(w)]
    for a in range(w):
        m = max(scores[a])
        exps = [math.exp(s - m) for s in scores[a]]
        total = sum(exps)
        for b in range(w):
            weights[a][b] = exps[b] / total
        for c in range(len(v[0])):
            acc = 0.0
            for b in range(w):
                acc += weights[a][b] * v[b][c]
            out[a][c] = acc
    return weights, out


def oracle_mask(x_flat, w1, b1, w2, b2, slope: float) -> list[float]:
    """Two affine layers with LeakyReLU between and sigmoid after, plain loops."""
    hidden = []
    for r in range(len(w1)):
        acc = b1[r]
        for c in range(len(x_flat)):
            acc += w1[r][c] * x_flat[c]
        hidden.append(acc if acc >= 0 else slope * acc)
    out = []
    for r in range(len(w2)):
        acc = b2[r]
        for c in range(len(hidden)):
            acc += w2[r][c] * hidden[c]
        out.append(1.0 / (1.0 + math.exp(-acc)))
    return out


# ---------------------------------------------------------------------- losses


def _cosine_distance(u: Sequence[float], v: Sequence[float]) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return (1.0 - dot / (nu * nv)) / 2.0


def _softmax(v: Sequence[float]) -> list[float]:
    m = max(v)
    exps = [math.exp(x - m) for x in v]
    total = sum(exps)
    return [e / total for e in exps]


def oracle_losses(anchors, positives, negatives, margins, reg_weight):
    """Scalar-loop evaluation of the three objectives and their weighted sum.

    anchors: (B, D); positives/negatives: (B, N, D); margins: (N,).
    """
    b = len(anchors)
    n = len(margins)
    comp = sep = reg = 0.0
    for i in range(b):
        comp_i = sep_i = reg_i = 0.0
        for s in range(n):
            d_pos = _cosine_distance(anchors[i], positives[i][s])
            d_neg = _cosine_distance(anchors[i], negatives[i][s])
            comp_i += d_pos
            sep_i += max(0.0, d_pos - d_neg + margins[s])
            p = _softmax(positives[i][s])
            q = _softmax(negatives[i][s])
            reg_i += sum(pi * (math.log(pi) - math.log(qi)) for pi, qi in zip(p, q))
        comp += comp_i / n
        sep += sep_i / n
        reg += reg_i / n
    comp, sep, reg = comp / b, sep / b, reg / b
    return comp, sep, reg, comp + sep + reg_weight * reg


# ------------------------------------------------------------------ evaluation


def oracle_point_adjust(y: Sequence[int], y_hat: Sequence[int]) -> list[int]:
    """Per-segment double loop: any hit marks the whole segment."""
    out = list(y_hat)
    t = 0
    n = len(y)
    while t < n:
        if y[t] == 1:
            end = t
            while end + 1 < n and y[end + 1] == 1:
                end += 1
            hit = any(y_hat[j] == 1 for j in range(t, end + 1))
            if hit:
                for j in range(t, end + 1):
                    out[j] = 1
            t = end + 1
        else:
            t += 1
    return out


def oracle_pa_percent_k(y: Sequence[int], y_hat: Sequence[int], k: float) -> list[int]:
    out = list(y_hat)
    t = 0
    n = len(y)
    while t < n:
        if y[t] == 1:
            end = t
            while end + 1 < n and y[end + 1] == 1:
                end += 1
            hits = sum(1 for j in range(t, end + 1) if y_hat[j] == 1)
            if hits / (end - t + 1) > k / 100.0:
                for j in range(t, end + 1):
                    out[j] = 1
            t = end + 1
        else:
            t += 1
    return out


def oracle_prf1(y: Sequence[int], y_hat: Sequence[int]) -> tuple[float, float, float]:
    tp = fp = fn = 0
    for a, b in zip(y, y_hat):
        if a == 1 and b == 1:
            tp += 1
        elif a == 0 and b == 1:
            fp += 1
        elif a == 1 and b == 0:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def oracle_threshold_scan(
    scores: Sequence[float],
    labels: Sequence[int],
    floor: float,
    adjust: str = "none",
    pa_percent: float = 50.0,
) -> float:
    """Try every distinct score above the floor; best F1, ties to the larger value."""
    candidates = sorted(set(s for s in scores if s > floor))
    best_t = None
    best_f1 = -1.0
    for threshold in candidates:
        preds = [1 if s > threshold else 0 for s in scores]
        if adjust == "pa":
            preds = oracle_point_adjust(labels, preds)
        elif adjust == "pa_k":
            preds = oracle_pa_percent_k(labels, preds, pa_percent)
        f1 = oracle_prf1(labels, preds)[2]
        if f1 > best_f1 or (f1 == best_f1 and (best_t is None or threshold > best_t)):
            best_f1 = f1
            best_t = threshold
    return best_t


# --------------------------------------------------------------------- scoring


def oracle_spherical_kmeans_best(points, k: int, restarts: int, max_iter: int = 200):
    """Multi-restart Lloyd iterations under cosine similarity; keep the best objective."""
    import numpy as np

    x = np.asarray(points, dtype=float)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    best_centers = None
    best_obj = -math.inf
    for restart in range(restarts):
        rng = np.random.default_rng(restart)
        centers = x[rng.choice(len(x), size=k, replace=False)].copy()
        for _ in range(max_iter):
            sims = x @ centers.T
            assign = sims.argmax(axis=1)
            new_centers = centers.copy()
            for j in range(k):
                members = x[assign == j]
                if len(members):
                    mean = members.sum(axis=0)
                    norm = np.linalg.norm(mean)
                    if norm > 0:
                        new_centers[j] = mean / norm
            if np.allclose(new_centers, centers):
                break
            centers = new_centers
        obj = float((x @ centers.T).max(axis=1).sum())
        if obj > best_obj:
            best_obj = obj
            best_centers = centers
    return best_centers, best_obj


# -------------------------------------------------------------------- gradients


def finite_difference_grad(
    fn: Callable[[Sequence[float]], float],
    x: Sequence[float],
    step: float = 1e-4,
    coords: Sequence[int] | None = None,
) -> dict[int, float]:
    """Central differences of a scalar function at selected coordinates."""
    base = list(x)
    out: dict[int, float] = {}
    for i in coords if coords is not None else range(len(base)):
        plus = list(base)
        minus = list(base)
        plus[i] += step
        minus[i] -= step
        f_plus = fn(plus)
        f_minus = fn(minus)
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise ValueError("non-finite function value during finite differencing")
        out[i] = (f_plus - f_minus) / (2 * step)
    return out


# ----------------------------------------------------------------- golden cases


def build_golden_cases() -> dict[str, list[dict]]:
    """Frozen oracle outputs for a few fixed inputs (loaded by the test suite)."""
    import numpy as np

    rng = np.random.default_rng(20240817)
    loss_cases = []
    for case in range(3):
        b, n, dim = 2, 3, 4
        anchors = rng.normal(size=(b, dim)).round(6).tolist()
        positives = rng.normal(size=(b, n, dim)).round(6).tolist()
        negatives = rng.normal(size=(b, n, dim)).round(6).tolist()
        margins = rng.uniform(0.5, 0.999, size=n).round(6).tolist()
        comp, sep, reg, total = oracle_losses(anchors, positives, negatives, margins, 0.1)
        loss_cases.append(
            {
                "operation": "total_loss",
                "input": {
                    "anchors": anchors,
                    "positives": positives,
                    "negatives": negatives,
                    "margins": margins,
                    "reg_weight": 0.1,
                },
                "expected": {"comp": comp, "sep": sep, "reg": reg, "total": total},
                "tolerance": 1e-6,
                "provenance": "scalar-loop oracle",
            }
        )
    adjust_cases = []
    for case in range(5):
        length = int(rng.integers(5, 20))
        y = rng.integers(0, 2, size=length).tolist()
        y_hat = rng.integers(0, 2, size=length).tolist()
        adjust_cases.append(
            {
                "operation": "point_adjust",
                "input": {"y": y, "y_hat": y_hat},
                "expected": {
                    "pa": oracle_point_adjust(y, y_hat),
                    "pa50": oracle_pa_percent_k(y, y_hat, 50.0),
                },
                "tolerance": 0,
                "provenance": "per-segment loop oracle",
            }
        )
    return {"losses": loss_cases, "point_adjust": adjust_cases}


def write_golden_cases(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, cases in build_golden_cases().items():
        path = directory / f"{name}_cases.json"
        path.write_text(json.dumps(cases, indent=2))
        written.append(path)
    return written


def main() -> None:
    parser = argparse.ArgumentParser(description="regenerate golden oracle cases")
    parser.add_argument("--write", metavar="DIR", required=True)
    args = parser.parse_args()
    for path in write_golden_cases(args.write):
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
