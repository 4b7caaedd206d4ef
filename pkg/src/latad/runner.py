"""Command orchestration: each run command reads/writes one run directory.

Artifacts per command:
  preprocess -> preprocessed.npz, config.yaml
  train      -> checkpoint.pt, history.csv, diagnostics.json
  score      -> reference.npz, scores.csv, scores_val.csv
  evaluate   -> report.json, report_table.txt, score_trace.png, correlation_heatmap.png
  diagnose   -> root_causes.json, feature_trends.png

manifest.json is updated atomically after each successful command and never
on failure.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
import warnings
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .augmentation import build_generators
from .checkpoint import load_checkpoint, rebuild, save_checkpoint
from .config import ExperimentConfig
from .datasets import dataset_to_csv, load_dataset_pair
from .evaluation import evaluate_all, format_report_table
from .features import build_extractor
from .plots import correlation_heatmap, feature_trends, score_trace
from .preprocessing import NormalizationStats, preprocess_eval, preprocess_train
from .scoring import (
    ReferenceModel,
    extract_features,
    fit_reference,
    predict_labels,
    quantile_threshold,
    score_series,
    search_threshold,
)
from .synthetic import synth_generate
from .training import fit


class RunnerError(RuntimeError):
    pass


# ------------------------------------------------------------------- manifest


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def load_manifest(run_dir: Path) -> dict[str, Any]:
    path = run_dir / "manifest.json"
    if path.exists():
        return json.loads(path.read_text())
    return {"toolkit_version": __version__, "artifacts": {}, "timings": {}, "states": {}}


def update_manifest(
    run_dir: Path,
    config: ExperimentConfig,
    command: str,
    elapsed: float,
    artifacts: dict[str, str],
    state: Optional[dict[str, Any]] = None,
) -> dict[str, Any]:
    manifest = load_manifest(run_dir)
    manifest["toolkit_version"] = __version__
    manifest["config_hash"] = config.config_hash()
    manifest["artifacts"].update(artifacts)
    manifest["timings"][command] = elapsed
    if state is not None:
        manifest["states"][command] = state
    _atomic_write(run_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def manifest_content_hash(manifest: dict[str, Any]) -> str:
    """Digest of the manifest with volatile timing data removed."""
    trimmed = {k: v for k, v in manifest.items() if k != "timings"}
    return hashlib.sha256(json.dumps(trimmed, sort_keys=True).encode()).hexdigest()


def _prepare_run_dir(config: ExperimentConfig, run_dir: Optional[str]) -> Path:
    out = Path(run_dir) if run_dir else Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.yaml")
    return out


# ------------------------------------------------------------------- commands


def run_synth(config: ExperimentConfig, run_dir: Optional[str] = None) -> dict[str, Any]:
    """Generate the configured synthetic pair and export it as CSV."""
    started = time.perf_counter()
    out = _prepare_run_dir(config, run_dir)
    train, test = synth_generate(config.dataset.synthetic, seed=config.seed)
    data_dir = out / "data"
    data_dir.mkdir(exist_ok=True)
    dataset_to_csv(train, data_dir / "train.csv")
    dataset_to_csv(test, data_dir / "test.csv")
    artifacts = {"train_csv": "data/train.csv", "test_csv": "data/test.csv"}
    update_manifest(out, config, "synth", time.perf_counter() - started, artifacts)
    return {
        "run_dir": str(out),
        "train_rows": len(train.values),
        "test_rows": len(test.values),
        "anomaly_points": int(test.labels.sum()) if test.labels is not None else 0,
        "artifacts": artifacts,
    }


def _load_pair(config: ExperimentConfig):
    ds = config.dataset
    if ds.source == "synthetic":
        return synth_generate(ds.synthetic, seed=config.seed)
    return load_dataset_pair(ds.source, ds.path, ds.machine)


def run_preprocess(config: ExperimentConfig, run_dir: Optional[str] = None) -> dict[str, Any]:
    """Load the configured dataset and apply the full preprocessing chain."""
    started = time.perf_counter()
    out = _prepare_run_dir(config, run_dir)
    pre = config.preprocessing
    train_ds, test_ds = _load_pair(config)

    train_values, stats = preprocess_train(
        train_ds.values, pre.downsample, pre.iqr_multiplier, train_ds.feature_names
    )
    test_values, test_labels = preprocess_eval(
        test_ds.values, pre.downsample, stats, test_ds.labels, test_ds.feature_names
    )
    test_timestamps = test_ds.timestamps[:: pre.downsample][: len(test_values)]

    total = len(train_values)
    if total < 2 * pre.window:
        raise RunnerError(
            f"preprocessed training series of length {total} too short for window {pre.window}"
        )
    val_len = max(pre.window, int(round(pre.val_fraction * total)))
    val_start = total - val_len

    path = out / "preprocessed.npz"
    np.savez(
        path,
        train_values=train_values,
        val_start=val_start,
        test_values=test_values,
        test_labels=test_labels if test_labels is not None else np.zeros(0, dtype=np.int64),
        has_labels=test_labels is not None,
        test_timestamps=np.asarray(test_timestamps, dtype=float),
        train_min=stats.train_min,
        train_max=stats.train_max,
        feature_names=np.array(train_ds.feature_names),
    )
    artifacts = {"preprocessed": "preprocessed.npz"}
    update_manifest(out, config, "preprocess", time.perf_counter() - started, artifacts)
    return {
        "run_dir": str(out),
        "train_len": int(val_start),
        "val_len": int(val_len),
        "test_len": int(len(test_values)),
        "features": int(train_values.shape[1]),
        "artifacts": artifacts,
    }


def _load_preprocessed(run_dir: Path) -> dict[str, Any]:
    path = run_dir / "preprocessed.npz"
    if not path.exists():
        raise FileNotFoundError(f"no preprocessed artifact at {path}; run preprocess first")
    data = np.load(path, allow_pickle=False)
    return {
        "train_values": data["train_values"],
        "val_start": int(data["val_start"]),
        "test_values": data["test_values"],
        "test_labels": data["test_labels"] if bool(data["has_labels"]) else None,
        "test_timestamps": data["test_timestamps"],
        "stats": NormalizationStats(data["train_min"], data["train_max"]),
        "feature_names": [str(n) for n in data["feature_names"]],
    }


def run_train(config: ExperimentConfig, run_dir: Optional[str] = None) -> dict[str, Any]:
    """Fit the extractor and generators on the preprocessed training split."""
    started = time.perf_counter()
    out = _prepare_run_dir(config, run_dir)
    pre = config.preprocessing
    art = _load_preprocessed(out)
    train_part = art["train_values"][: art["val_start"]]
    features = train_part.shape[1]

    tr = config.training
    extractor = build_extractor(
        features,
        pre.window,
        config.extractor,
        seed=config.resolved_seed("extractor"),
        use_gat=tr.use_gat,
        use_transformer=tr.use_transformer,
        use_tcn=tr.use_tcn,
    )
    generators = build_generators(
        pre.window,
        features,
        config.augmentation.num_samples,
        config.extractor.leaky_slope,
        seed=config.resolved_seed("extractor") + 1,
    )
    result = fit(
        train_part,
        extractor,
        generators,
        tr,
        config.augmentation,
        pre.window,
        pre.train_stride,
        seed=config.resolved_seed("training"),
    )

    history_path = out / "history.csv"
    with history_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "L_comp", "L_sep", "L_reg", "total"])
        for row in result.history:
            writer.writerow(
                [row.epoch] + [f"{v:.12g}" for v in (row.comp, row.sep, row.reg, row.total)]
            )
    (out / "diagnostics.json").write_text(
        json.dumps(
            {
                "mask_min_distance": [row.mask_min_distance for row in result.history],
                "abort_reason": result.abort_reason,
            },
            indent=2,
        )
    )
    save_checkpoint(
        out / "checkpoint.pt",
        extractor,
        generators,
        config.extractor,
        features,
        pre.window,
        result.margins,
        config.config_hash(),
        extra={"epochs_run": result.epochs_run, "aborted": result.aborted},
    )
    artifacts = {
        "checkpoint": "checkpoint.pt",
        "history": "history.csv",
        "diagnostics": "diagnostics.json",
    }
    state = {"aborted": result.aborted, "epochs_run": result.epochs_run}
    update_manifest(out, config, "train", time.perf_counter() - started, artifacts, state)
    final = result.history[-1] if result.history else None
    return {
        "run_dir": str(out),
        "epochs_run": result.epochs_run,
        "aborted": result.aborted,
        "final_total_loss": final.total if final else None,
        "artifacts": artifacts,
    }


def run_score(config: ExperimentConfig, run_dir: Optional[str] = None) -> dict[str, Any]:
    """Fit the clustering reference and score the test split point by point."""
    started = time.perf_counter()
    out = _prepare_run_dir(config, run_dir)
    pre = config.preprocessing
    art = _load_preprocessed(out)
    extractor, _ = rebuild(load_checkpoint(out / "checkpoint.pt"))

    sc = config.scoring
    train_part = art["train_values"][: art["val_start"]]
    val_part = art["train_values"][art["val_start"] :]
    train_feats = extract_features(train_part, pre.window, extractor, stride=pre.score_stride)
    ref = fit_reference(
        train_feats, sc.clusters, sc.coreset_fraction, seed=config.resolved_seed("scoring"),
        max_iter=sc.kmeans_max_iter,
    )
    ref.save(out / "reference.npz")

    val_scored = score_series(val_part, pre.window, extractor, ref, sc.divide_by_norm)
    test_scored = score_series(art["test_values"], pre.window, extractor, ref, sc.divide_by_norm)

    labels = art["test_labels"]
    policy = sc.threshold_policy
    if policy == "best_f1" and labels is None:
        warnings.warn("best_f1 threshold policy needs labels; falling back to quantile")
        policy = "quantile"
    if policy == "best_f1":
        threshold = search_threshold(test_scored.scores, labels, val_scored.scores)
    else:
        threshold = quantile_threshold(val_scored.scores, sc.quantile)
    predictions = predict_labels(test_scored.scores, threshold)

    scores_path = out / "scores.csv"
    with scores_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["timestamp", "score", "prediction"] + (["label"] if labels is not None else [])
        writer.writerow(header)
        for i, (ts, s, p) in enumerate(zip(art["test_timestamps"], test_scored.scores, predictions)):
            row = [f"{ts:.12g}", f"{s:.12g}", int(p)]
            if labels is not None:
                row.append(int(labels[i]))
            writer.writerow(row)
    with (out / "scores_val.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "score"])
        for i, s in enumerate(val_scored.scores):
            writer.writerow([i, f"{s:.12g}"])

    artifacts = {"scores": "scores.csv", "val_scores": "scores_val.csv", "reference": "reference.npz"}
    state = {"threshold": threshold, "policy": policy}
    update_manifest(out, config, "score", time.perf_counter() - started, artifacts, state)
    return {
        "run_dir": str(out),
        "threshold": threshold,
        "policy": policy,
        "alerts": int(predictions.sum()),
        "artifacts": artifacts,
    }


def _load_scores(run_dir: Path) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray], np.ndarray]:
    path = run_dir / "scores.csv"
    if not path.exists():
        raise FileNotFoundError(f"no scores at {path}; run score first")
    timestamps, scores, labels = [], [], []
    with path.open() as fh:
        reader = csv.DictReader(fh)
        has_labels = "label" in (reader.fieldnames or [])
        for row in reader:
            timestamps.append(float(row["timestamp"]))
            scores.append(float(row["score"]))
            if has_labels:
                labels.append(int(row["label"]))
    val_path = run_dir / "scores_val.csv"
    val_scores = []
    with val_path.open() as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            val_scores.append(float(row["score"]))
    return (
        np.asarray(timestamps),
        np.asarray(scores),
        np.asarray(labels, dtype=np.int64) if labels else None,
        np.asarray(val_scores),
    )


def report_schema() -> dict[str, Any]:
    return json.loads(resources.files("latad.schemas").joinpath("eval_report.schema.json").read_text())


def run_evaluate(config: ExperimentConfig, run_dir: Optional[str] = None) -> dict[str, Any]:
    """Best-threshold metrics for every variant, plus the standard plots."""
    started = time.perf_counter()
    out = _prepare_run_dir(config, run_dir)
    if not (out / "scores.csv").exists():
        run_score(config, run_dir=str(out))
    timestamps, scores, labels, val_scores = _load_scores(out)
    art = _load_preprocessed(out)

    artifacts: dict[str, str] = {}
    state: dict[str, Any] = {}
    report_payload = None
    if labels is None:
        state["metrics_skipped"] = "no ground-truth labels in the test split"
        score_trace(out / "score_trace.png", timestamps, scores)
        artifacts["score_trace"] = "score_trace.png"
    else:
        report = evaluate_all(scores, labels, val_scores, config.evaluation.pa_percentages)
        report_payload = report.to_dict()
        report_payload["metadata"]["config_hash"] = config.config_hash()
        import jsonschema

        jsonschema.validate(report_payload, report_schema())
        (out / "report.json").write_text(json.dumps(report_payload, indent=2, sort_keys=True))
        (out / "report_table.txt").write_text(
            format_report_table(report, config.dataset.source) + "\n"
        )
        score_trace(
            out / "score_trace.png",
            timestamps,
            scores,
            threshold=report.variants["f1"].threshold,
            labels=labels,
        )
        artifacts.update(
            {
                "report": "report.json",
                "report_table": "report_table.txt",
                "score_trace": "score_trace.png",
            }
        )
    correlation_heatmap(out / "correlation_heatmap.png", art["test_values"], art["feature_names"])
    artifacts["correlation_heatmap"] = "correlation_heatmap.png"
    update_manifest(out, config, "evaluate", time.perf_counter() - started, artifacts, state)
    return {"run_dir": str(out), "report": report_payload, "state": state, "artifacts": artifacts}


def run_diagnose(
    config: ExperimentConfig,
    run_dir: Optional[str] = None,
    window: str | int = "highest-score",
) -> dict[str, Any]:
    """Root-cause attribution for one test window (by timestamp or highest score)."""
    from .diagnosis import diagnose_window

    started = time.perf_counter()
    out = _prepare_run_dir(config, run_dir)
    if not (out / "scores.csv").exists():
        run_score(config, run_dir=str(out))
    timestamps, scores, _, _ = _load_scores(out)
    art = _load_preprocessed(out)
    extractor, _ = rebuild(load_checkpoint(out / "checkpoint.pt"))
    ref = ReferenceModel.load(out / "reference.npz")
    w = config.preprocessing.window

    if window == "highest-score":
        end = int(np.argmax(scores[w - 1 :])) + w - 1
    else:
        matches = np.flatnonzero(timestamps == float(window))
        if len(matches) == 0:
            raise RunnerError(f"no test timestamp equals {window!r}")
        end = int(matches[0])
        if end < w - 1:
            raise RunnerError(f"timestamp {window!r} precedes the first full window")
    start = end - w + 1
    values = art["test_values"][start : start + w]

    report, _ = diagnose_window(
        values,
        start,
        extractor,
        ref,
        top_k=config.diagnosis.top_k,
        divide_by_norm=config.scoring.divide_by_norm,
        feature_names=art["feature_names"],
    )
    payload = report.to_dict()
    payload["window_end_timestamp"] = float(timestamps[end])
    payload["window_score"] = float(scores[end])
    (out / "root_causes.json").write_text(json.dumps(payload, indent=2))
    feature_trends(
        out / "feature_trends.png",
        values,
        [i for i, _ in report.ranking],
        art["feature_names"],
        start_timestamp=int(timestamps[start]),
    )
    artifacts = {"root_causes": "root_causes.json", "feature_trends": "feature_trends.png"}
    update_manifest(out, config, "diagnose", time.perf_counter() - started, artifacts)
    return {"run_dir": str(out), "report": payload, "artifacts": artifacts}
