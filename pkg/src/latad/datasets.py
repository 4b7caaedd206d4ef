"""Benchmark dataset loaders and the shared CSV/NPZ exchange formats.

Loaders normalize five published layouts into TimeSeriesDataset pairs and
validate the result against known statistics, warning (never failing) on
mismatch.  Real benchmark files are not bundled; the loaders are exercised
against miniature format-identical fixtures.
"""

from __future__ import annotations

import ast
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .preprocessing import TimeSeriesDataset


class DatasetStatsWarning(UserWarning):
    """Loaded statistics disagree with the catalog entry for the benchmark."""


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    expected_train_len: int
    expected_test_len: int
    expected_anomaly_ratio: float  # percent
    expected_feature_count: int


DESCRIPTORS = {
    "swat": DatasetDescriptor("swat", 495_000, 449_919, 12.33, 51),
    "wadi": DatasetDescriptor("wadi", 784_537, 172_801, 5.77, 123),
    "msl": DatasetDescriptor("msl", 58_317, 73_729, 10.5, 55),
    "smap": DatasetDescriptor("smap", 135_183, 427_617, 12.8, 25),
    "smd": DatasetDescriptor("smd", 25_300, 25_300, 4.21, 38),
}


def resolve_data_path(path: str | os.PathLike) -> Path:
    """Relative paths resolve against $LATAD_DATA_ROOT when it is set."""
    p = Path(path)
    root = os.environ.get("LATAD_DATA_ROOT")
    if not p.is_absolute() and root:
        return Path(root) / p
    return p


def validate_against_descriptor(
    name: str, train: TimeSeriesDataset, test: TimeSeriesDataset
) -> list[str]:
    """Compare loaded statistics with the catalog; returns the warning messages."""
    desc = DESCRIPTORS[name]
    problems = []
    if len(train.values) != desc.expected_train_len:
        problems.append(f"train length {len(train.values)} != expected {desc.expected_train_len}")
    if len(test.values) != desc.expected_test_len:
        problems.append(f"test length {len(test.values)} != expected {desc.expected_test_len}")
    if train.values.shape[1] != desc.expected_feature_count:
        problems.append(
            f"feature count {train.values.shape[1]} != expected {desc.expected_feature_count}"
        )
    if test.labels is not None and len(test.labels):
        ratio = 100.0 * float(np.mean(test.labels))
        if abs(ratio - desc.expected_anomaly_ratio) > 0.25:
            problems.append(
                f"anomaly ratio {ratio:.2f}% != expected {desc.expected_anomaly_ratio}%"
            )
    for msg in problems:
        warnings.warn(f"{name}: {msg}", DatasetStatsWarning)
    return problems


def _first_existing(root: Path, names: list[str]) -> Path:
    for name in names:
        candidate = root / name
        if candidate.exists():
            return candidate
    raise FileNotFoundError(
        f"none of {names} found under {root}; expected the published layout"
    )


def _numeric_frame(df: pd.DataFrame, drop: list[str]) -> pd.DataFrame:
    df = df.drop(columns=[c for c in drop if c in df.columns])
    return df.apply(pd.to_numeric, errors="coerce")


def load_csv_dataset(path: Path, role: str) -> TimeSeriesDataset:
    """Generic CSV format: header, a timestamp column, features, optional label column."""
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    df = pd.read_csv(path)
    df.columns = [str(c).strip() for c in df.columns]
    labels = None
    if "label" in df.columns:
        labels = df["label"].astype(int).to_numpy()
        df = df.drop(columns=["label"])
    if "timestamp" in df.columns:
        timestamps = df["timestamp"].to_numpy()
        df = df.drop(columns=["timestamp"])
    else:
        timestamps = np.arange(len(df))
    values = df.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    return TimeSeriesDataset(
        values=values,
        timestamps=timestamps,
        labels=labels,
        role=role,
        feature_names=list(df.columns),
    )


def _load_swat_like(root: Path, train_names: list[str], test_names: list[str], label_hint: str):
    train_path = _first_existing(root, train_names)
    test_path = _first_existing(root, test_names)
    frames = []
    labels = []
    for path in (train_path, test_path):
        df = pd.read_csv(path)
        df.columns = [str(c).strip() for c in df.columns]
        label_col = next((c for c in df.columns if label_hint.lower() in c.lower()), None)
        if label_col is not None:
            raw = df[label_col]
            if raw.dtype == object:
                lab = (raw.astype(str).str.strip().str.lower() != "normal").astype(int)
            else:
                numeric = pd.to_numeric(raw, errors="coerce").fillna(0)
                # WADI convention: -1 marks attack rows; otherwise already 0/1
                lab = (numeric == -1).astype(int) if (numeric == -1).any() else (numeric != 0).astype(int)
            labels.append(lab.to_numpy())
            df = df.drop(columns=[label_col])
        else:
            labels.append(None)
        df = _numeric_frame(df, drop=["Timestamp", "Row", "Date", "Time"])
        df = df.dropna(axis=1, how="all")
        frames.append(df)
    train_df, test_df = frames
    common = [c for c in train_df.columns if c in set(test_df.columns)]
    train_values = train_df[common].to_numpy(dtype=float)
    test_values = test_df[common].to_numpy(dtype=float)
    train = TimeSeriesDataset(
        values=train_values,
        timestamps=np.arange(len(train_values)),
        labels=None,
        role="train",
        feature_names=common,
    )
    test = TimeSeriesDataset(
        values=test_values,
        timestamps=np.arange(len(test_values)),
        labels=labels[1],
        role="test",
        feature_names=common,
    )
    return train, test


def load_swat(root: Path):
    return _load_swat_like(
        root,
        ["train.csv", "SWaT_Dataset_Normal_v1.csv"],
        ["test.csv", "SWaT_Dataset_Attack_v0.csv"],
        label_hint="normal/attack",
    )


def load_wadi(root: Path):
    return _load_swat_like(
        root,
        ["train.csv", "WADI_14days.csv"],
        ["test.csv", "WADI_attackdata_labelled.csv", "WADI_attackdata.csv"],
        label_hint="lable",  # the published label column header carries this spelling
    )


def _load_nasa(root: Path, spacecraft: str):
    """MSL/SMAP layout: train/<chan>.npy, test/<chan>.npy, labeled_anomalies.csv."""
    anomalies_path = _first_existing(root, ["labeled_anomalies.csv"])
    table = pd.read_csv(anomalies_path)
    table.columns = [str(c).strip() for c in table.columns]
    rows = table[table["spacecraft"].astype(str).str.upper() == spacecraft.upper()]
    channels = sorted(rows["chan_id"].astype(str))
    if not channels:
        raise FileNotFoundError(f"no {spacecraft} channels listed in {anomalies_path}")
    train_parts, test_parts, label_parts = [], [], []
    for chan in channels:
        train_file = root / "train" / f"{chan}.npy"
        test_file = root / "test" / f"{chan}.npy"
        if not train_file.exists() or not test_file.exists():
            raise FileNotFoundError(f"missing channel arrays for {chan} under {root}")
        train_arr = np.load(train_file)
        test_arr = np.load(test_file)
        lab = np.zeros(len(test_arr), dtype=np.int64)
        spans = rows.loc[rows["chan_id"].astype(str) == chan, "anomaly_sequences"].iloc[0]
        for start, end in ast.literal_eval(str(spans)):
            lab[start : end + 1] = 1
        train_parts.append(np.atleast_2d(train_arr.astype(float)))
        test_parts.append(np.atleast_2d(test_arr.astype(float)))
        label_parts.append(lab)
    train_values = np.concatenate(train_parts, axis=0)
    test_values = np.concatenate(test_parts, axis=0)
    names = [f"c{i}" for i in range(train_values.shape[1])]
    train = TimeSeriesDataset(
        values=train_values,
        timestamps=np.arange(len(train_values)),
        role="train",
        feature_names=names,
    )
    test = TimeSeriesDataset(
        values=test_values,
        timestamps=np.arange(len(test_values)),
        labels=np.concatenate(label_parts),
        role="test",
        feature_names=names,
    )
    test.metadata = {"channel_order": channels}  # concatenation order is lexicographic
    return train, test


def load_smd(root: Path, machine: Optional[str] = None):
    """SMD layout: train/, test/, test_label/ with comma-separated text matrices."""
    train_dir = root / "train"
    if not train_dir.exists():
        raise FileNotFoundError(f"expected train/, test/, test_label/ under {root}")
    machines = sorted(p.stem for p in train_dir.glob("*.txt"))
    if machine is not None:
        if machine not in machines:
            raise FileNotFoundError(f"machine {machine!r} not found under {train_dir}")
        machines = [machine]
    if not machines:
        raise FileNotFoundError(f"no machine files under {train_dir}")
    train_parts, test_parts, label_parts = [], [], []
    for name in machines:
        train_parts.append(np.loadtxt(train_dir / f"{name}.txt", delimiter=","))
        test_parts.append(np.loadtxt(root / "test" / f"{name}.txt", delimiter=","))
        label_parts.append(np.loadtxt(root / "test_label" / f"{name}.txt").astype(np.int64))
    train_values = np.atleast_2d(np.concatenate(train_parts, axis=0))
    test_values = np.atleast_2d(np.concatenate(test_parts, axis=0))
    names = [f"m{i}" for i in range(train_values.shape[1])]
    train = TimeSeriesDataset(
        values=train_values, timestamps=np.arange(len(train_values)), role="train", feature_names=names
    )
    test = TimeSeriesDataset(
        values=test_values,
        timestamps=np.arange(len(test_values)),
        labels=np.concatenate(label_parts),
        role="test",
        feature_names=names,
    )
    return train, test


def load_benchmark(
    name: str, path: str | os.PathLike, machine: Optional[str] = None
) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Load one of the five benchmark layouts and validate its statistics."""
    name = name.lower()
    root = resolve_data_path(path)
    if not root.exists():
        raise FileNotFoundError(f"dataset path does not exist: {root}")
    if name == "swat":
        train, test = load_swat(root)
    elif name == "wadi":
        train, test = load_wadi(root)
    elif name in ("msl", "smap"):
        train, test = _load_nasa(root, name)
    elif name == "smd":
        train, test = load_smd(root, machine)
    else:
        raise ValueError(f"unknown benchmark {name!r}")
    validate_against_descriptor(name, train, test)
    return train, test


def load_dataset_pair(
    source: str, path: Optional[str], machine: Optional[str] = None
) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Dispatch for config sources other than the synthetic generator."""
    if source == "csv":
        if path is None:
            raise ValueError("dataset.path required for csv source")
        root = resolve_data_path(path)
        train = load_csv_dataset(root / "train.csv", "train")
        test = load_csv_dataset(root / "test.csv", "test")
        return train, test
    if path is None:
        raise ValueError(f"dataset.path required for benchmark {source!r}")
    return load_benchmark(source, path, machine)


def dataset_to_csv(ds: TimeSeriesDataset, path: str | os.PathLike) -> None:
    """Write the shared CSV schema: timestamp, features..., optional label."""
    frame = pd.DataFrame(ds.values, columns=ds.feature_names)
    frame.insert(0, "timestamp", ds.timestamps)
    if ds.labels is not None:
        frame["label"] = ds.labels
    frame.to_csv(path, index=False)


def save_npz(ds: TimeSeriesDataset, path: str | os.PathLike) -> None:
    """Binary columnar form of the same schema, for large files."""
    payload = {
        "values": ds.values,
        "timestamps": ds.timestamps,
        "feature_names": np.array(ds.feature_names),
        "role": np.array(ds.role),
    }
    if ds.labels is not None:
        payload["labels"] = ds.labels
    np.savez(path, **payload)


def load_npz(path: str | os.PathLike) -> TimeSeriesDataset:
    data = np.load(path, allow_pickle=False)
    return TimeSeriesDataset(
        values=data["values"],
        timestamps=data["timestamps"],
        labels=data["labels"] if "labels" in data else None,
        role=str(data["role"]),
        feature_names=[str(n) for n in data["feature_names"]],
    )
