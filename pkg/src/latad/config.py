"""Experiment configuration: nested pydantic models, YAML I/O, overrides, hashing.

Every run command (preprocess/train/score/evaluate/diagnose) is driven by a
single resolved ``ExperimentConfig``.  The resolved snapshot is written
verbatim into the run directory so a run can always be reproduced from its
artifacts alone.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator


class AnomalySpec(BaseModel):
    """One injected anomaly interval in a synthetic test split.

    ``start`` is relative to the beginning of the test split; ``feature``
    selects a single column (None hits every column).
    """

    kind: Literal["point", "contextual", "collective"] = "point"
    start: int = 0
    length: int = 1
    magnitude: float = 3.0
    feature: Optional[int] = None

    @field_validator("length")
    @classmethod
    def _positive_length(cls, v: int) -> int:
        if v < 1:
            raise ValueError("anomaly length must be >= 1")
        return v


def default_anomaly_plan() -> list[AnomalySpec]:
    # 2 point / 2 contextual / 2 collective spread over a 2000-step test split.
    return [
        AnomalySpec(kind="point", start=150, length=2, magnitude=5.0, feature=0),
        AnomalySpec(kind="contextual", start=400, length=80, magnitude=2.5, feature=1),
        AnomalySpec(kind="collective", start=700, length=90, magnitude=2.0, feature=2),
        AnomalySpec(kind="point", start=1000, length=2, magnitude=5.0, feature=3),
        AnomalySpec(kind="contextual", start=1250, length=80, magnitude=2.5, feature=4),
        AnomalySpec(kind="collective", start=1600, length=90, magnitude=2.0, feature=0),
    ]


class SyntheticConfig(BaseModel):
    """Seeded generator for mixed-sinusoid series with planted anomalies."""

    features: int = 5
    train_len: int = 8000
    test_len: int = 2000
    periods: Optional[list[float]] = None
    amplitudes: Optional[list[float]] = None
    mixing_strength: float = 0.3
    noise_std: float = 0.02
    anomalies: list[AnomalySpec] = Field(default_factory=default_anomaly_plan)
    seed: Optional[int] = None  # None -> experiment seed


class DatasetConfig(BaseModel):
    source: Literal["synthetic", "csv", "swat", "wadi", "msl", "smap", "smd"] = "synthetic"
    path: Optional[str] = None  # relative paths resolve against $LATAD_DATA_ROOT
    machine: Optional[str] = None  # smd only: restrict to one machine file
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)


class PreprocessConfig(BaseModel):
    downsample: int = 5
    window: int = 100
    train_stride: int = 10
    score_stride: int = 1
    iqr_multiplier: float = 1.5
    val_fraction: float = 0.1

    @field_validator("downsample", "window", "train_stride", "score_stride")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("preprocessing sizes must be >= 1")
        return v


class ExtractorSettings(BaseModel):
    d_model: int = 128
    conv_kernel: int = 5
    transformer_layers: int = 2
    transformer_heads: int = 4
    tcn_levels: int = 4
    tcn_kernel: int = 3
    leaky_slope: float = 0.2
    seed: Optional[int] = None  # None -> experiment seed

    @field_validator("conv_kernel")
    @classmethod
    def _odd_kernel(cls, v: int) -> int:
        if v < 1 or v % 2 == 0:
            raise ValueError("conv_kernel must be a positive odd integer")
        return v

    @field_validator("d_model", "tcn_levels", "transformer_layers", "transformer_heads")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("extractor sizes must be >= 1")
        return v

    @model_validator(mode="after")
    def _heads_divide_model(self) -> "ExtractorSettings":
        if self.d_model % self.transformer_heads != 0:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by "
                f"transformer_heads ({self.transformer_heads})"
            )
        return self


class AugmentationConfig(BaseModel):
    num_samples: int = 4  # positives and negatives per anchor
    eta_max: int = 3
    adf_pvalue: float = 0.01
    sigma_floor: float = 1.0

    @field_validator("num_samples", "eta_max")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v


class TrainingConfig(BaseModel):
    reg_weight: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epoch: int = 30
    grad_clip: float = 5.0
    margin_low: float = 0.5
    margin_high: float = 0.999
    use_comp: bool = True
    use_reg: bool = True
    use_gat: bool = True
    use_tcn: bool = True
    use_transformer: bool = True
    seed: Optional[int] = None  # None -> experiment seed

    @field_validator("reg_weight")
    @classmethod
    def _nonnegative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("reg_weight must be >= 0")
        return v

    @model_validator(mode="after")
    def _margin_range(self) -> "TrainingConfig":
        if not (0.5 <= self.margin_low <= self.margin_high <= 0.999):
            raise ValueError("margins must satisfy 0.5 <= low <= high <= 0.999")
        return self


class ScoringConfig(BaseModel):
    clusters: int = 10
    coreset_fraction: float = 0.10
    kmeans_max_iter: int = 100
    divide_by_norm: bool = True
    threshold_policy: Literal["quantile", "best_f1"] = "quantile"
    quantile: float = 0.995
    seed: Optional[int] = None  # None -> experiment seed


class EvaluationConfig(BaseModel):
    pa_percentages: list[float] = Field(default_factory=lambda: [50.0])


class DiagnosisConfig(BaseModel):
    top_k: int = 4


class ExperimentConfig(BaseModel):
    """Root configuration; every field has a default so `{}` is a valid config."""

    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    preprocessing: PreprocessConfig = Field(default_factory=PreprocessConfig)
    extractor: ExtractorSettings = Field(default_factory=ExtractorSettings)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    scoring: ScoringConfig = Field(default_factory=ScoringConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    diagnosis: DiagnosisConfig = Field(default_factory=DiagnosisConfig)
    seed: int = 0
    out_dir: str = "runs/run"

    def resolved_seed(self, section: str) -> int:
        """Per-section seed: explicit value if set, otherwise the experiment seed."""
        sub = getattr(self, section, None)
        explicit = getattr(sub, "seed", None) if sub is not None else None
        return self.seed if explicit is None else explicit

    def config_hash(self) -> str:
        """Stable digest of everything except the output location."""
        payload = self.model_dump(mode="json")
        payload.pop("out_dir", None)
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_yaml())


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Build a config from an optional YAML file plus dotted-key overrides.

    Override values are YAML-parsed, so ``--set training.max_epoch=5`` and
    ``--set evaluation.pa_percentages=[25,50]`` both coerce correctly.
    """
    data: dict[str, Any] = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {path} must contain a mapping")
        data = loaded
    for key, value in (overrides or {}).items():
        _set_dotted(data, key, value)
    return ExperimentConfig.model_validate(data)


def parse_override(item: str) -> tuple[str, Any]:
    """Split a ``section.key=value`` CLI override into (dotted key, parsed value)."""
    if "=" not in item:
        raise ValueError(f"override {item!r} must look like section.key=value")
    key, raw = item.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def _set_dotted(data: dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value
