"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional, Union

from pydantic import BaseModel, Field

from ..config import ExperimentConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class ConfigResponse(BaseModel):
    config: ExperimentConfig


class RunRequest(BaseModel):
    """Shared shape of every command request.

    ``config`` accepts a partial mapping; omitted keys take their defaults.
    ``run_dir`` overrides ``config.out_dir`` when set.
    """

    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    run_dir: Optional[str] = None


class DiagnoseRequest(RunRequest):
    window: Union[int, str] = "highest-score"


class SynthResponse(BaseModel):
    run_dir: str
    train_rows: int
    test_rows: int
    anomaly_points: int
    artifacts: dict[str, str]


class PreprocessResponse(BaseModel):
    run_dir: str
    train_len: int
    val_len: int
    test_len: int
    features: int
    artifacts: dict[str, str]


class TrainResponse(BaseModel):
    run_dir: str
    epochs_run: int
    aborted: bool
    final_total_loss: Optional[float] = None
    artifacts: dict[str, str]


class ScoreResponse(BaseModel):
    run_dir: str
    threshold: float
    policy: str
    alerts: int
    artifacts: dict[str, str]


class EvaluateResponse(BaseModel):
    run_dir: str
    report: Optional[dict[str, Any]] = None
    state: dict[str, Any] = Field(default_factory=dict)
    artifacts: dict[str, str]


class DiagnoseResponse(BaseModel):
    run_dir: str
    report: dict[str, Any]
    artifacts: dict[str, str]
