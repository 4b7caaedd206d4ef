import numpy as np
import pytest

from latad.config import ExperimentConfig
from latad.runner import run_evaluate, run_preprocess, run_score, run_train

FIXTURES = __file__.rsplit("/", 1)[0] + "/fixtures"
GOLDEN = __file__.rsplit("/", 1)[0] + "/golden"


def acceptance_overrides(out_dir: str, seed: int = 0) -> dict:
    """Desk-scale synthetic configuration used by the end-to-end acceptance runs."""
    return {
        "dataset": {"synthetic": {"periods": [60.0] * 5}},
        "preprocessing": {"downsample": 2, "window": 24, "train_stride": 10},
        "extractor": {"d_model": 32},
        "training": {"max_epoch": 8},
        "seed": seed,
        "out_dir": out_dir,
    }


def tiny_overrides(out_dir: str, seed: int = 0) -> dict:
    """Much smaller pipeline config for fast plumbing tests."""
    return {
        "dataset": {
            "synthetic": {
                "train_len": 1200,
                "test_len": 400,
                "periods": [60.0] * 5,
                "anomalies": [
                    {"kind": "point", "start": 80, "length": 2, "magnitude": 5.0, "feature": 0},
                    {"kind": "collective", "start": 200, "length": 40, "magnitude": 2.0, "feature": 2},
                ],
            }
        },
        "preprocessing": {"downsample": 2, "window": 16, "train_stride": 8},
        "extractor": {"d_model": 16, "transformer_heads": 2},
        "training": {"max_epoch": 2},
        "scoring": {"clusters": 4},
        "seed": seed,
        "out_dir": out_dir,
    }


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory):
    """One full synthetic pipeline run shared by the end-to-end acceptance tests."""
    out = tmp_path_factory.mktemp("acceptance") / "run"
    config = ExperimentConfig.model_validate(acceptance_overrides(str(out)))
    run_preprocess(config)
    train_summary = run_train(config)
    run_score(config)
    evaluate_summary = run_evaluate(config)
    return {
        "config": config,
        "run_dir": out,
        "train": train_summary,
        "evaluate": evaluate_summary,
    }


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    """Small trained pipeline shared by runner/service/diagnosis plumbing tests."""
    out = tmp_path_factory.mktemp("tiny") / "run"
    config = ExperimentConfig.model_validate(tiny_overrides(str(out)))
    run_preprocess(config)
    run_train(config)
    run_score(config)
    return {"config": config, "run_dir": out}


def rel_err(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def max_rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())
