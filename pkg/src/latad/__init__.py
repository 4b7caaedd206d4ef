"""Self-supervised multivariate time-series anomaly detection (LATAD)."""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config

__all__ = ["ExperimentConfig", "load_config", "__version__"]
