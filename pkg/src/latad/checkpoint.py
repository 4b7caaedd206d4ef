"""Versioned model checkpoints: extractor + generators + the config that built them."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import torch

from .augmentation import build_generators
from .config import ExtractorSettings
from .features import build_extractor

FORMAT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    extractor: torch.nn.Module,
    generators: torch.nn.ModuleList,
    settings: ExtractorSettings,
    features: int,
    window: int,
    margins: np.ndarray,
    config_hash: str,
    extra: dict[str, Any] | None = None,
) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "extractor": extractor.state_dict(),
        "generators": generators.state_dict(),
        "settings": settings.model_dump(mode="json"),
        "features": features,
        "window": window,
        "num_generators": len(generators),
        "disabled_modules": getattr(extractor, "disabled_modules", []),
        "margins": torch.as_tensor(np.asarray(margins)),
        "config_hash": config_hash,
        "extra": extra or {},
    }
    torch.save(payload, str(path))


def load_checkpoint(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(str(path), map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version}")
    return payload


def rebuild(payload: dict[str, Any]) -> tuple[torch.nn.Module, torch.nn.ModuleList]:
    """Reconstruct the modules from a checkpoint payload; load is bit-exact."""
    settings = ExtractorSettings.model_validate(payload["settings"])
    disabled = set(payload.get("disabled_modules", []))
    extractor = build_extractor(
        payload["features"],
        payload["window"],
        settings,
        use_gat="gat" not in disabled,
        use_transformer="transformer" not in disabled,
        use_tcn="tcn" not in disabled,
    )
    extractor.load_state_dict(payload["extractor"])
    extractor.eval()
    generators = build_generators(
        payload["window"], payload["features"], payload["num_generators"], settings.leaky_slope
    )
    generators.load_state_dict(payload["generators"])
    generators.eval()
    return extractor, generators
