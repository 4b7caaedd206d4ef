import numpy as np
import pytest
import torch

from latad.augmentation import build_generators
from latad.checkpoint import load_checkpoint, rebuild, save_checkpoint
from latad.config import ExtractorSettings
from latad.features import build_extractor


def test_round_trip_is_bit_exact(tmp_path):
    settings = ExtractorSettings(d_model=8, transformer_heads=2, transformer_layers=1)
    extractor = build_extractor(3, 12, settings, seed=0)
    generators = build_generators(12, 3, 2, seed=1)
    path = tmp_path / "model.pt"
    save_checkpoint(path, extractor, generators, settings, 3, 12, np.array([0.6, 0.7]), "cafe" * 16)
    payload = load_checkpoint(path)
    assert payload["config_hash"] == "cafe" * 16
    loaded_ext, loaded_gens = rebuild(payload)
    for a, b in zip(extractor.state_dict().values(), loaded_ext.state_dict().values()):
        assert torch.equal(a, b)
    for a, b in zip(generators.state_dict().values(), loaded_gens.state_dict().values()):
        assert torch.equal(a, b)
    x = torch.randn(2, 12, 3)
    assert torch.equal(extractor(x), loaded_ext(x))


def test_disabled_modules_restored(tmp_path):
    settings = ExtractorSettings(d_model=8, transformer_heads=2)
    extractor = build_extractor(3, 10, settings, seed=0, use_gat=False)
    generators = build_generators(10, 3, 1, seed=1)
    path = tmp_path / "model.pt"
    save_checkpoint(path, extractor, generators, settings, 3, 10, np.array([0.5]), "h" * 64)
    loaded_ext, _ = rebuild(load_checkpoint(path))
    assert loaded_ext.disabled_modules == ["gat"]


def test_missing_file_and_bad_version(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "absent.pt")
    torch.save({"format_version": 999}, tmp_path / "bad.pt")
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(tmp_path / "bad.pt")
