import numpy as np
import pytest
import torch
from scipy import stats as scipy_stats

from conftest import max_rel_err
from latad.augmentation import (
    MaskGenerator,
    NeighborhoodSampler,
    build_generators,
    draw_positive_centers,
    find_neighborhood_eta,
    generate_masks,
    generate_negatives,
    mask_min_distance,
    sample_positives,
)
from latad.oracles import oracle_mask


class TestNeighborhoodEta:
    def test_white_noise_reaches_cap(self):
        rng = np.random.default_rng(0)
        series = rng.normal(size=(600, 2))
        assert find_neighborhood_eta(series, center=300, delta=60, eta_max=3) == 3

    def test_random_walk_stops_at_one(self):
        rng = np.random.default_rng(1)
        series = np.cumsum(rng.normal(size=(600, 1)), axis=0)
        assert find_neighborhood_eta(series, center=300, delta=100) == 1

    def test_cap_of_one(self):
        rng = np.random.default_rng(2)
        series = rng.normal(size=(200, 1))
        assert find_neighborhood_eta(series, center=100, delta=40, eta_max=1) == 1

    def test_short_segment_returns_one(self):
        series = np.random.default_rng(3).normal(size=(10, 1))
        assert find_neighborhood_eta(series, center=5, delta=4) == 1


class TestPositiveSampling:
    def test_all_windows_in_bounds(self):
        rng = np.random.default_rng(4)
        series = rng.normal(size=(300, 3))
        windows = sample_positives(series, start=10, window=50, eta=3, count=64, rng=rng)
        assert windows.shape == (64, 50, 3)
        assert np.isfinite(windows).all()

    def test_degenerate_scale_concentrates_on_anchor(self):
        rng = np.random.default_rng(5)
        series = np.arange(400, dtype=float).reshape(-1, 1)
        centers = draw_positive_centers(200, eta=1, delta=0, count=100, rng=rng, sigma_floor=1.0)
        assert np.abs(centers - 200).mean() < 3

    def test_center_distribution_matches_gaussian(self):
        rng = np.random.default_rng(6)
        centers = draw_positive_centers(5000, eta=1, delta=20, count=10_000, rng=rng)
        result = scipy_stats.kstest(centers, "norm", args=(5000, 20))
        assert result.pvalue > 0.01

    def test_sampler_caches_and_reproduces(self):
        rng_series = np.random.default_rng(7)
        series = rng_series.normal(size=(400, 2))
        sampler = NeighborhoodSampler(series, window=32)
        eta_first = sampler.eta(100)
        assert sampler.eta(100) == eta_first
        a = sampler.positives(100, 4, np.random.default_rng(8))
        b = sampler.positives(100, 4, np.random.default_rng(8))
        np.testing.assert_array_equal(a, b)


class TestMaskGenerators:
    def test_masks_strictly_inside_unit_interval(self):
        torch.manual_seed(0)
        gens = build_generators(10, 3, 4, seed=0)
        masks = generate_masks(torch.randn(5, 10, 3), gens)
        assert float(masks.min()) > 0.0 and float(masks.max()) < 1.0

    def test_zero_parameters_give_half(self):
        gen = MaskGenerator(6, 2)
        with torch.no_grad():
            for layer in (gen.layer1, gen.layer2):
                layer.weight.zero_()
                layer.bias.zero_()
        out = gen(torch.randn(1, 6, 2))
        assert torch.allclose(out, torch.full((1, 6, 2), 0.5))

    def test_matches_two_layer_oracle(self):
        torch.manual_seed(1)
        gen = MaskGenerator(5, 2).double()
        x = torch.randn(1, 5, 2, dtype=torch.float64)
        got = gen(x)[0].numpy().ravel()
        expected = oracle_mask(
            x[0].numpy().ravel().tolist(),
            gen.layer1.weight.detach().numpy().tolist(),
            gen.layer1.bias.detach().numpy().tolist(),
            gen.layer2.weight.detach().numpy().tolist(),
            gen.layer2.bias.detach().numpy().tolist(),
            gen.slope,
        )
        assert max_rel_err(got, expected) < 1e-9

    def test_negative_limits(self):
        gens = build_generators(4, 2, 1, seed=2)
        x = torch.rand(2, 4, 2) + 0.1
        with torch.no_grad():
            gens[0].layer2.bias.fill_(30.0)  # saturate sigmoid toward 1
        near_identity = generate_negatives(x, gens)
        assert torch.allclose(near_identity[:, 0], x, atol=1e-4)
        with torch.no_grad():
            gens[0].layer2.bias.fill_(-30.0)
        near_zero = generate_negatives(x, gens)
        assert float(near_zero.abs().max()) < 1e-4

    def test_negatives_never_amplify_nonnegative_inputs(self):
        gens = build_generators(6, 3, 4, seed=3)
        x = torch.rand(4, 6, 3)
        negatives = generate_negatives(x, gens)
        assert torch.all(negatives.abs() <= x.abs().unsqueeze(1) + 1e-12)

    def test_masks_stay_distinct_after_training_step(self):
        torch.manual_seed(4)
        gens = build_generators(8, 2, 3, seed=4)
        probe = torch.rand(1, 8, 2)
        optimizer = torch.optim.Adam(gens.parameters(), lr=1e-3)
        loss = generate_negatives(probe, gens).square().mean()
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        assert mask_min_distance(probe, gens) > 0.0
