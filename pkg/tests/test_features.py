import numpy as np
import pytest
import torch

from conftest import max_rel_err
from latad.config import ExtractorSettings
from latad.features import (
    CausalConvFusion,
    FeatureGraphAttention,
    LocalConv,
    SelfAttention,
    build_extractor,
    sinusoidal_encoding,
)
from latad.oracles import (
    finite_difference_grad,
    oracle_depthwise_conv,
    oracle_graph_attention,
    oracle_scaled_attention,
)


def small_settings(d_model=16, heads=2):
    return ExtractorSettings(d_model=d_model, transformer_heads=heads)


class TestLocalConv:
    def test_zero_input_gives_rectified_bias(self):
        torch.manual_seed(0)
        conv = LocalConv(3, 5)
        with torch.no_grad():
            conv.conv.bias.copy_(torch.tensor([0.5, -0.5, 0.0]))
        out = conv(torch.zeros(1, 8, 3))
        expected = torch.tensor([0.5, 0.0, 0.0]).expand(8, 3)
        assert torch.allclose(out[0], expected)

    def test_identity_kernel_is_relu(self):
        conv = LocalConv(2, 5)
        with torch.no_grad():
            conv.conv.weight.zero_()
            conv.conv.weight[:, 0, 2] = 1.0  # center tap
            conv.conv.bias.zero_()
        x = torch.randn(2, 10, 2)
        assert torch.allclose(conv(x), torch.relu(x))

    def test_matches_sliding_dot_product_oracle(self):
        torch.manual_seed(1)
        conv = LocalConv(4, 5)
        x = torch.randn(1, 12, 4, dtype=torch.float64)
        conv = conv.double()
        got = conv(x)[0].numpy()
        kernels = conv.conv.weight.detach().numpy()[:, 0, :].tolist()
        biases = conv.conv.bias.detach().numpy().tolist()
        expected = oracle_depthwise_conv(x[0].numpy().tolist(), kernels, biases)
        assert max_rel_err(got, expected) < 1e-10

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            LocalConv(2, 4)


class TestFeatureGraphAttention:
    def test_single_vertex_attention_is_one(self):
        torch.manual_seed(2)
        gat = FeatureGraphAttention(window=6)
        x = torch.randn(1, 6, 1)
        out, alpha = gat(x, return_attention=True)
        assert torch.allclose(alpha, torch.ones(1, 1, 1))
        assert torch.allclose(out, torch.sigmoid(x))

    def test_equal_scores_give_uniform_attention(self):
        gat = FeatureGraphAttention(window=4)
        with torch.no_grad():
            gat.attention_vector.zero_()
        x = torch.randn(1, 4, 5)
        alpha = gat.attention(x)
        assert torch.allclose(alpha, torch.full((1, 5, 5), 0.2))

    def test_rows_sum_to_one_and_match_oracle(self):
        torch.manual_seed(3)
        gat = FeatureGraphAttention(window=7).double()
        x = torch.randn(1, 7, 3, dtype=torch.float64)
        out, alpha = gat(x, return_attention=True)
        assert torch.allclose(alpha.sum(dim=2), torch.ones(1, 3, dtype=torch.float64), atol=1e-6)
        expected_alpha, expected_mixed = oracle_graph_attention(
            x[0].numpy().T.tolist(), gat.attention_vector.detach().numpy().tolist(), gat.slope
        )
        assert max_rel_err(alpha[0].numpy(), expected_alpha) < 1e-9
        assert max_rel_err(out[0].numpy().T, expected_mixed) < 1e-9

    def test_no_features_rejected(self):
        gat = FeatureGraphAttention(window=4)
        with pytest.raises(ValueError):
            gat.attention(torch.zeros(1, 4, 0))


class TestSelfAttention:
    def test_single_position_attends_to_itself(self):
        torch.manual_seed(4)
        attn = SelfAttention(8, 2)
        _, weights = attn(torch.randn(1, 1, 8), return_attention=True)
        assert torch.allclose(weights, torch.ones(1, 2, 1, 1))

    def test_rows_sum_to_one(self):
        torch.manual_seed(5)
        attn = SelfAttention(8, 2)
        _, weights = attn(torch.randn(3, 9, 8), return_attention=True)
        assert torch.allclose(weights.sum(dim=-1), torch.ones(3, 2, 9, 9), atol=1e-6)

    def test_single_head_matches_equation_oracle(self):
        torch.manual_seed(6)
        attn = SelfAttention(6, 1).double()
        x = torch.randn(1, 4, 6, dtype=torch.float64)
        q = attn.query(x)[0].detach().numpy()
        k = attn.key(x)[0].detach().numpy()
        v = attn.value(x)[0].detach().numpy()
        expected_w, expected_mix = oracle_scaled_attention(q.tolist(), k.tolist(), v.tolist())
        _, weights = attn(x, return_attention=True)
        assert max_rel_err(weights[0, 0].numpy(), expected_w) < 1e-9
        mixed = torch.tensor(np.array(expected_mix))
        got = attn.out(mixed).detach()
        assert torch.allclose(attn(x).detach()[0], got, atol=1e-9)

    def test_indivisible_heads_rejected(self):
        with pytest.raises(ValueError):
            SelfAttention(6, 4)


class TestCausalFusion:
    def test_concat_shape(self):
        x = torch.randn(2, 10, 4)
        h = torch.cat([x, x, x], dim=2)
        assert h.shape == (2, 10, 12)

    def test_causality_last_row(self):
        torch.manual_seed(7)
        tcn = CausalConvFusion(6, 8, levels=4)
        x = torch.randn(1, 40, 6)
        base = tcn.hidden(x)
        bumped = x.clone()
        bumped[0, -1, :] += 1.0
        out = tcn.hidden(bumped)
        assert torch.allclose(base[:, :, :-1], out[:, :, :-1], atol=1e-6)
        assert not torch.allclose(base[:, :, -1], out[:, :, -1])

    def test_receptive_field_is_31_rows(self):
        torch.manual_seed(8)
        tcn = CausalConvFusion(3, 8, levels=4, kernel=3)
        x = torch.randn(1, 64, 3)
        z = tcn(x)
        inside = x.clone()
        inside[0, 64 - 31, :] += 1.0  # oldest row still inside the field
        assert not torch.allclose(tcn(inside), z)
        outside = x.clone()
        outside[0, 64 - 32, :] += 1.0
        assert torch.allclose(tcn(outside), z, atol=1e-6)


class TestExtractor:
    def test_deterministic_and_shaped(self):
        ext = build_extractor(5, 12, small_settings(), seed=0)
        x = torch.randn(3, 12, 5)
        z1 = ext(x)
        z2 = ext(x)
        assert z1.shape == (3, 16)
        assert torch.equal(z1, z2)

    def test_same_seed_same_params(self):
        a = build_extractor(4, 10, small_settings(), seed=5)
        b = build_extractor(4, 10, small_settings(), seed=5)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_shape_mismatch_rejected(self):
        ext = build_extractor(4, 10, small_settings(), seed=0)
        with pytest.raises(ValueError):
            ext(torch.zeros(1, 9, 4))

    def test_attention_rows_sum_to_one(self):
        ext = build_extractor(4, 10, small_settings(), seed=1)
        maps = ext.attention_maps(torch.randn(2, 10, 4))
        assert torch.allclose(maps["gat"].sum(-1), torch.ones(2, 4), atol=1e-6)
        for layer in maps["transformer"]:
            assert torch.allclose(layer.sum(-1), torch.ones_like(layer.sum(-1)), atol=1e-6)

    def test_ablation_flags_drop_branches(self):
        ext = build_extractor(4, 10, small_settings(), seed=0, use_gat=False, use_transformer=False)
        assert ext.disabled_modules == ["gat", "transformer"]
        assert ext(torch.randn(2, 10, 4)).shape == (2, 16)
        no_tcn = build_extractor(4, 10, small_settings(), seed=0, use_tcn=False)
        assert no_tcn(torch.randn(2, 10, 4)).shape == (2, 16)

    def test_input_gradient_matches_finite_differences(self):
        torch.set_default_dtype(torch.float64)
        try:
            ext = build_extractor(3, 8, small_settings(d_model=8, heads=2), seed=2).double()
            x0 = np.random.default_rng(3).uniform(0.1, 0.9, size=(8, 3))

            def f(flat):
                t = torch.tensor(np.asarray(flat, dtype=float).reshape(8, 3))
                return float(ext(t.unsqueeze(0)).square().sum().detach())

            t = torch.tensor(x0, requires_grad=True)
            ext(t.unsqueeze(0)).square().sum().backward()
            analytic = t.grad.numpy().ravel()
            coords = list(np.random.default_rng(4).choice(24, size=12, replace=False))
            fd = finite_difference_grad(f, x0.ravel().tolist(), step=1e-4, coords=[int(c) for c in coords])
            worst = max(abs(fd[c] - analytic[c]) / max(abs(fd[c]), abs(analytic[c]), 1e-6) for c in fd)
            assert worst < 1e-3
        finally:
            torch.set_default_dtype(torch.float32)


def test_sinusoidal_encoding_shape_and_range():
    pe = sinusoidal_encoding(20, 16)
    assert pe.shape == (20, 16)
    assert float(pe.abs().max()) <= 1.0
    assert not torch.equal(pe[0], pe[1])
