import json

import numpy as np
import pytest
import torch

from conftest import GOLDEN, rel_err
from latad.losses import (
    NonFiniteLossError,
    TripletBatch,
    compactness_loss,
    cosine_distance,
    kld_regularizer,
    separateness_loss,
    total_loss,
)
from latad.oracles import oracle_losses


def random_batch(rng, b=4, n=3, dim=6):
    return TripletBatch(
        anchor=torch.tensor(rng.normal(size=(b, dim))),
        positives=torch.tensor(rng.normal(size=(b, n, dim))),
        negatives=torch.tensor(rng.normal(size=(b, n, dim))),
    )


class TestCosineDistance:
    def test_identical_vectors(self):
        assert cosine_distance([1.0, 2.0], [1.0, 2.0]) == pytest.approx(0.0, abs=1e-12)

    def test_antipodal_vectors(self):
        assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(1.0)

    def test_orthogonal_vectors(self):
        assert cosine_distance([1.0, 0.0], [0.0, 3.0]) == pytest.approx(0.5)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine_distance([0.0, 0.0], [1.0, 0.0])


class TestCompactness:
    def test_positives_equal_anchor_give_zero(self):
        anchor = torch.randn(3, 5, dtype=torch.float64)
        batch = TripletBatch(anchor, anchor.unsqueeze(1).repeat(1, 2, 1), torch.randn(3, 2, 5, dtype=torch.float64))
        assert float(compactness_loss(batch)) == pytest.approx(0.0, abs=1e-9)

    def test_single_orthogonal_positive(self):
        batch = TripletBatch(
            anchor=torch.tensor([[1.0, 0.0]]),
            positives=torch.tensor([[[0.0, 1.0]]]),
            negatives=torch.tensor([[[1.0, 0.0]]]),
        )
        assert float(compactness_loss(batch)) == pytest.approx(0.5)


class TestSeparateness:
    def test_satisfied_margin_gives_zero(self):
        batch = TripletBatch(
            anchor=torch.tensor([[1.0, 0.0]]),
            positives=torch.tensor([[[1.0, 0.0]]]),  # d+ = 0
            negatives=torch.tensor([[[-1.0, 0.0]]]),  # d- = 1
        )
        assert float(separateness_loss(batch, torch.tensor([0.5]))) == 0.0

    def test_hinge_arithmetic(self):
        # d+ = 0.6 (cos -0.2), d- = 0.2 (cos 0.6) -> max(0, 0.6-0.2+0.5) = 0.9
        def vec_with_cos(c):
            return [c, float(np.sqrt(1 - c * c))]

        batch = TripletBatch(
            anchor=torch.tensor([[1.0, 0.0]], dtype=torch.float64),
            positives=torch.tensor([[vec_with_cos(-0.2)]], dtype=torch.float64),
            negatives=torch.tensor([[vec_with_cos(0.6)]], dtype=torch.float64),
        )
        got = float(separateness_loss(batch, torch.tensor([0.5], dtype=torch.float64)))
        assert got == pytest.approx(0.9, abs=1e-9)


class TestKldRegularizer:
    def test_equal_features_give_zero(self):
        z = torch.randn(2, 3, 4, dtype=torch.float64)
        batch = TripletBatch(torch.randn(2, 4, dtype=torch.float64), z, z.clone())
        assert float(kld_regularizer(batch)) == pytest.approx(0.0, abs=1e-12)

    def test_shifted_features_map_to_same_distribution(self):
        z = torch.randn(2, 3, 4, dtype=torch.float64)
        batch = TripletBatch(torch.randn(2, 4, dtype=torch.float64), z, z + 3.7)
        assert float(kld_regularizer(batch)) == pytest.approx(0.0, abs=1e-9)

    def test_nonnegative_and_positive_when_different(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            batch = random_batch(rng)
            value = float(kld_regularizer(batch))
            assert value >= 0.0
        distinct = TripletBatch(
            torch.randn(1, 4, dtype=torch.float64),
            torch.tensor([[[3.0, 0.0, 0.0, 0.0]]], dtype=torch.float64),
            torch.tensor([[[0.0, 3.0, 0.0, 0.0]]], dtype=torch.float64),
        )
        assert float(kld_regularizer(distinct)) > 1e-9


class TestTotalLoss:
    def test_weighted_sum(self):
        rng = np.random.default_rng(1)
        batch = random_batch(rng)
        margins = torch.tensor(rng.uniform(0.5, 0.999, 3))
        total, parts = total_loss(batch, margins, reg_weight=0.1)
        assert parts["total"] == pytest.approx(parts["comp"] + parts["sep"] + 0.1 * parts["reg"], rel=1e-9)
        total0, parts0 = total_loss(batch, margins, reg_weight=0.0)
        assert parts0["total"] == pytest.approx(parts0["comp"] + parts0["sep"], rel=1e-9)

    def test_ablation_flags_zero_terms(self):
        rng = np.random.default_rng(2)
        batch = random_batch(rng)
        margins = torch.tensor(rng.uniform(0.5, 0.999, 3))
        _, parts = total_loss(batch, margins, use_comp=False, use_reg=False)
        assert parts["comp"] == 0.0 and parts["reg"] == 0.0

    def test_nonfinite_raises(self):
        batch = TripletBatch(
            torch.tensor([[float("nan"), 1.0]]),
            torch.ones(1, 1, 2),
            torch.ones(1, 1, 2),
        )
        with pytest.raises(NonFiniteLossError):
            total_loss(batch, torch.tensor([0.5]))

    def test_nonnegativity_over_many_random_batches(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            batch = random_batch(rng, b=2, n=2, dim=4)
            margins = torch.tensor(rng.uniform(0.5, 0.999, 2))
            _, parts = total_loss(batch, margins)
            assert parts["comp"] >= 0 and parts["sep"] >= 0 and parts["reg"] >= 0


class TestOracleParity:
    def test_random_batches_match_scalar_loop_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            batch = random_batch(rng, b=3, n=3, dim=4)
            margins = rng.uniform(0.5, 0.999, 3)
            comp, sep, reg, total = oracle_losses(
                batch.anchor.numpy().tolist(),
                batch.positives.numpy().tolist(),
                batch.negatives.numpy().tolist(),
                margins.tolist(),
                0.1,
            )
            got_total, parts = total_loss(batch, torch.tensor(margins), reg_weight=0.1)
            assert rel_err(parts["comp"], comp) < 1e-6
            assert rel_err(parts["sep"], sep) < 1e-6
            assert rel_err(parts["reg"], reg) < 1e-6
            assert rel_err(float(got_total), total) < 1e-6

    def test_golden_cases(self):
        cases = json.loads(open(f"{GOLDEN}/losses_cases.json").read())
        assert cases, "golden loss cases missing"
        for case in cases:
            inp = case["input"]
            batch = TripletBatch(
                torch.tensor(inp["anchors"], dtype=torch.float64),
                torch.tensor(inp["positives"], dtype=torch.float64),
                torch.tensor(inp["negatives"], dtype=torch.float64),
            )
            _, parts = total_loss(
                batch, torch.tensor(inp["margins"], dtype=torch.float64), inp["reg_weight"]
            )
            for key in ("comp", "sep", "reg", "total"):
                assert abs(parts[key] - case["expected"][key]) <= case["tolerance"]
