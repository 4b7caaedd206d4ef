"""Contrastive objectives on latent triplets.

All losses operate on batched tensors: anchor (B, D), positives and
negatives (B, N, D).  Distances use the adjusted cosine distance
(1 - cos) / 2, which ranges over [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


class NonFiniteLossError(RuntimeError):
    """Raised when an objective evaluates to NaN/inf; carries the parts for diagnosis."""

    def __init__(self, parts: dict[str, float]):
        super().__init__(f"non-finite training loss: {parts}")
        self.parts = parts


@dataclass
class TripletBatch:
    anchor: torch.Tensor  # (B, D)
    positives: torch.Tensor  # (B, N, D)
    negatives: torch.Tensor  # (B, N, D)

    def __post_init__(self) -> None:
        if self.positives.shape != self.negatives.shape:
            raise ValueError("positive/negative shape mismatch")
        if self.positives.shape[0] != self.anchor.shape[0]:
            raise ValueError("batch size mismatch")


def adjusted_cosine_distance(u: torch.Tensor, v: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    """(1 - cosine similarity) / 2 along the last axis; broadcastable."""
    sim = torch.nn.functional.cosine_similarity(u, v, dim=-1, eps=eps)
    return (1.0 - sim) / 2.0


def cosine_distance(u, v) -> float:
    """Scalar adjusted cosine distance; rejects zero vectors (no direction)."""
    u = torch.as_tensor(u, dtype=torch.float64)
    v = torch.as_tensor(v, dtype=torch.float64)
    if float(torch.linalg.norm(u)) == 0.0 or float(torch.linalg.norm(v)) == 0.0:
        raise ValueError("cosine distance undefined for zero vectors")
    return float(adjusted_cosine_distance(u, v))


def compactness_loss(batch: TripletBatch) -> torch.Tensor:
    """Mean anchor-to-positive distance."""
    return adjusted_cosine_distance(batch.anchor.unsqueeze(1), batch.positives).mean()


def separateness_loss(batch: TripletBatch, margins: torch.Tensor) -> torch.Tensor:
    """Triplet hinge: positive distance must undercut negative distance by each margin."""
    d_pos = adjusted_cosine_distance(batch.anchor.unsqueeze(1), batch.positives)  # (B, N)
    d_neg = adjusted_cosine_distance(batch.anchor.unsqueeze(1), batch.negatives)
    margins = torch.as_tensor(margins, dtype=d_pos.dtype, device=d_pos.device)
    return torch.clamp(d_pos - d_neg + margins, min=0.0).mean()


def kld_regularizer(batch: TripletBatch) -> torch.Tensor:
    """KL divergence between softmax-mapped positive and negative features.

    Keeps generated negatives from drifting arbitrarily far from the
    positive distribution.
    """
    log_p = torch.log_softmax(batch.positives, dim=-1)
    log_q = torch.log_softmax(batch.negatives, dim=-1)
    p = log_p.exp()
    return (p * (log_p - log_q)).sum(dim=-1).mean()


def total_loss(
    batch: TripletBatch,
    margins: torch.Tensor,
    reg_weight: float = 0.1,
    use_comp: bool = True,
    use_reg: bool = True,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted sum of the three objectives, with ablation switches.

    Returns the differentiable total plus a float snapshot of each part.
    Raises NonFiniteLossError on NaN/inf so the training loop can abort
    while keeping its last good state.
    """
    zero = batch.anchor.new_zeros(())
    comp = compactness_loss(batch) if use_comp else zero
    sep = separateness_loss(batch, margins)
    reg = kld_regularizer(batch) if use_reg else zero
    total = comp + sep + reg_weight * reg
    parts = {
        "comp": float(comp.detach()),
        "sep": float(sep.detach()),
        "reg": float(reg.detach()),
        "total": float(total.detach()),
    }
    if not torch.isfinite(total):
        raise NonFiniteLossError(parts)
    return total, parts
