"""Joint optimization of the feature extractor and the mask generators."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch

from .augmentation import NeighborhoodSampler, generate_negatives, mask_min_distance
from .config import AugmentationConfig, TrainingConfig
from .losses import NonFiniteLossError, TripletBatch, total_loss
from .preprocessing import window_starts


@dataclass
class EpochStats:
    epoch: int
    comp: float
    sep: float
    reg: float
    total: float
    mask_min_distance: float


@dataclass
class TrainResult:
    history: list[EpochStats] = field(default_factory=list)
    margins: np.ndarray = field(default_factory=lambda: np.zeros(0))
    aborted: bool = False
    abort_reason: str = ""

    @property
    def epochs_run(self) -> int:
        return len(self.history)


def draw_margins(count: int, low: float, high: float, rng: np.random.Generator) -> np.ndarray:
    """Per-generator triplet margins, drawn once at initialization and then fixed."""
    return rng.uniform(low, high, size=count)


def fit(
    train_series: np.ndarray,
    extractor: torch.nn.Module,
    generators: torch.nn.ModuleList,
    train_cfg: TrainingConfig,
    aug_cfg: AugmentationConfig,
    window: int,
    stride: int,
    seed: int = 0,
) -> TrainResult:
    """Run the contrastive training loop over sliding-window anchors.

    Each epoch shuffles the anchors and, per mini-batch, draws fresh positive
    windows from the stationary neighborhood, generates masked negatives from
    the anchors, and takes one ADAM step on the joint objective over both the
    extractor and generator parameters.  A non-finite loss aborts the run and
    rolls parameters back to the end of the previous epoch.
    """
    rng = np.random.default_rng(seed)
    margins = draw_margins(aug_cfg.num_samples, train_cfg.margin_low, train_cfg.margin_high, rng)
    dtype = next(extractor.parameters()).dtype
    margins_t = torch.as_tensor(margins, dtype=dtype)

    sampler = NeighborhoodSampler(
        train_series, window, aug_cfg.adf_pvalue, aug_cfg.eta_max, aug_cfg.sigma_floor
    )
    starts = window_starts(len(train_series), window, stride)
    series_t = torch.as_tensor(np.ascontiguousarray(train_series), dtype=dtype)
    probe = series_t[starts[0] : starts[0] + window].unsqueeze(0)

    params = list(extractor.parameters()) + list(generators.parameters())
    optimizer = torch.optim.Adam(params, lr=train_cfg.learning_rate)

    result = TrainResult(margins=margins)
    last_good = _snapshot(extractor, generators)
    n = aug_cfg.num_samples

    for epoch in range(1, train_cfg.max_epoch + 1):
        order = rng.permutation(len(starts))
        sums = {"comp": 0.0, "sep": 0.0, "reg": 0.0, "total": 0.0}
        seen = 0
        try:
            for lo in range(0, len(order), train_cfg.batch_size):
                batch_starts = starts[order[lo : lo + train_cfg.batch_size]]
                b = len(batch_starts)
                anchors = torch.stack([series_t[s : s + window] for s in batch_starts])
                positives = np.stack([sampler.positives(int(s), n, rng) for s in batch_starts])
                positives_t = torch.as_tensor(positives, dtype=dtype)

                z = extractor(anchors)
                z_pos = extractor(positives_t.reshape(b * n, window, -1)).reshape(b, n, -1)
                negatives = generate_negatives(anchors, generators)
                z_neg = extractor(negatives.reshape(b * n, window, -1)).reshape(b, n, -1)

                loss, parts = total_loss(
                    TripletBatch(z, z_pos, z_neg),
                    margins_t,
                    train_cfg.reg_weight,
                    use_comp=train_cfg.use_comp,
                    use_reg=train_cfg.use_reg,
                )
                optimizer.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(params, train_cfg.grad_clip)
                optimizer.step()

                for key in sums:
                    sums[key] += parts[key] * b
                seen += b
        except NonFiniteLossError as err:
            _restore(extractor, generators, last_good)
            result.aborted = True
            result.abort_reason = str(err)
            return result

        result.history.append(
            EpochStats(
                epoch=epoch,
                comp=sums["comp"] / seen,
                sep=sums["sep"] / seen,
                reg=sums["reg"] / seen,
                total=sums["total"] / seen,
                mask_min_distance=mask_min_distance(probe, generators),
            )
        )
        last_good = _snapshot(extractor, generators)
    return result


def _snapshot(extractor, generators):
    return (
        copy.deepcopy(extractor.state_dict()),
        copy.deepcopy(generators.state_dict()),
    )


def _restore(extractor, generators, snapshot) -> None:
    extractor.load_state_dict(snapshot[0])
    generators.load_state_dict(snapshot[1])
