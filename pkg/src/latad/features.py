"""Latent feature extractor.

A window (w, d) flows through a depthwise 1-D convolution, then in parallel
through complete-graph attention over feature columns and a transformer
encoder over time; the three (w, d) maps are concatenated and fused by a
causal dilated convolution stack whose final timestep is the latent vector.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .config import ExtractorSettings


def _fan_in_uniform_(module: nn.Module) -> None:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, on every conv/linear."""
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.Conv1d)):
            fan_in = m.weight.shape[1] * (m.weight.shape[2] if m.weight.dim() == 3 else 1)
            bound = 1.0 / math.sqrt(max(1, fan_in))
            nn.init.uniform_(m.weight, -bound, bound)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


class LocalConv(nn.Module):
    """Depthwise temporal convolution (same padding) + ReLU; shape preserved.

    The bias starts slightly positive: with nonnegative normalized inputs a
    zero-bias channel whose weights sum negative would begin with its ReLU
    permanently flat, making that feature invisible to every downstream
    branch and to gradient attribution, with no gradient to recover.
    """

    BIAS_INIT = 0.1

    def __init__(self, features: int, kernel: int):
        super().__init__()
        if kernel % 2 == 0:
            raise ValueError("kernel must be odd for same-length padding")
        self.conv = nn.Conv1d(features, features, kernel, padding=kernel // 2, groups=features)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 3:
            raise ValueError("expected (batch, window, features)")
        return F.relu(self.conv(x.transpose(1, 2))).transpose(1, 2)


class FeatureGraphAttention(nn.Module):
    """Attention over feature columns of a complete sensor graph.

    Each column (one feature across the window) is a vertex.  Pair score
    e_ij = LeakyReLU(a . [v_i || v_j]) with a single learnable vector a of
    length 2w; rows of the softmaxed score matrix mix the columns, followed
    by a sigmoid.
    """

    def __init__(self, window: int, slope: float = 0.2):
        super().__init__()
        self.attention_vector = nn.Parameter(torch.empty(2 * window))
        self.slope = slope
        bound = 1.0 / math.sqrt(2 * window)
        nn.init.uniform_(self.attention_vector, -bound, bound)

    def attention(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[2] < 1:
            raise ValueError("need at least one feature column")
        w = x.shape[1]
        v = x.transpose(1, 2)  # (B, d, w)
        left = v @ self.attention_vector[:w]  # (B, d)
        right = v @ self.attention_vector[w:]
        scores = F.leaky_relu(left.unsqueeze(2) + right.unsqueeze(1), self.slope)
        return torch.softmax(scores, dim=2)  # (B, d, d), rows over neighbors

    def forward(self, x: torch.Tensor, return_attention: bool = False):
        alpha = self.attention(x)
        mixed = torch.sigmoid(alpha @ x.transpose(1, 2))  # (B, d, w)
        out = mixed.transpose(1, 2)
        return (out, alpha) if return_attention else out


class SelfAttention(nn.Module):
    """Multi-head scaled dot-product self-attention."""

    def __init__(self, d_model: int, heads: int):
        super().__init__()
        if d_model % heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = d_model // heads
        self.query = nn.Linear(d_model, d_model)
        self.key = nn.Linear(d_model, d_model)
        self.value = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor, return_attention: bool = False):
        b, w, _ = x.shape

        def split(t: torch.Tensor) -> torch.Tensor:
            return t.view(b, w, self.heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.query(x)), split(self.key(x)), split(self.value(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        weights = torch.softmax(scores, dim=-1)  # (B, H, w, w)
        mixed = (weights @ v).transpose(1, 2).reshape(b, w, -1)
        out = self.out(mixed)
        return (out, weights) if return_attention else out


class EncoderLayer(nn.Module):
    """Self-attention and pointwise feed-forward sublayers, each with residual + layer norm."""

    def __init__(self, d_model: int, heads: int, ff_dim: int):
        super().__init__()
        self.attn = SelfAttention(d_model, heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(nn.Linear(d_model, ff_dim), nn.ReLU(), nn.Linear(ff_dim, d_model))
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, x: torch.Tensor, return_attention: bool = False):
        attended, weights = self.attn(x, return_attention=True)
        x = self.norm1(x + attended)
        x = self.norm2(x + self.ff(x))
        return (x, weights) if return_attention else x


def sinusoidal_encoding(length: int, d_model: int) -> torch.Tensor:
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float64) * (-math.log(10000.0) / d_model))
    pe = torch.zeros(length, d_model, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(position * div)
    pe[:, 1::2] = torch.cos(position * div[: d_model // 2])
    return pe.to(torch.get_default_dtype())


class TemporalEncoder(nn.Module):
    """Embed rows to d_model, add fixed sinusoidal positions, encode, project back to d."""

    def __init__(self, features: int, window: int, d_model: int, heads: int, layers: int):
        super().__init__()
        self.embed = nn.Linear(features, d_model)
        self.register_buffer("positions", sinusoidal_encoding(window, d_model))
        self.layers = nn.ModuleList(EncoderLayer(d_model, heads, 4 * d_model) for _ in range(layers))
        self.project = nn.Linear(d_model, features)

    def forward(self, x: torch.Tensor, return_attention: bool = False):
        u = self.embed(x) + self.positions[: x.shape[1]].to(x.dtype)
        maps = []
        for layer in self.layers:
            u, weights = layer(u, return_attention=True)
            maps.append(weights)
        out = self.project(u)
        return (out, maps) if return_attention else out


class CausalConvFusion(nn.Module):
    """Stack of causal dilated convolutions with residual skips; dilation doubles per level.

    The last timestep of the final level is the fused latent vector.
    """

    def __init__(self, in_channels: int, d_model: int, levels: int, kernel: int = 3):
        super().__init__()
        self.kernel = kernel
        convs, skips = [], []
        channels = in_channels
        for level in range(levels):
            convs.append(nn.Conv1d(channels, d_model, kernel, dilation=2**level))
            skips.append(nn.Conv1d(channels, d_model, 1) if channels != d_model else nn.Identity())
            channels = d_model
        self.convs = nn.ModuleList(convs)
        self.skips = nn.ModuleList(skips)

    def hidden(self, h: torch.Tensor) -> torch.Tensor:
        """Full (B, d_model, w) activation map of the last level.

        The last level stays linear so latent vectors keep full-sphere
        directions (a rectified final layer can collapse unusual inputs to
        the exact zero vector, which has no cosine direction).
        """
        x = h.transpose(1, 2)
        last = len(self.convs) - 1
        for level, (conv, skip) in enumerate(zip(self.convs, self.skips)):
            pad = (self.kernel - 1) * 2**level
            out = conv(F.pad(x, (pad, 0))) + skip(x)
            x = out if level == last else F.relu(out)
        return x

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        return self.hidden(h)[:, :, -1]


class FeatureExtractor(nn.Module):
    """Composed extractor mapping a (batch, window, features) tensor to latent vectors.

    Ablation switches drop the graph-attention or temporal branch from the
    fused representation, or swap the causal fusion for a pointwise linear
    readout of the final timestep.
    """

    def __init__(
        self,
        features: int,
        window: int,
        settings: ExtractorSettings,
        use_gat: bool = True,
        use_transformer: bool = True,
        use_tcn: bool = True,
    ):
        super().__init__()
        self.features = features
        self.window = window
        self.settings = settings
        self.use_gat = use_gat
        self.use_transformer = use_transformer
        self.use_tcn = use_tcn

        self.conv = LocalConv(features, settings.conv_kernel)
        self.gat = FeatureGraphAttention(window, settings.leaky_slope) if use_gat else None
        self.temporal = (
            TemporalEncoder(
                features, window, settings.d_model, settings.transformer_heads, settings.transformer_layers
            )
            if use_transformer
            else None
        )
        branches = 1 + int(use_gat) + int(use_transformer)
        if use_tcn:
            self.fusion = CausalConvFusion(
                branches * features, settings.d_model, settings.tcn_levels, settings.tcn_kernel
            )
        else:
            self.fusion = nn.Linear(branches * features, settings.d_model)

    @property
    def disabled_modules(self) -> list[str]:
        out = []
        if not self.use_gat:
            out.append("gat")
        if not self.use_transformer:
            out.append("transformer")
        if not self.use_tcn:
            out.append("tcn")
        return out

    def _branches(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 3 or x.shape[1] != self.window or x.shape[2] != self.features:
            raise ValueError(
                f"expected (batch, {self.window}, {self.features}), got {tuple(x.shape)}"
            )
        local = self.conv(x)
        parts = [local]
        if self.gat is not None:
            parts.append(self.gat(local))
        if self.temporal is not None:
            parts.append(self.temporal(local))
        return torch.cat(parts, dim=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self._branches(x)
        if self.use_tcn:
            return self.fusion(h)
        return self.fusion(h[:, -1, :])

    def attention_maps(self, x: torch.Tensor) -> dict:
        """Attention matrices for diagnostics: GAT rows and per-layer transformer heads."""
        local = self.conv(x)
        out: dict = {}
        if self.gat is not None:
            out["gat"] = self.gat.attention(local)
        if self.temporal is not None:
            _, maps = self.temporal(local, return_attention=True)
            out["transformer"] = maps
        return out


def build_extractor(
    features: int,
    window: int,
    settings: ExtractorSettings,
    seed: int = 0,
    use_gat: bool = True,
    use_transformer: bool = True,
    use_tcn: bool = True,
) -> FeatureExtractor:
    """Deterministically initialized extractor (fan-in uniform weights, zero biases)."""
    torch.manual_seed(seed)
    model = FeatureExtractor(features, window, settings, use_gat, use_transformer, use_tcn)
    _fan_in_uniform_(model)
    nn.init.constant_(model.conv.conv.bias, LocalConv.BIAS_INIT)
    return model
