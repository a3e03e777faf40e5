"""Decision layer: pooled embeddings, channel concatenation, Down blocks and a single logit."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn


@dataclass(frozen=True)
class HeadConfig:
    in_dim: int  # 2d for two streams, d for the video-only ablation
    down: int = 2  # number of halving affine+activation blocks
    activation: str = "relu"

    def widths(self) -> list[int]:
        w = [self.in_dim]
        for _ in range(self.down):
            w.append(max(1, w[-1] // 2))
        return w


_ACTIVATIONS = {"relu": nn.ReLU, "gelu": nn.GELU, "tanh": nn.Tanh}


def pool_tokens(tokens: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    """Mean over the token axis followed by L2 normalization."""
    if tokens.shape[-2] == 0:
        raise ValueError("cannot pool an empty token sequence")
    return F.normalize(tokens.mean(dim=-2), dim=-1, eps=eps)


def pool_embeddings(phi: torch.Tensor, fa: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(h_v, h_a) from the fused visual tokens and the audio tokens."""
    h_v, h_a = pool_tokens(phi), pool_tokens(fa)
    if h_v.shape[-1] != h_a.shape[-1]:
        raise ValueError(f"embedding dims differ: {h_v.shape[-1]} vs {h_a.shape[-1]}")
    return h_v, h_a


class DecisionHead(nn.Module):
    def __init__(self, cfg: HeadConfig):
        super().__init__()
        self.cfg = cfg
        act = _ACTIVATIONS[cfg.activation]
        widths = cfg.widths()
        self.down = nn.Sequential(*[nn.Sequential(nn.Linear(a, b), act()) for a, b in zip(widths, widths[1:])])
        self.fc = nn.Linear(widths[-1], 1)

    def logit(self, features: torch.Tensor) -> torch.Tensor:
        if features.shape[-1] != self.cfg.in_dim:
            raise ValueError(f"head expects {self.cfg.in_dim} features, got {features.shape[-1]}")
        return self.fc(self.down(features)).squeeze(-1)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logit(features))


def classify(h_v: torch.Tensor, h_a: torch.Tensor | None, head: DecisionHead) -> torch.Tensor:
    """Probability that the clip is real. ``h_a`` is None for the video-only model."""
    x = h_v if h_a is None else torch.cat([h_v, h_a], dim=-1)
    return head(x)
