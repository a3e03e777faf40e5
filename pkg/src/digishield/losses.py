"""Margin contrastive loss on (h_v, h_a) pairs, binary cross-entropy, and their unweighted sum.

Label convention: 1 = real, 0 = fake.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

EPS = 1e-7
DEFAULT_MARGIN = 1.0


@dataclass
class LossBatch:
    h_v: torch.Tensor  # N x d
    h_a: torch.Tensor  # N x d
    probs: torch.Tensor  # N
    labels: torch.Tensor  # N, values in {0, 1}
    margin: float = DEFAULT_MARGIN

    def __post_init__(self) -> None:
        self.h_v = torch.as_tensor(self.h_v)
        self.h_a = torch.as_tensor(self.h_a)
        self.probs = torch.as_tensor(self.probs)
        self.labels = torch.as_tensor(self.labels)
        n = self.labels.shape[0]
        if n == 0:
            raise ValueError("empty batch")
        if not (self.h_v.shape[0] == self.h_a.shape[0] == self.probs.shape[0] == n):
            raise ValueError("h_v, h_a, probs and labels must have equal length")
        if self.margin <= 0:
            raise ValueError("margin must be positive")


def _check_n(labels: torch.Tensor) -> None:
    if labels.numel() == 0:
        raise ValueError("empty batch")


def contrastive_loss(
    h_v: torch.Tensor, h_a: torch.Tensor, labels: torch.Tensor, margin: float = DEFAULT_MARGIN
) -> torch.Tensor:
    """mean( y * D^2 + (1 - y) * max(0, m - D)^2 ), D the Euclidean distance."""
    _check_n(labels)
    y = labels.to(h_v.dtype)
    sq = (h_v - h_a).pow(2).sum(dim=-1)
    # sqrt is only needed on the hinge side; keep its gradient finite at D = 0
    dist = torch.sqrt(sq.clamp_min(torch.finfo(sq.dtype).tiny))
    hinge = torch.clamp(margin - dist, min=0.0).pow(2)
    return (y * sq + (1 - y) * hinge).mean()


def cross_entropy_loss(probs: torch.Tensor, labels: torch.Tensor, eps: float = EPS) -> torch.Tensor:
    _check_n(labels)
    y = labels.to(probs.dtype)
    p = probs.clamp(eps, 1 - eps)
    return -(y * torch.log(p) + (1 - y) * torch.log1p(-p)).mean()


def total_loss(batch: LossBatch) -> torch.Tensor:
    return contrastive_loss(batch.h_v, batch.h_a, batch.labels, batch.margin) + cross_entropy_loss(
        batch.probs, batch.labels
    )
