"""Token flattening and single-head cross/self attention.

Video tokens are the queries, audio tokens the keys and values. No positional
encodings are added, so cross attention is invariant to the order of audio
tokens and equivariant in the order of video tokens.
"""

from __future__ import annotations

import math

import torch
from torch import nn


def flatten_video(f: torch.Tensor) -> torch.Tensor:
    """(..., T', d, H', W') -> (..., T'*H'*W', d), tokens ordered by (t, h, w)."""
    *lead, t, d, h, w = f.shape
    return f.movedim(-3, -1).reshape(*lead, t * h * w, d)


def unflatten_video(tokens: torch.Tensor, t: int, h: int, w: int) -> torch.Tensor:
    *lead, n, d = tokens.shape
    if n != t * h * w:
        raise ValueError(f"{n} tokens cannot be reshaped to {t}x{h}x{w}")
    return tokens.reshape(*lead, t, h, w, d).movedim(-1, -3)


def flatten_audio(f: torch.Tensor) -> torch.Tensor:
    """(..., d, H', W') -> (..., H'*W', d), tokens ordered by (h, w)."""
    *lead, d, h, w = f.shape
    return f.movedim(-3, -1).reshape(*lead, h * w, d)


def unflatten_audio(tokens: torch.Tensor, h: int, w: int) -> torch.Tensor:
    *lead, n, d = tokens.shape
    if n != h * w:
        raise ValueError(f"{n} tokens cannot be reshaped to {h}x{w}")
    return tokens.reshape(*lead, h, w, d).movedim(-1, -3)


def stable_softmax(logits: torch.Tensor) -> torch.Tensor:
    z = logits - logits.amax(dim=-1, keepdim=True)
    e = torch.exp(z)
    return e / e.sum(dim=-1, keepdim=True)


def attend(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, d_k: int) -> tuple[torch.Tensor, torch.Tensor]:
    weights = stable_softmax(q @ k.transpose(-2, -1) / math.sqrt(d_k))
    return weights @ v, weights


class AttentionParams(nn.Module):
    """Projection matrices for cross attention and (optionally) self attention.

    Matrices are stored the way they are applied, ``x @ W``: cross projections
    are d x d_k, self projections d_k x d_k.
    """

    def __init__(self, d: int, d_k: int | None = None, self_attention: bool = True):
        super().__init__()
        d_k = d if d_k is None else d_k
        if d <= 0 or d_k <= 0:
            raise ValueError("d and d_k must be positive")
        self.d, self.d_k = d, d_k

        def mat(rows: int) -> nn.Parameter:
            return nn.Parameter(torch.randn(rows, d_k) / math.sqrt(rows))

        self.w_q, self.w_k, self.w_v = mat(d), mat(d), mat(d)
        if self_attention:
            self.w_q_self, self.w_k_self, self.w_v_self = mat(d_k), mat(d_k), mat(d_k)
        else:
            self.w_q_self = self.w_k_self = self.w_v_self = None

    @property
    def has_self_attention(self) -> bool:
        return self.w_q_self is not None


def cross_attention(
    fv: torch.Tensor, fa: torch.Tensor, p: AttentionParams, return_weights: bool = False
):
    """Video tokens (..., N_v, d) attend to audio tokens (..., N_a, d); returns (..., N_v, d_k)."""
    if fv.shape[-1] != p.d or fa.shape[-1] != p.d:
        raise ValueError(f"token dim mismatch: video {fv.shape[-1]}, audio {fa.shape[-1]}, params {p.d}")
    if fa.shape[-2] == 0:
        raise ValueError("audio token sequence is empty")
    psi, weights = attend(fv @ p.w_q, fa @ p.w_k, fa @ p.w_v, p.d_k)
    return (psi, weights) if return_weights else psi


def self_attention(psi: torch.Tensor, p: AttentionParams, return_weights: bool = False):
    """Self attention over the cross-attended sequence (..., N_v, d_k)."""
    if not p.has_self_attention:
        raise ValueError("these AttentionParams were built without self-attention matrices")
    if psi.shape[-1] != p.d_k:
        raise ValueError(f"expected token dim {p.d_k}, got {psi.shape[-1]}")
    phi, weights = attend(psi @ p.w_q_self, psi @ p.w_k_self, psi @ p.w_v_self, p.d_k)
    return (phi, weights) if return_weights else phi
