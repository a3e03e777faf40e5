"""The full detector and its ablation variants."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .encoders import AudioEncoder, EncoderConfig, VideoEncoder
from .fusion import AttentionParams, cross_attention, flatten_audio, flatten_video, self_attention
from .head import DecisionHead, HeadConfig, pool_embeddings, pool_tokens

CE_ONLY = "ce_only_single_stream"
CROSS = "cross_attention"
FULL = "cross_plus_self"
ABLATIONS = (CE_ONLY, CROSS, FULL)

# Reference AUCs (%) for the three variants, kept as expected-ordering metadata.
REFERENCE_ABLATION_AUC = {CE_ONLY: 73.6, CROSS: 77.4, FULL: 80.1}


@dataclass
class ModelOutput:
    logit: torch.Tensor
    prob: torch.Tensor
    h_v: torch.Tensor
    h_a: torch.Tensor | None


class DigiShield(nn.Module):
    """Two-stream audio-visual detector.

    ``ce_only_single_stream`` builds no audio encoder and no attention: the
    pooled video tokens go straight to the head. ``cross_attention`` and
    ``cross_plus_self`` fuse the streams and feed the contrastive loss.
    """

    def __init__(self, enc: EncoderConfig, ablation: str = FULL, head_down: int = 2, activation: str = "relu"):
        super().__init__()
        if ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {ablation!r}; choose from {ABLATIONS}")
        self.enc_config = enc
        self.ablation = ablation
        self.video_encoder = VideoEncoder(enc)
        if ablation == CE_ONLY:
            self.audio_encoder = None
            self.attention = None
            in_dim = enc.d
        else:
            self.audio_encoder = AudioEncoder(enc)
            self.attention = AttentionParams(enc.d, enc.d, self_attention=ablation == FULL)
            in_dim = 2 * enc.d
        self.head = DecisionHead(HeadConfig(in_dim=in_dim, down=head_down, activation=activation))

    @property
    def two_stream(self) -> bool:
        return self.audio_encoder is not None

    def forward(self, frames: torch.Tensor, mfcc: torch.Tensor | None = None) -> ModelOutput:
        fv = flatten_video(self.video_encoder(frames))
        if not self.two_stream:
            h_v = pool_tokens(fv)
            h_a = None
            logit = self.head.logit(h_v)
        else:
            if mfcc is None:
                raise ValueError("two-stream model needs MFCC input")
            fa = flatten_audio(self.audio_encoder(mfcc))
            fused = cross_attention(fv, fa, self.attention)
            if self.attention.has_self_attention:
                fused = self_attention(fused, self.attention)
            h_v, h_a = pool_embeddings(fused, fa)
            logit = self.head.logit(torch.cat([h_v, h_a], dim=-1))
        return ModelOutput(logit=logit, prob=torch.sigmoid(logit), h_v=h_v, h_a=h_a)
