"""Two-stream residual encoders.

The video stream is a 3D ResNet (bottleneck blocks, 3-4-6-3 layout in the
full preset), the audio stream its 2D counterpart over MFCC images. Both
drop global pooling and the classifier and end in a 1x1 projection to a
common channel width ``d`` so the token sequences can attend to each other.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class StreamConfig:
    block: str  # "bottleneck" | "basic"
    layers: tuple[int, ...]
    widths: tuple[int, ...]
    strides: tuple[tuple[int, ...], ...]  # per stage; (t, h, w) for video, (h, w) for audio
    stem_kernel: tuple[int, ...]
    stem_stride: tuple[int, ...]
    stem_pool: tuple[int, ...] | None  # max-pool stride after the stem, kernel 3, padding 1

    def __post_init__(self) -> None:
        if self.block not in ("bottleneck", "basic"):
            raise ValueError(f"unknown block type {self.block!r}")
        if not (len(self.layers) == len(self.widths) == len(self.strides)):
            raise ValueError("layers, widths and strides must have one entry per stage")

    @property
    def expansion(self) -> int:
        return 4 if self.block == "bottleneck" else 1

    @property
    def out_channels(self) -> int:
        return self.widths[-1] * self.expansion


@dataclass(frozen=True)
class EncoderConfig:
    preset: str
    d: int
    video: StreamConfig
    audio: StreamConfig

    def __post_init__(self) -> None:
        if self.d <= 0:
            raise ValueError("d must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderConfig":
        def stream(s: dict) -> StreamConfig:
            return StreamConfig(
                block=s["block"],
                layers=tuple(s["layers"]),
                widths=tuple(s["widths"]),
                strides=tuple(tuple(x) for x in s["strides"]),
                stem_kernel=tuple(s["stem_kernel"]),
                stem_stride=tuple(s["stem_stride"]),
                stem_pool=tuple(s["stem_pool"]) if s["stem_pool"] is not None else None,
            )

        return cls(preset=data["preset"], d=int(data["d"]), video=stream(data["video"]), audio=stream(data["audio"]))


def full_preset(d: int = 512) -> EncoderConfig:
    # layer4 keeps temporal resolution: 30 frames -> 15 -> 8 -> 4
    return EncoderConfig(
        preset="full",
        d=d,
        video=StreamConfig(
            block="bottleneck",
            layers=(3, 4, 6, 3),
            widths=(64, 128, 256, 512),
            strides=((1, 1, 1), (2, 2, 2), (2, 2, 2), (1, 2, 2)),
            stem_kernel=(7, 7, 7),
            stem_stride=(1, 2, 2),
            stem_pool=(2, 2, 2),
        ),
        audio=StreamConfig(
            block="bottleneck",
            layers=(3, 4, 6, 3),
            widths=(64, 128, 256, 512),
            strides=((1, 1), (2, 2), (2, 2), (2, 2)),
            stem_kernel=(7, 7),
            stem_stride=(2, 2),
            stem_pool=(2, 2),
        ),
    )


def toy_preset(d: int = 32) -> EncoderConfig:
    return EncoderConfig(
        preset="toy",
        d=d,
        video=StreamConfig(
            block="basic",
            layers=(1, 1),
            widths=(16, 32),
            strides=((2, 2, 2), (2, 2, 2)),
            stem_kernel=(3, 3, 3),
            stem_stride=(1, 2, 2),
            stem_pool=None,
        ),
        audio=StreamConfig(
            block="basic",
            layers=(1, 1),
            widths=(16, 32),
            strides=((2, 2), (2, 2)),
            stem_kernel=(3, 3),
            stem_stride=(2, 2),
            stem_pool=None,
        ),
    )


PRESETS = {"full": full_preset, "toy": toy_preset}


def preset(name: str, d: int | None = None) -> EncoderConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory() if d is None else factory(d)


class _Ops:
    """Dimension-specific layer constructors."""

    def __init__(self, dims: int):
        self.dims = dims
        self.conv = nn.Conv3d if dims == 3 else nn.Conv2d
        self.bn = nn.BatchNorm3d if dims == 3 else nn.BatchNorm2d
        self.pool = nn.MaxPool3d if dims == 3 else nn.MaxPool2d

    def k(self, n: int) -> tuple[int, ...]:
        return (n,) * self.dims


class BasicBlock(nn.Module):
    expansion = 1

    def __init__(self, ops: _Ops, in_ch: int, width: int, stride: tuple[int, ...]):
        super().__init__()
        self.conv1 = ops.conv(in_ch, width, ops.k(3), stride=stride, padding=ops.k(1), bias=False)
        self.bn1 = ops.bn(width)
        self.conv2 = ops.conv(width, width, ops.k(3), padding=ops.k(1), bias=False)
        self.bn2 = ops.bn(width)
        self.relu = nn.ReLU(inplace=True)
        self.downsample = _shortcut(ops, in_ch, width, stride)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class Bottleneck(nn.Module):
    expansion = 4

    def __init__(self, ops: _Ops, in_ch: int, width: int, stride: tuple[int, ...]):
        super().__init__()
        out_ch = width * self.expansion
        self.conv1 = ops.conv(in_ch, width, ops.k(1), bias=False)
        self.bn1 = ops.bn(width)
        self.conv2 = ops.conv(width, width, ops.k(3), stride=stride, padding=ops.k(1), bias=False)
        self.bn2 = ops.bn(width)
        self.conv3 = ops.conv(width, out_ch, ops.k(1), bias=False)
        self.bn3 = ops.bn(out_ch)
        self.relu = nn.ReLU(inplace=True)
        self.downsample = _shortcut(ops, in_ch, out_ch, stride)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return self.relu(out + identity)


def _shortcut(ops: _Ops, in_ch: int, out_ch: int, stride: tuple[int, ...]) -> nn.Module | None:
    # projection shortcut whenever shape changes
    if in_ch == out_ch and all(s == 1 for s in stride):
        return None
    return nn.Sequential(ops.conv(in_ch, out_ch, ops.k(1), stride=stride, bias=False), ops.bn(out_ch))


class ResNetStream(nn.Module):
    """Headless residual network ending in a 1x1 projection to ``d`` channels."""

    def __init__(self, cfg: StreamConfig, d: int, dims: int, in_channels: int = 3):
        super().__init__()
        ops = _Ops(dims)
        self.dims = dims
        self.in_channels = in_channels
        stem_width = cfg.widths[0]
        pad = tuple(k // 2 for k in cfg.stem_kernel)
        stem = [
            ops.conv(in_channels, stem_width, cfg.stem_kernel, stride=cfg.stem_stride, padding=pad, bias=False),
            ops.bn(stem_width),
            nn.ReLU(inplace=True),
        ]
        if cfg.stem_pool is not None:
            stem.append(ops.pool(kernel_size=ops.k(3), stride=cfg.stem_pool, padding=ops.k(1)))
        self.stem = nn.Sequential(*stem)

        block = Bottleneck if cfg.block == "bottleneck" else BasicBlock
        in_ch = stem_width
        stages = []
        for n_blocks, width, stride in zip(cfg.layers, cfg.widths, cfg.strides):
            blocks = []
            for i in range(n_blocks):
                blocks.append(block(ops, in_ch, width, tuple(stride) if i == 0 else ops.k(1)))
                in_ch = width * block.expansion
            stages.append(nn.Sequential(*blocks))
        self.stages = nn.Sequential(*stages)
        self.proj = ops.conv(in_ch, d, ops.k(1))
        _init_weights(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.proj(self.stages(self.stem(x)))


def _init_weights(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Conv3d, nn.Linear)):
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm2d, nn.BatchNorm3d)):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


class VideoEncoder(nn.Module):
    """B x T x C x H x W frames -> B x T' x d x H' x W' features."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.net = ResNetStream(cfg.video, cfg.d, dims=3)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        if frames.ndim != 5 or frames.shape[2] != self.net.in_channels:
            raise ValueError(f"expected B x T x {self.net.in_channels} x H x W frames, got {tuple(frames.shape)}")
        out = self.net(frames.transpose(1, 2))  # conv3d wants B x C x T x H x W
        return out.transpose(1, 2)


class AudioEncoder(nn.Module):
    """B x 3 x H_a x W_a MFCC images -> B x d x H'_a x W'_a features."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.net = ResNetStream(cfg.audio, cfg.d, dims=2)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.ndim != 4 or images.shape[1] != self.net.in_channels:
            raise ValueError(f"expected B x {self.net.in_channels} x H x W images, got {tuple(images.shape)}")
        return self.net(images)


def encode_video(batch: torch.Tensor, encoder: VideoEncoder) -> torch.Tensor:
    return encoder(batch)


def encode_audio(batch: torch.Tensor, encoder: AudioEncoder) -> torch.Tensor:
    return encoder(batch)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
