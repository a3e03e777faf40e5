"""Video-side preprocessing: clip segmentation, frame sampling, face crops and augmentation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import torch
import torch.nn.functional as F


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class FrameStack:
    """T x C x H x W float32 frames with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 4 or self.data.shape[1] != 3:
            raise PreprocessError(f"FrameStack must be T x 3 x H x W, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise PreprocessError("FrameStack contains non-finite values")

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def C(self) -> int:
        return self.data.shape[1]

    @property
    def H(self) -> int:
        return self.data.shape[2]

    @property
    def W(self) -> int:
        return self.data.shape[3]


@dataclass(frozen=True)
class FaceBox:
    """Detected face. ``x``/``y`` are the box *center*, ``w``/``h`` its extent, all in pixels."""

    frame_index: int
    x: float
    y: float
    w: float
    h: float
    confidence: float = 1.0

    def within(self, width: int, height: int) -> bool:
        return (
            self.x - self.w / 2 >= 0
            and self.y - self.h / 2 >= 0
            and self.x + self.w / 2 <= width
            and self.y + self.h / 2 <= height
        )


class FaceDetector(Protocol):
    def __call__(self, frame: np.ndarray, frame_index: int = 0) -> list[FaceBox]: ...


class FullFrameDetector:
    """Fallback detector that reports the whole frame as the face region."""

    threshold = 0.0

    def __call__(self, frame: np.ndarray, frame_index: int = 0) -> list[FaceBox]:
        h, w = frame.shape[:2]
        return [FaceBox(frame_index, w / 2, h / 2, w, h, 1.0)]


def segment_boundaries(duration_s: float, min_s: float = 3.0, max_s: float = 5.0) -> list[tuple[float, float]]:
    """Greedy cut into ``max_s`` pieces; a trailing remainder survives only if it is at least ``min_s`` long."""
    if duration_s < 0:
        raise PreprocessError("duration must be non-negative")
    if not 0 < min_s <= max_s:
        raise PreprocessError("need 0 < min_s <= max_s")
    out = []
    start = 0.0
    # tolerance keeps e.g. 15.0000000001 from spawning a sliver segment
    eps = 1e-9
    while duration_s - start >= max_s - eps:
        out.append((start, start + max_s))
        start += max_s
    if duration_s - start >= min_s - eps and duration_s - start > eps:
        out.append((start, float(duration_s)))
    return out


def sample_frames(decoded_frames: Sequence, t_target: int = 30) -> list[int]:
    n = len(decoded_frames)
    if n == 0:
        raise PreprocessError("cannot sample from an empty frame list")
    if t_target <= 0:
        raise PreprocessError("t_target must be positive")
    if n < t_target:
        return list(range(n)) + [n - 1] * (t_target - n)
    return [(i * n) // t_target for i in range(t_target)]


def _resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of an H x W x C float array."""
    t = torch.from_numpy(np.ascontiguousarray(img, dtype=np.float32)).permute(2, 0, 1)[None]
    out = F.interpolate(t, size=(out_h, out_w), mode="bilinear", align_corners=False)
    return out[0].permute(1, 2, 0).numpy()


def crop_window(box: FaceBox, width: int, height: int, margin: float = 1.5) -> tuple[int, int, int, int]:
    """Pixel window (x0, y0, x1, y1) of the square crop, after clipping to the frame."""
    side = max(box.w, box.h) * margin
    x0 = int(round(box.x - side / 2))
    y0 = int(round(box.y - side / 2))
    x1 = int(round(box.x + side / 2))
    y1 = int(round(box.y + side / 2))
    return max(x0, 0), max(y0, 0), min(x1, width), min(y1, height)


def crop_face(frame: np.ndarray, box: FaceBox, side: int = 224, margin: float = 1.5) -> np.ndarray:
    """Square crop around ``box`` expanded by ``margin``, resized to ``side`` x ``side``.

    ``frame`` is H x W x 3 (uint8 or float in [0, 1]); the result is float32 in [0, 1].
    """
    if box.w <= 0 or box.h <= 0:
        raise PreprocessError(f"degenerate face box {box}")
    h, w = frame.shape[:2]
    if not box.within(w, h):
        raise PreprocessError(f"face box {box} lies outside the {w}x{h} frame")
    img = frame.astype(np.float32) / 255.0 if frame.dtype == np.uint8 else frame.astype(np.float32)
    x0, y0, x1, y1 = crop_window(box, w, h, margin)
    crop = img[y0:y1, x0:x1]
    if crop.shape[:2] != (side, side):
        crop = _resize(crop, side, side)
    return np.clip(crop, 0.0, 1.0)


def detect_and_crop(
    frames: np.ndarray, indices: Sequence[int], detector: FaceDetector, side: int, margin: float = 1.5
) -> FrameStack:
    """Crop the sampled frames; frames without a detection reuse the previous box."""
    out = []
    last: FaceBox | None = None
    threshold = getattr(detector, "threshold", 0.0)
    for idx in indices:
        frame = frames[idx]
        boxes = [b for b in detector(frame, idx) if b.confidence >= threshold]
        if boxes:
            last = max(boxes, key=lambda b: b.confidence)
        box = last or FullFrameDetector()(frame, idx)[0]
        out.append(crop_face(frame, box, side, margin).transpose(2, 0, 1))
    return FrameStack(np.stack(out).astype(np.float32))


@dataclass(frozen=True)
class AugmentParams:
    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    crop_scale: float = 0.9  # side fraction of the random crop; 1.0 disables cropping
    crop_size: tuple[int, int] | None = None  # explicit (h, w) overrides crop_scale


def color_jitter(data: np.ndarray, brightness: float = 1.0, contrast: float = 1.0, saturation: float = 1.0) -> np.ndarray:
    """Apply fixed jitter factors to a T x 3 x H x W array."""
    x = data.astype(np.float32)
    if brightness != 1.0:
        x = x * brightness
    if contrast != 1.0:
        gray = _gray(x)
        mean = gray.mean(axis=(-2, -1), keepdims=True)[:, None]
        x = (x - mean) * contrast + mean
    if saturation != 1.0:
        gray = _gray(x)[:, None]
        x = (x - gray) * saturation + gray
    return np.clip(x, 0.0, 1.0)


def _gray(x: np.ndarray) -> np.ndarray:
    return 0.299 * x[:, 0] + 0.587 * x[:, 1] + 0.114 * x[:, 2]


def augment(stack: FrameStack, seed: int, params: AugmentParams = AugmentParams()) -> FrameStack:
    """Color jitter plus one random crop, shared by every frame of the stack.

    The crop is resized back to the input resolution so model input shapes
    never change.
    """
    rng = np.random.default_rng(seed)
    T, C, H, W = stack.data.shape
    if params.crop_size is not None:
        ch, cw = params.crop_size
    else:
        ch, cw = max(1, int(math.floor(H * params.crop_scale))), max(1, int(math.floor(W * params.crop_scale)))
    if ch > H or cw > W:
        raise PreprocessError(f"crop {ch}x{cw} larger than frame {H}x{W}")

    def factor(r: float) -> float:
        return float(rng.uniform(1 - r, 1 + r)) if r > 0 else 1.0

    b, c, s = factor(params.brightness), factor(params.contrast), factor(params.saturation)
    y0 = int(rng.integers(0, H - ch + 1))
    x0 = int(rng.integers(0, W - cw + 1))

    x = color_jitter(stack.data, b, c, s)
    if (ch, cw) != (H, W):
        x = x[:, :, y0 : y0 + ch, x0 : x0 + cw]
        t = F.interpolate(torch.from_numpy(np.ascontiguousarray(x)), size=(H, W), mode="bilinear", align_corners=False)
        x = np.clip(t.numpy(), 0.0, 1.0)
    return FrameStack(x.astype(np.float32))
