"""Turn manifest clips into cached (FrameStack, MfccImage) windows."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..manifest import ClipRecord, load_manifest
from . import cache
from .audio import MfccConfig, mfcc_image, resample_audio, AudioWave
from .frames import FaceDetector, FullFrameDetector, PreprocessError, detect_and_crop, sample_frames, segment_boundaries
from .media import decode_audio, decode_video

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreprocessConfig:
    frames: int = 30
    side: int = 224
    margin: float = 1.5
    segment: bool = False  # split long clips into 3-5 s windows
    mfcc: MfccConfig = field(default_factory=MfccConfig)


def clip_windows(duration_s: float, segment: bool) -> list[tuple[float, float]]:
    windows = segment_boundaries(duration_s) if segment else []
    return windows or [(0.0, duration_s)]


def _resolve(path: str, base: Path | None) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base is None else base / p


def preprocess_clip(
    rec: ClipRecord, cfg: PreprocessConfig, detector: FaceDetector | None = None, base: Path | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Cache arrays for one clip. Relative media paths are resolved against ``base``."""
    detector = detector or FullFrameDetector()
    video = decode_video(_resolve(rec.video_path, base), rec.width, rec.height)
    wave = resample_audio(decode_audio(_resolve(rec.audio_path, base)))
    duration = len(video) / rec.fps

    stacks, images = [], []
    for start, end in clip_windows(duration, cfg.segment):
        f0 = int(math.floor(start * rec.fps))
        f1 = min(len(video), int(math.ceil(end * rec.fps)))
        window = video[f0:f1]
        idx = sample_frames(window, cfg.frames)
        stacks.append(detect_and_crop(window, idx, detector, cfg.side, cfg.margin).data)

        a0 = int(round(start * wave.rate))
        a1 = min(len(wave.samples), int(round(end * wave.rate)))
        images.append(mfcc_image(AudioWave(wave.samples[a0:a1], wave.rate), cfg.mfcc).data)
    return np.stack(stacks), np.stack(images)


def _work(args) -> str:
    rec, cfg, out_dir, base = args
    frames, mfcc = preprocess_clip(rec, cfg, base=base)
    cache.write_clip(cache.cache_path(out_dir, rec.clip_id), frames, mfcc)
    return rec.clip_id


def preprocess_manifest(
    manifest: str | Path,
    out_dir: str | Path,
    cfg: PreprocessConfig = PreprocessConfig(),
    jobs: int = 1,
    force: bool = False,
) -> list[Path]:
    """Write one cache file per clip. Refuses to touch existing files unless ``force``."""
    records = load_manifest(manifest)
    out_dir = Path(out_dir)
    targets = [cache.cache_path(out_dir, r.clip_id) for r in records]
    existing = [p for p in targets if p.exists()]
    if existing and not force:
        raise FileExistsError(f"{len(existing)} cache files already exist in {out_dir} (use --force)")
    out_dir.mkdir(parents=True, exist_ok=True)
    base = Path(manifest).parent
    tasks = [(r, cfg, out_dir, base) for r in records]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for clip_id in pool.map(_work, tasks):
                log.debug("cached %s", clip_id)
    else:
        for t in tasks:
            _work(t)
    return targets


__all__ = ["PreprocessConfig", "PreprocessError", "preprocess_clip", "preprocess_manifest", "clip_windows"]
