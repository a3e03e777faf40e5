"""Toy audio-video corpus whose only real/fake cue is audio-visual synchrony.

The loudness envelope is a chain of syllables cycling through rise, fall and
pause. The audio is an identity-pitched voice modulated by that envelope; the
video shows an identity-colored face patch whose brightness follows it. Each
real clip has a fake twin with the same audio track whose video runs
``desync_frames`` frames ahead, so neither stream alone tells the twins apart.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .avpreproc.audio import MfccConfig, AudioWave
from .avpreproc.media import write_wav
from .avpreproc.pipeline import PreprocessConfig, preprocess_manifest
from .manifest import Category, ClipRecord, make_splits, write_manifest

SPEC_FILE = "toy_spec.json"


@dataclass(frozen=True)
class ToySpec:
    n_clips: int = 200
    frames: int = 8
    side: int = 32
    audio_seconds: float = 1.0
    rate: int = 16000
    desync_frames: int = 8
    noise: float = 0.05
    seed: int = 0
    n_identities: int = 10
    audio_width: int = 16  # W_a of the cached MFCC images
    audio_noise: float = 0.001  # absolute noise floor of the audio track
    syllable_frames: int = 0  # 0 = frames // 2

    def __post_init__(self) -> None:
        if self.desync_frames < 1:
            raise ValueError("desync_frames must be >= 1 for fake clips")
        if self.n_clips < 8 or self.n_clips % 2:
            raise ValueError("n_clips must be even and at least 8")
        if self.identities < 4:
            raise ValueError("need at least 4 identities")
        if self.frames < 2 or self.side < 4 or self.audio_seconds <= 0 or self.syllable_frames < 0:
            raise ValueError("frames, side and audio_seconds are too small")

    @property
    def identities(self) -> int:
        return min(self.n_identities, self.n_clips // 2)

    @property
    def syllable(self) -> int:
        return self.syllable_frames or max(1, self.frames // 2)

    @property
    def fps(self) -> float:
        return self.frames / self.audio_seconds

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(frames=self.frames, side=self.side, mfcc=MfccConfig(width=self.audio_width))


@dataclass
class ToyClip:
    frames: np.ndarray  # T x H x W x 3 uint8
    audio: np.ndarray  # float64 samples in [-1, 1]
    envelope: np.ndarray  # per-frame loudness driving the audio
    shift: int  # frames by which the video leads the audio (0 = real)


def _identity_style(spec: ToySpec, ident: int) -> tuple[np.ndarray, float]:
    rng = np.random.default_rng([spec.seed, 7919, ident])
    color = rng.uniform(0.35, 1.0, size=3)
    pitch = float(rng.uniform(180.0, 520.0))
    return color, pitch


RISE, FALL, PAUSE = 0, 1, 2


def _envelope(n: int, syllable: int, rng: np.random.Generator, low: float = 0.2, high: float = 0.9) -> np.ndarray:
    """Per-frame loudness: syllables cycling rise -> fall -> pause from a random start, values in [0.05, 1]."""
    start = int(rng.integers(3))
    u = (np.arange(syllable) + 0.5) / syllable
    parts = []
    for k in range(-(-n // syllable)):
        a, b = low + 0.05 * rng.standard_normal(), high + 0.05 * rng.standard_normal()
        kind = (start + k) % 3
        parts.append(a + (b - a) * u if kind == RISE else b + (a - b) * u if kind == FALL else np.full(syllable, a))
    env = np.concatenate(parts)[:n] + 0.02 * rng.standard_normal(n)
    return np.clip(env, 0.05, 1.0)


def _voice(t: np.ndarray, pitch: float, rng: np.random.Generator) -> np.ndarray:
    """Broadband voiced source: harmonics up to Nyquist with 1/h roll-off plus breath noise, peak ~0.6."""
    phase = rng.uniform(0, 2 * np.pi)
    n_harm = int(7800 // pitch)
    h = np.arange(1, n_harm + 1)[:, None]
    tone = (np.sin(2 * np.pi * pitch * h * t[None, :] + phase * h) / h).sum(axis=0)
    tone /= np.abs(tone).max()
    return 0.5 * tone + 0.1 * rng.standard_normal(t.size)


def _render(spec: ToySpec, color: np.ndarray, env: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    S = spec.side
    yy, xx = np.mgrid[0:S, 0:S]
    r = np.hypot(yy - (S - 1) / 2, xx - (S - 1) / 2) / (S / 2)
    mask = (r < 0.6).astype(np.float64)
    frames = 0.15 * color + mask[None, :, :, None] * env[:, None, None, None] * color * 0.8
    frames = frames + spec.noise * rng.standard_normal((len(env), S, S, 1)) * color  # tinted per identity
    return (np.clip(frames, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def make_pair(spec: ToySpec, ident: int, rng: np.random.Generator) -> tuple[ToyClip, ToyClip]:
    """A real clip and its fake twin: same audio, video shifted by ``desync_frames``."""
    T, shift = spec.frames, spec.desync_frames
    env = _envelope(T + shift, spec.syllable, rng)
    color, pitch = _identity_style(spec, ident)

    n = int(round(spec.audio_seconds * spec.rate))
    t = np.arange(n) / spec.rate
    centers = (np.arange(T) + 0.5) / spec.fps
    amp = np.interp(t, centers, env[:T])
    audio = amp * _voice(t, pitch, rng) + spec.audio_noise * rng.standard_normal(n)
    audio = np.clip(audio, -1.0, 1.0)

    real = ToyClip(_render(spec, color, env[:T], rng), audio, env[:T], 0)
    fake = ToyClip(_render(spec, color, env[shift : shift + T], rng), audio, env[:T], shift)
    return real, fake


def gen_toy_dataset(spec: ToySpec, out_dir: str | Path, force: bool = False, cache: bool = True, jobs: int = 1) -> Path:
    """Write media, a split manifest and (optionally) the preprocessed cache; returns the manifest path."""
    out_dir = Path(out_dir)
    manifest_path = out_dir / "manifest.jsonl"
    if manifest_path.exists() and not force:
        raise FileExistsError(f"{manifest_path} exists (use --force)")
    media = out_dir / "media"
    media.mkdir(parents=True, exist_ok=True)

    records = []
    for pair in range(spec.n_clips // 2):
        ident = pair % spec.identities
        twins = make_pair(spec, ident, np.random.default_rng([spec.seed, pair]))
        for real, clip in zip((True, False), twins):
            idx = 2 * pair + (0 if real else 1)
            clip_id = f"toy{idx:05d}"
            vpath, apath = media / f"{clip_id}.npy", media / f"{clip_id}.wav"
            np.save(vpath, clip.frames)
            write_wav(apath, AudioWave(clip.audio, spec.rate))
            category = Category.RV_RA if real else (Category.FV_FA if pair % 2 else Category.FV_RA)
            records.append(
                ClipRecord(
                    clip_id=clip_id,
                    video_path=str(vpath.relative_to(out_dir)),
                    audio_path=str(apath.relative_to(out_dir)),
                    identity_id=f"id{ident:03d}",
                    category=category,
                    label=category.label,
                    duration_s=spec.audio_seconds,
                    fps=spec.fps,
                    width=spec.side,
                    height=spec.side,
                )
            )

    records, _ = make_splits(records, (0.8, 0.1, 0.1), seed=spec.seed)
    write_manifest(records, manifest_path)
    (out_dir / SPEC_FILE).write_text(json.dumps(asdict(spec), indent=2) + "\n")
    if cache:
        preprocess_manifest(manifest_path, out_dir / "cache", spec.preprocess_config(), jobs=jobs, force=force)
    return manifest_path


def load_toy_spec(out_dir: str | Path) -> ToySpec:
    return ToySpec(**json.loads((Path(out_dir) / SPEC_FILE).read_text()))
