"""Media decoding.

Raw ``.npy`` frame arrays and ``.wav`` files are read directly. Anything else
goes through an external ``ffmpeg``-compatible tool that writes raw RGB24
frames or mono s16le PCM to stdout; the executable is taken from
``$DIGISHIELD_FFMPEG`` (default ``ffmpeg``).
"""

from __future__ import annotations

import os
import shutil
import subprocess
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .audio import TARGET_RATE, AudioWave


class MediaError(RuntimeError):
    pass


def _tool() -> str:
    exe = os.environ.get("DIGISHIELD_FFMPEG", "ffmpeg")
    if shutil.which(exe) is None:
        raise MediaError(f"media tool {exe!r} not found; set DIGISHIELD_FFMPEG or use .npy/.wav inputs")
    return exe


def _run(cmd: list[str]) -> bytes:
    proc = subprocess.run(cmd, capture_output=True, check=False)
    if proc.returncode != 0:
        raise MediaError(f"{cmd[0]} failed ({proc.returncode}): {proc.stderr.decode(errors='replace').strip()}")
    return proc.stdout


def decode_video(path: str | Path, width: int = 0, height: int = 0) -> np.ndarray:
    """Return frames as N x H x W x 3 uint8."""
    path = Path(path)
    if not path.exists():
        raise MediaError(f"missing video file {path}")
    if path.suffix == ".npy":
        frames = np.load(path)
        if frames.dtype != np.uint8:
            frames = (np.clip(frames, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    else:
        if width <= 0 or height <= 0:
            raise MediaError(f"{path}: width/height required to decode through the media tool")
        raw = _run([_tool(), "-v", "error", "-i", str(path), "-f", "rawvideo", "-pix_fmt", "rgb24", "-"])
        frame_bytes = width * height * 3
        if len(raw) % frame_bytes:
            raise MediaError(f"{path}: decoded {len(raw)} bytes, not a whole number of {width}x{height} frames")
        frames = np.frombuffer(raw, dtype=np.uint8).reshape(-1, height, width, 3)
    if frames.ndim != 4 or frames.shape[-1] != 3 or len(frames) == 0:
        raise MediaError(f"{path}: expected N x H x W x 3 frames, got {frames.shape}")
    return frames


def decode_audio(path: str | Path) -> AudioWave:
    """Return mono audio as float64 in [-1, 1] at the file's native rate."""
    path = Path(path)
    if not path.exists():
        raise MediaError(f"missing audio file {path}")
    if path.suffix == ".wav":
        rate, data = wavfile.read(path)
        if np.issubdtype(data.dtype, np.integer):
            data = data.astype(np.float64) / float(np.iinfo(data.dtype).max)
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 2:
            data = data.mean(axis=1)
        return AudioWave(data, int(rate))
    raw = _run([_tool(), "-v", "error", "-i", str(path), "-f", "s16le", "-ac", "1", "-ar", str(TARGET_RATE), "-"])
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    return AudioWave(data, TARGET_RATE)


def write_wav(path: str | Path, wave: AudioWave) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pcm = np.clip(np.round(np.asarray(wave.samples) * 32767.0), -32768, 32767).astype("<i2")
    wavfile.write(path, wave.rate, pcm)
    return path
