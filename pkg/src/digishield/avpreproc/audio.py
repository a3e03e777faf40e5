"""Audio-side preprocessing: resampling to 16 kHz and three-channel MFCC images."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.fft import dct
from scipy.signal import resample_poly

from .frames import PreprocessError

TARGET_RATE = 16000


@dataclass(frozen=True)
class AudioWave:
    samples: np.ndarray
    rate: int

    def __post_init__(self) -> None:
        s = np.asarray(self.samples)
        if s.ndim != 1:
            raise PreprocessError(f"audio must be mono (1-D), got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise PreprocessError("audio contains non-finite samples")
        if self.rate <= 0:
            raise PreprocessError("sample rate must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.rate


@dataclass(frozen=True)
class MfccConfig:
    n_coeff: int = 13
    n_filters: int = 26
    win_ms: float = 25.0
    hop_ms: float = 10.0
    width: int = 96  # W_a, time frames after resampling
    n_fft: int = 512
    preemphasis: float = 0.97
    log_floor: float = 1e-10
    rate: int = TARGET_RATE

    @property
    def win(self) -> int:
        return int(round(self.rate * self.win_ms / 1000))

    @property
    def hop(self) -> int:
        return int(round(self.rate * self.hop_ms / 1000))


@dataclass(frozen=True)
class MfccImage:
    """3 x H_a x W_a float32 image in [0, 1]: (MFCC, delta, delta-delta)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or self.data.shape[0] != 3:
            raise PreprocessError(f"MfccImage must be 3 x H x W, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise PreprocessError("MfccImage contains non-finite values")


def resample_audio(wave: AudioWave, rate: int = TARGET_RATE) -> AudioWave:
    """Polyphase (band-limited) resampling to ``rate``."""
    samples = np.asarray(wave.samples, dtype=np.float64)
    if samples.size == 0:
        raise PreprocessError("cannot resample an empty signal")
    if wave.rate == rate:
        return AudioWave(samples.copy(), rate)
    ratio = Fraction(rate, int(wave.rate))
    out = resample_poly(samples, ratio.numerator, ratio.denominator)
    return AudioWave(out, rate)


def mel_filterbank(cfg: MfccConfig) -> np.ndarray:
    """Triangular HTK-style Mel filters, shape n_filters x (n_fft // 2 + 1)."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    n_bins = cfg.n_fft // 2 + 1
    bin_hz = np.linspace(0, cfg.rate / 2, n_bins)
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(cfg.rate / 2), cfg.n_filters + 2))
    fb = np.zeros((cfg.n_filters, n_bins))
    for m in range(cfg.n_filters):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (bin_hz - lo) / (mid - lo)
        down = (hi - bin_hz) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def mfcc(samples: np.ndarray, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Raw MFCC matrix, n_coeff x n_frames. Frames that do not fit completely are dropped."""
    x = np.asarray(samples, dtype=np.float64)
    win, hop = cfg.win, cfg.hop
    if x.size < win:
        raise PreprocessError(f"signal of {x.size} samples is shorter than one {win}-sample window")
    x = np.append(x[0], x[1:] - cfg.preemphasis * x[:-1])
    n_frames = 1 + (x.size - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hamming(win)
    power = np.abs(np.fft.rfft(frames, n=cfg.n_fft)) ** 2 / cfg.n_fft
    energies = power @ mel_filterbank(cfg).T
    log_mel = np.log(np.maximum(energies, cfg.log_floor))
    return dct(log_mel, type=2, norm="ortho", axis=1)[:, : cfg.n_coeff].T


def _difference(m: np.ndarray) -> np.ndarray:
    # first column has no predecessor; its difference is defined as zero
    return np.diff(m, axis=1, prepend=m[:, :1])


def _resample_time(m: np.ndarray, width: int) -> np.ndarray:
    n = m.shape[1]
    if n == width:
        return m
    src = np.arange(n)
    dst = np.linspace(0, n - 1, width)
    return np.stack([np.interp(dst, src, row) for row in m])


def _minmax(ch: np.ndarray) -> np.ndarray:
    lo, hi = ch.min(), ch.max()
    span = hi - lo
    if not span > 1e-12 * max(1.0, abs(hi), abs(lo)):
        return np.full_like(ch, 0.5)
    return (ch - lo) / span


def mfcc_image(wave: AudioWave, cfg: MfccConfig = MfccConfig()) -> MfccImage:
    if wave.rate != cfg.rate:
        raise PreprocessError(f"expected {cfg.rate} Hz audio, got {wave.rate} Hz; resample first")
    coeffs = mfcc(wave.samples, cfg)
    delta = _difference(coeffs)
    delta2 = _difference(delta)
    channels = [_minmax(_resample_time(c, cfg.width)) for c in (coeffs, delta, delta2)]
    return MfccImage(np.stack(channels).astype(np.float32))
