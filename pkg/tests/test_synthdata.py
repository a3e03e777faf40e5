from collections import Counter

import numpy as np
import pytest

from digishield.avpreproc import cache
from digishield.avpreproc.media import decode_audio, decode_video
from digishield.manifest import Category, Split, load_manifest
from digishield.synthdata import ToySpec, gen_toy_dataset, load_toy_spec, make_pair


def frame_rms(audio, frames):
    spf = len(audio) // frames
    return np.sqrt((audio[: frames * spf].reshape(frames, spf) ** 2).mean(axis=1))


def disc_brightness(frames):
    side = frames.shape[1]
    c = (side - 1) / 2
    yy, xx = np.mgrid[0:side, 0:side]
    inner = np.hypot(yy - c, xx - c) < 0.25 * side
    return frames[:, inner].astype(np.float64).mean(axis=(1, 2))


@pytest.mark.parametrize("seed", range(5))
def test_correlation_oracle(seed):
    spec = ToySpec(n_clips=8, frames=30, desync_frames=5)
    real, fake = make_pair(spec, 0, np.random.default_rng(seed))
    # loudness measured from the waveform itself, one value per video frame
    loud = frame_rms(real.audio, 30)
    b_real, b_fake = disc_brightness(real.frames), disc_brightness(fake.frames)
    assert np.corrcoef(b_real, loud)[0, 1] > 0.9
    lag0 = np.corrcoef(b_fake, loud)[0, 1]
    lag5 = np.corrcoef(b_fake[:-5], loud[5:])[0, 1]
    assert lag0 < lag5
    assert np.array_equal(real.audio, fake.audio)
    assert (real.shift, fake.shift) == (0, 5)


def test_desync_zero_rejected():
    with pytest.raises(ValueError):
        ToySpec(desync_frames=0)
    with pytest.raises(ValueError):
        ToySpec(n_clips=7)
    with pytest.raises(ValueError):
        ToySpec(n_identities=3)


def test_eight_clip_corpus(tmp_path):
    manifest = gen_toy_dataset(ToySpec(n_clips=8, n_identities=4, seed=1), tmp_path)
    recs = load_manifest(manifest)
    assert len(recs) == 8
    assert Counter(r.label for r in recs) == {1: 4, 0: 4}
    assert {r.category for r in recs if r.label == 0} == {Category.FV_RA, Category.FV_FA}
    assert all(r.split is not Split.UNASSIGNED for r in recs)
    # twins share identity and the audio track
    by_id = {r.clip_id: r for r in recs}
    for p in range(4):
        real, fake = by_id[f"toy{2 * p:05d}"], by_id[f"toy{2 * p + 1:05d}"]
        assert real.identity_id == fake.identity_id and real.split is fake.split
        assert (tmp_path / real.audio_path).read_bytes() == (tmp_path / fake.audio_path).read_bytes()
        assert not np.array_equal(decode_video(tmp_path / real.video_path), decode_video(tmp_path / fake.video_path))
    # media parse through the decoding path and the cache is complete
    for r in recs:
        frames, mfcc = cache.read_clip(cache.cache_path(tmp_path / "cache", r.clip_id))
        assert frames.shape == (1, 8, 3, 32, 32) and mfcc.shape == (1, 3, 13, 16)
        assert decode_audio(tmp_path / r.audio_path).rate == 16000
    assert load_toy_spec(tmp_path) == ToySpec(n_clips=8, n_identities=4, seed=1)


def test_deterministic_and_refuses_overwrite(tmp_path):
    spec = ToySpec(n_clips=8, n_identities=4, seed=2)
    a = gen_toy_dataset(spec, tmp_path / "a", cache=False)
    b = gen_toy_dataset(spec, tmp_path / "b", cache=False)
    assert a.read_bytes() == b.read_bytes()
    for f in sorted((tmp_path / "a" / "media").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / "media" / f.name).read_bytes()
    with pytest.raises(FileExistsError):
        gen_toy_dataset(spec, tmp_path / "a", cache=False)
    other = gen_toy_dataset(ToySpec(n_clips=8, n_identities=4, seed=3), tmp_path / "c", cache=False)
    assert (tmp_path / "c" / "media" / "toy00000.wav").read_bytes() != (tmp_path / "a" / "media" / "toy00000.wav").read_bytes()
    assert other.exists()


def test_streams_alone_do_not_separate_twins():
    # the envelope window seen by the fake video has the same distribution as the real one
    spec = ToySpec(n_clips=8)
    rng = np.random.default_rng(0)
    real_means, fake_means = [], []
    for _ in range(300):
        real, fake = make_pair(spec, 0, rng)
        real_means.append(disc_brightness(real.frames).mean())
        fake_means.append(disc_brightness(fake.frames).mean())
    diff = abs(np.mean(real_means) - np.mean(fake_means))
    assert diff < 3 * np.std(real_means) / np.sqrt(300) * np.sqrt(2)
