import numpy as np
import pytest
import torch

from digishield.manifest import Category, ClipRecord, Split
from digishield.synthdata import ToySpec, gen_toy_dataset


def make_record(clip_id, identity, real=True, split=Split.UNASSIGNED, fake_category=Category.FV_RA, **kw):
    cat = Category.RV_RA if real else fake_category
    return ClipRecord(
        clip_id=clip_id,
        video_path=f"v/{clip_id}.mp4",
        audio_path=f"a/{clip_id}.wav",
        identity_id=identity,
        category=cat,
        label=cat.label,
        split=split,
        **kw,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


@pytest.fixture(scope="session")
def small_toy(tmp_path_factory):
    """16-clip toy corpus (manifest + cache), generated once per session."""
    out = tmp_path_factory.mktemp("toy16")
    manifest = gen_toy_dataset(ToySpec(n_clips=16, n_identities=4, seed=3), out)
    return out, manifest
