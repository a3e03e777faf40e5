import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from digishield.losses import EPS, LossBatch, contrastive_loss, cross_entropy_loss, total_loss


def t(x):
    return torch.tensor(x, dtype=torch.float64)


def np_contrastive(h_v, h_a, y, m=1.0):
    """Plain-numpy reference."""
    d = np.linalg.norm(h_v - h_a, axis=1)
    return float(np.mean(y * d**2 + (1 - y) * np.maximum(0.0, m - d) ** 2))


def np_bce(p, y, eps=1e-7):
    p = np.clip(p, eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def test_contrastive_hand_examples():
    hv, ha = t([[1.0, 0.0]]), t([[0.0, 0.0]])
    # D = 1: real pays D^2 = 1, fake pays max(0, 1 - 1)^2 = 0
    assert abs(contrastive_loss(hv, ha, t([1.0])).item() - 1.0) < 1e-10
    assert abs(contrastive_loss(hv, ha, t([0.0])).item() - 0.0) < 1e-10
    # identical embeddings: real costs nothing, fake pays the full margin
    same = t([[0.3, 0.4]])
    assert contrastive_loss(same, same, t([1.0])).item() == 0.0
    assert abs(contrastive_loss(same, same, t([0.0])).item() - 1.0) < 1e-10
    # D = 0.5 fake: (1 - 0.5)^2
    assert abs(contrastive_loss(t([[0.5, 0.0]]), t([[0.0, 0.0]]), t([0.0])).item() - 0.25) < 1e-10


def test_bce_hand_examples():
    assert abs(cross_entropy_loss(t([0.5]), t([1.0])).item() - math.log(2)) < 1e-10
    assert abs(cross_entropy_loss(t([0.9]), t([1.0])).item() - (-math.log(0.9))) < 1e-10
    assert abs(-math.log(0.9) - 0.1054) < 1e-4
    assert abs(cross_entropy_loss(t([0.9]), t([0.0])).item() - (-math.log(0.1))) < 1e-10
    # clamping keeps confident mistakes finite
    assert abs(cross_entropy_loss(t([0.0]), t([1.0])).item() - (-math.log(EPS))) < 1e-10
    assert math.isfinite(cross_entropy_loss(t([1.0]), t([0.0])).item())


def test_total_is_sum():
    rng = np.random.default_rng(0)
    hv, ha = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    p, y = rng.uniform(0.01, 0.99, 6), rng.integers(0, 2, 6).astype(float)
    got = total_loss(LossBatch(t(hv), t(ha), t(p), t(y))).item()
    assert abs(got - (np_contrastive(hv, ha, y) + np_bce(p, y))) < 1e-10


@settings(max_examples=80, deadline=None)
@given(n=st.integers(1, 16), d=st.integers(1, 6), seed=st.integers(0, 10_000), m=st.floats(0.1, 3.0))
def test_matches_numpy_reference_and_nonnegative(n, d, seed, m):
    rng = np.random.default_rng(seed)
    hv, ha = rng.standard_normal((n, d)), rng.standard_normal((n, d))
    p, y = rng.uniform(0, 1, n), rng.integers(0, 2, n).astype(float)
    c = contrastive_loss(t(hv), t(ha), t(y), m).item()
    b = cross_entropy_loss(t(p), t(y)).item()
    assert abs(c - np_contrastive(hv, ha, y, m)) < 1e-10
    assert abs(b - np_bce(p, y)) < 1e-10
    assert c >= 0 and b >= 0


def test_monotonic_in_distance():
    ds = np.linspace(0, 2, 21)
    real = [contrastive_loss(t([[x, 0.0]]), t([[0.0, 0.0]]), t([1.0])).item() for x in ds]
    fake = [contrastive_loss(t([[x, 0.0]]), t([[0.0, 0.0]]), t([0.0])).item() for x in ds]
    assert all(a < b for a, b in zip(real, real[1:]))
    assert all(a >= b for a, b in zip(fake, fake[1:]))
    assert all(v == 0 for x, v in zip(ds, fake) if x >= 1)


def test_real_term_scales_quadratically():
    hv, ha = t([[0.3, -0.2]]), t([[0.1, 0.5]])
    base = contrastive_loss(hv, ha, t([1.0])).item()
    for k in (0.5, 2.0, 3.0):
        assert abs(contrastive_loss(k * hv, k * ha, t([1.0])).item() - k**2 * base) < 1e-12


def _central_diff(f, x, h=1e-6):
    g = torch.zeros_like(x)
    flat = x.view(-1)
    for i in range(flat.numel()):
        old = flat[i].item()
        flat[i] = old + h
        up = f().item()
        flat[i] = old - h
        down = f().item()
        flat[i] = old
        g.view(-1)[i] = (up - down) / (2 * h)
    return g


def test_gradients_match_finite_differences():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(2, 8)), int(rng.integers(2, 6))
        hv = t(rng.standard_normal((n, d)) * 0.4).requires_grad_(True)
        ha = t(rng.standard_normal((n, d)) * 0.4).requires_grad_(True)
        p = t(rng.uniform(0.05, 0.95, n)).requires_grad_(True)
        y = t(rng.integers(0, 2, n).astype(float))

        def f():
            return total_loss(LossBatch(hv, ha, p, y))

        f().backward()
        with torch.no_grad():
            for x in (hv, ha, p):
                num = _central_diff(f, x)
                rel = (x.grad - num).norm() / max(num.norm().item(), 1e-12)
                worst = max(worst, rel.item())
    assert worst < 1e-4


def test_gradient_finite_at_zero_distance():
    hv = t([[0.2, 0.2]]).requires_grad_(True)
    ha = t([[0.2, 0.2]])
    for y in (0.0, 1.0):
        hv.grad = None
        contrastive_loss(hv, ha, t([y])).backward()
        assert torch.isfinite(hv.grad).all()


def test_errors():
    with pytest.raises(ValueError):
        contrastive_loss(torch.zeros(0, 2), torch.zeros(0, 2), torch.zeros(0))
    with pytest.raises(ValueError):
        LossBatch(torch.zeros(2, 2), torch.zeros(3, 2), torch.zeros(2), torch.zeros(2))
    with pytest.raises(ValueError):
        LossBatch(torch.zeros(1, 2), torch.zeros(1, 2), torch.zeros(1), torch.zeros(1), margin=0)
