import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from digishield.head import DecisionHead, HeadConfig, classify, pool_embeddings, pool_tokens


def test_pool_examples():
    h = pool_tokens(torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64))
    torch.testing.assert_close(h, torch.tensor([math.sqrt(2) / 2] * 2, dtype=torch.float64))
    u = torch.tensor([3.0, 4.0], dtype=torch.float64)
    torch.testing.assert_close(pool_tokens(u.expand(5, -1)), u / 5)
    torch.testing.assert_close(pool_tokens(u[None]), torch.tensor([0.6, 0.8], dtype=torch.float64))


def test_pool_embeddings_errors():
    with pytest.raises(ValueError):
        pool_tokens(torch.zeros(0, 3))
    with pytest.raises(ValueError):
        pool_embeddings(torch.randn(4, 3), torch.randn(2, 5))


def test_pool_zero_vector_is_finite():
    assert torch.isfinite(pool_tokens(torch.zeros(3, 4))).all()


def test_head_widths():
    assert HeadConfig(64).widths() == [64, 32, 16]
    head = DecisionHead(HeadConfig(64))
    assert [m[0].out_features for m in head.down] == [32, 16] and head.fc.out_features == 1


def test_zero_weights_give_half():
    head = DecisionHead(HeadConfig(8))
    with torch.no_grad():
        for p in head.parameters():
            p.zero_()
    y = classify(torch.randn(3, 4), torch.randn(3, 4), head)
    assert torch.equal(y, torch.full((3,), 0.5))


def test_one_block_hand_oracle():
    head = DecisionHead(HeadConfig(4, down=1)).double()
    w1 = [[0.5, -1.0, 0.25, 2.0], [1.0, 0.5, -0.5, 0.0]]
    b1 = [0.1, -0.2]
    w2, b2 = [1.5, -0.75], 0.3
    with torch.no_grad():
        head.down[0][0].weight.copy_(torch.tensor(w1, dtype=torch.float64))
        head.down[0][0].bias.copy_(torch.tensor(b1, dtype=torch.float64))
        head.fc.weight.copy_(torch.tensor([w2], dtype=torch.float64))
        head.fc.bias.fill_(b2)
    h_v, h_a = [0.6, 0.8], [1.0, 0.0]
    x = h_v + h_a
    hidden = [max(0.0, sum(w * xi for w, xi in zip(row, x)) + b) for row, b in zip(w1, b1)]
    z = sum(w * h for w, h in zip(w2, hidden)) + b2
    expected = 1 / (1 + math.exp(-z))
    got = classify(torch.tensor([h_v], dtype=torch.float64), torch.tensor([h_a], dtype=torch.float64), head)
    assert abs(got.item() - expected) < 1e-12
    assert torch.equal(got, classify(torch.tensor([h_v], dtype=torch.float64), torch.tensor([h_a], dtype=torch.float64), head))


def test_video_only_head():
    head = DecisionHead(HeadConfig(4))
    assert classify(torch.randn(2, 4), None, head).shape == (2,)
    with pytest.raises(ValueError):
        classify(torch.randn(2, 4), torch.randn(2, 4), head)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e3))
def test_output_in_open_interval(seed, scale):
    torch.manual_seed(seed)
    head = DecisionHead(HeadConfig(8)).double()
    phi, fa = scale * torch.randn(6, 5, 4, dtype=torch.float64), scale * torch.randn(6, 3, 4, dtype=torch.float64)
    y = classify(*pool_embeddings(phi, fa), head)
    assert ((y > 0) & (y < 1)).all()


def test_gradcheck_classify_pool():
    torch.manual_seed(2)
    head = DecisionHead(HeadConfig(6, activation="tanh")).double()
    phi = torch.randn(5, 3, dtype=torch.float64, requires_grad=True)
    fa = torch.randn(4, 3, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(lambda a, b: classify(*pool_embeddings(a, b), head), (phi, fa), rtol=1e-4)
