import math

import numpy as np
import pytest

from gmflnet.head import (ClassificationHead, HeadConfig, LossConfig, batch_triplet_loss,
                          bce_loss, classify, cosine_similarity, mine_triplets, probabilities,
                          total_loss, triplet_loss)
from gmflnet.numeric import Parameter, Tensor, grad_check


def _head(pooling="max+avg", zero=False, seed=0):
    cfg = HeadConfig(widths=(12, 10, 8), outputs=4, pooling=pooling)
    return ClassificationHead(6, cfg, np.random.default_rng(seed), zero_output=zero)


def test_zero_head_gives_even_odds():
    head = _head(zero=True)
    logits, emb = classify(Tensor(np.zeros((2 * 5, 6))), head, points=5)
    np.testing.assert_array_equal(logits.data, 0.0)
    np.testing.assert_array_equal(probabilities(logits), 0.5)
    assert emb.shape == (2, 8)


@pytest.mark.parametrize("pooling", ["max+avg", "max+max", "avg+avg"])
def test_head_is_point_permutation_invariant(pooling):
    rng = np.random.default_rng(1)
    head = _head(pooling)
    f = rng.normal(size=(7, 6))
    perm = rng.permutation(7)
    a, _ = classify(Tensor(f), head, 7)
    b, _ = classify(Tensor(f[perm]), head, 7)
    np.testing.assert_allclose(a.data, b.data, atol=1e-12)


def test_classify_matches_numpy_oracle():
    head = _head("max+avg")
    f = np.random.default_rng(2).normal(size=(2 * 4, 6))
    logits, emb = classify(Tensor(f), head, 4)
    frames = f.reshape(2, 4, 6)
    h = np.concatenate([frames.max(axis=1), frames.mean(axis=1)], axis=1)
    for m in head.mlps:
        z = h @ m.weight.data + m.bias.data
        z = (z - m.running_mean) / np.sqrt(m.running_var + 1e-5) * m.bn_scale.data
        h = np.maximum(z + m.bn_shift.data, 0)
    np.testing.assert_allclose(emb.data, h, atol=1e-12)
    expect = h @ head.linear.weight.data + head.linear.bias.data
    np.testing.assert_allclose(logits.data, expect, atol=1e-12)


def test_head_config_validation():
    with pytest.raises(ValueError):
        HeadConfig(outputs=3)
    with pytest.raises(ValueError):
        HeadConfig(pooling="min+avg")
    with pytest.raises(ValueError):
        HeadConfig(widths=(8, 4))


def test_triplet_examples():
    a = np.array([[1.0, 0.0]])
    n = np.array([[0.0, 1.0]])
    assert triplet_loss(a, a, n, 0.2).item() == 0.0
    assert triplet_loss(a, n, a, 0.2).item() == pytest.approx(1.2, abs=1e-15)
    assert triplet_loss(a, a, n, 0.2, "as_printed").item() == pytest.approx(1.2, abs=1e-15)


def test_triplet_matches_hand_formula():
    rng = np.random.default_rng(3)
    a, p, n = (rng.normal(size=(6, 5)) for _ in range(3))
    expect = 0.0
    for i in range(6):
        cs_ap = a[i] @ p[i] / (np.linalg.norm(a[i]) * np.linalg.norm(p[i]))
        cs_an = a[i] @ n[i] / (np.linalg.norm(a[i]) * np.linalg.norm(n[i]))
        expect += max(cs_an - cs_ap + 0.3, 0.0)
    assert triplet_loss(a, p, n, 0.3).item() == pytest.approx(expect / 6, abs=1e-14)


def test_triplet_zero_exactly_when_margin_met():
    a = np.array([[1.0, 0.0, 0.0]])
    p = np.array([[1.0, 0.1, 0.0]])
    n = np.array([[0.0, 1.0, 0.0]])
    assert triplet_loss(a, p, n, 0.2).item() == 0.0
    assert triplet_loss(a, p, p * np.array([[1, 1.5, 0]]), 0.2).item() > 0


def test_triplet_gradcheck_and_zero_norm():
    rng = np.random.default_rng(4)
    a, p, n = (Parameter(rng.normal(size=(4, 3)), name) for name in "apn")
    assert grad_check(lambda: triplet_loss(a, p, n, 0.5), [a, p, n]) < 1e-6
    with pytest.raises(ValueError):
        cosine_similarity(Tensor(np.zeros((1, 3))), Tensor(np.ones((1, 3))))


def test_bce_examples():
    even = bce_loss(Tensor(np.zeros((1, 1))), np.ones((1, 1))).item()
    assert even == pytest.approx(0.6931, abs=1e-4)
    exact = bce_loss(Tensor(np.array([[60.0, -60.0]])), np.array([[1.0, 0.0]])).item()
    assert exact <= 1e-11


def test_bce_matches_loop_and_gradcheck():
    rng = np.random.default_rng(5)
    z = Parameter(rng.normal(size=(4, 6)), "z")
    y = (rng.random((4, 6)) < 0.4).astype(float)
    expect = 0.0
    for i in range(4):
        row = 0.0
        for j in range(6):
            p = 1 / (1 + math.exp(-z.data[i, j]))
            row += y[i, j] * math.log(p) + (1 - y[i, j]) * math.log(1 - p)
        expect += row / 6
    assert bce_loss(z, y).item() == pytest.approx(-expect / 4, abs=1e-13)
    assert grad_check(lambda: bce_loss(z, y), [z]) < 1e-6


def test_total_loss_examples():
    assert total_loss(0.5, 0.3, 1.0) == pytest.approx(0.8)
    assert total_loss(0.5, 0.3, 0.0) == 0.5
    rng = np.random.default_rng(6)
    b, t = rng.random(), rng.random()
    assert total_loss(b, t, 2.0) - total_loss(b, t, 0.0) == pytest.approx(2 * t)
    tb, tt = Tensor(np.array([[b]])), Tensor(np.array([[t]]))
    assert total_loss(tb, tt, 2.0).item() == pytest.approx(b + 2 * t)


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig(margin=0.0)
    with pytest.raises(ValueError):
        LossConfig(alpha=-1.0)


def test_mine_triplets_respects_keys():
    rng = np.random.default_rng(7)
    keys = np.array([0, 0, 1, 1, 2])
    t = mine_triplets(keys, rng)
    assert len(t) == 4                       # key 2 has no positive
    for a, p, n in t:
        assert a != p and keys[a] == keys[p] and keys[a] != keys[n]
    assert mine_triplets(np.array([0, 0]), rng).shape == (0, 3)


def test_batch_triplet_loss_skips_zero_rows():
    emb = Tensor(np.array([[1.0, 0.0], [1.0, 0.1], [0.0, 0.0], [0.0, 1.0]]))
    triplets = np.array([[0, 1, 3], [0, 1, 2]])
    loss = batch_triplet_loss(emb, triplets, LossConfig(margin=0.2))
    assert loss.item() == 0.0
    assert batch_triplet_loss(emb, np.zeros((0, 3), int), LossConfig()).item() == 0.0
