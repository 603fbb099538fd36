import numpy as np
import pytest

from gmflnet.counting import (AWAIT_I, ScoreSeries, TriggerConfig, compute_thresholds,
                              count_repetitions, count_series, final_state, infer_and_count, scan)
from gmflnet.gbfl import GbflConfig
from gmflnet.mia import MiaConfig
from gmflnet.model import GMFLNet, ModelConfig
from gmflnet.sequence import PoseSequence

from oracles import brute_scan, crafted_series


def _series(s1, s2):
    return ScoreSeries(np.stack([s1, s2], axis=1), ("a",))


def test_crafted_example():
    s1, s2 = np.zeros(80), np.zeros(80)
    s1[[10, 50]] = 0.9
    s2[[30, 70]] = 0.9
    count, trig = count_repetitions(_series(s1, s2), "a", (0.5, 0.5))
    assert count == 2 and trig == [(10, 30), (50, 70)]
    assert brute_scan(s1, s2, 0.5, 0.5) == (count, trig)


def test_incomplete_and_flat_series_count_zero():
    s1, s2 = np.zeros(20), np.zeros(20)
    s1[5] = 0.9
    assert count_repetitions(_series(s1, s2), "a", (0.5, 0.5))[0] == 0
    flat = np.full(20, 0.3)
    assert count_repetitions(_series(flat, flat), "a", (0.5, 0.5))[0] == 0
    assert count_repetitions(ScoreSeries(np.zeros((0, 2)), ("a",)), "a", (0.5, 0.5)) == (0, [])


def test_strict_comparisons():
    s1 = np.array([0.5, 0.6, 0.0])
    s2 = np.array([0.0, 0.0, 0.5])
    assert scan(s1, s2, 0.5, 0.5)[0] == 0
    s2[2] = 0.51
    assert scan(s1, s2, 0.5, 0.5) == (1, [(1, 2)])


def test_one_transition_per_frame():
    # the frame that arms cannot also fire
    s1 = np.array([0.9, 0.1])
    s2 = np.array([0.9, 0.9])
    assert scan(s1, s2, 0.5, 0.95) == (1, [(0, 1)])


def test_state_machine_matches_oracle_on_random_series():
    rng = np.random.default_rng(0)
    for _ in range(200):
        entry, exit_ = rng.uniform(0.3, 0.7, size=2)
        s1, s2 = crafted_series(rng, entry, exit_)
        assert scan(s1, s2, entry, exit_) == brute_scan(s1, s2, entry, exit_)


def test_triggers_strictly_increasing():
    rng = np.random.default_rng(1)
    for _ in range(50):
        s1, s2 = crafted_series(rng)
        _, trig = scan(s1, s2, 0.5, 0.5)
        flat = [f for pair in trig for f in pair]
        assert flat == sorted(flat) and len(set(flat)) == len(flat)


def test_self_concatenation_doubles_count():
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 100:
        s1, s2 = crafted_series(rng)
        if final_state(s1, s2, 0.5, 0.5) != AWAIT_I:
            continue    # an armed tail would carry into the copy
        sep = np.full(3, 0.2)
        c = scan(s1, s2, 0.5, 0.5)[0]
        cc = scan(np.concatenate([s1, sep, s1]), np.concatenate([s2, sep, s2]), 0.5, 0.5)[0]
        assert cc == 2 * c
        checked += 1


def test_score_mean_thresholds():
    s1 = np.full(6, 0.8)
    s2 = np.array([0, 1, 0, 1, 0, 1.0])
    assert compute_thresholds(_series(s1, s2), "a") == pytest.approx((0.8, 0.5))
    rng = np.random.default_rng(3)
    scores = rng.random((30, 4))
    series = ScoreSeries(scores, ("a", "b"))
    entry, exit_ = compute_thresholds(series, "b")
    assert entry == pytest.approx(sum(scores[:, 2]) / 30)
    assert exit_ == pytest.approx(sum(scores[:, 3]) / 30)


def test_fixed_and_salient_threshold_modes():
    series = _series(np.array([0.9, 0.1, 0.7]), np.array([0.2, 0.8, 0.3]))
    fixed = TriggerConfig(threshold_mode="fixed", entry_threshold=0.6, exit_threshold=0.4,
                          per_action={"b": (0.1, 0.2)})
    assert compute_thresholds(series, "a", fixed) == (0.6, 0.4)
    salient = TriggerConfig(mean_over="salient")
    assert compute_thresholds(series, "a", salient) == pytest.approx((0.8, 0.8))


def test_trigger_config_validation():
    with pytest.raises(ValueError):
        TriggerConfig(entry_threshold=1.5)
    with pytest.raises(ValueError):
        TriggerConfig(threshold_mode="median")
    with pytest.raises(ValueError):
        ScoreSeries(np.array([[1.2, 0.0]]), ("a",))


def test_count_series_and_dominant_action():
    s = np.zeros((40, 4))
    s[[5, 25], 2] = 0.9
    s[[15, 35], 3] = 0.9
    result = count_series(ScoreSeries(s, ("a", "b")))
    assert result.counts == {"a": 0, "b": 2}
    assert result.dominant_action() == "b" and result.count_for() == 2


def _toy_model(zero=False):
    cfg = ModelConfig(skeleton="toy4", actions=("a", "b"), mia=MiaConfig(k=2, M=8),
                      gbfl=GbflConfig(r=2), head_widths=(12, 10, 8))
    return GMFLNet(cfg, zero_output=zero)


def test_zero_model_counts_nothing():
    coords = np.random.default_rng(4).normal(size=(30, 4, 3))
    result = infer_and_count(_toy_model(zero=True), PoseSequence(coords, skeleton="toy4"))
    np.testing.assert_array_equal(result.series.scores, 0.5)
    assert result.counts == {"a": 0, "b": 0}


def test_inference_is_deterministic_and_checks_skeleton():
    model = _toy_model()
    seq = PoseSequence(np.random.default_rng(5).normal(size=(12, 4, 3)), skeleton="toy4")
    a = infer_and_count(model, seq).series.scores
    b = infer_and_count(model, seq).series.scores
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError, match="joints"):
        infer_and_count(model, PoseSequence(np.zeros((3, 5, 3)), skeleton="toy4"))
    with pytest.raises(ValueError, match="skeleton"):
        infer_and_count(model, PoseSequence(seq.coords, skeleton="blazepose33"))
