import math

import numpy as np
import pytest

from gmflnet import training
from gmflnet.gbfl import GbflConfig
from gmflnet.geometry import blazepose_skeleton, toy_skeleton
from gmflnet.head import LossConfig, bce_loss
from gmflnet.mia import MiaConfig
from gmflnet.model import GMFLNet, ModelConfig
from gmflnet.numeric import Parameter, sum_all
from gmflnet.sequence import Annotation, PoseSequence
from gmflnet.synth import CorpusConfig, corpus_specs, generate
from gmflnet.training import (LR_FALLBACK, EmptyDatasetError, TrainConfig, TrainingError,
                              build_dataset, gradcheck_model, lr_autofind, split_sequences,
                              train)

KEYPOSES = {
    ("a", "I"): np.array([[0.0, 0, 0], [0, 1, 0], [0, 2, 0], [0, 3, 0]]),
    ("a", "II"): np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]),
    ("b", "I"): np.array([[0.0, 0, 0], [0, 0, 1], [1, 0, 1], [2, 0, 1]]),
    ("b", "II"): np.array([[0.0, 0, 0], [0.5, 0.5, 0], [1, 0, 0], [1.5, 0.5, 0]]),
}


def toy_model(seed=0):
    cfg = ModelConfig(skeleton="toy4", actions=("a", "b"), mia=MiaConfig(k=2, M=8),
                      gbfl=GbflConfig(r=2), head_widths=(12, 10, 8), seed=seed)
    return GMFLNet(cfg)


def toy_sequences(n_seq=4, frames=8, noise=0.02, seed=0):
    """Each sequence alternates the two keyposes of one action; every frame is annotated."""
    rng = np.random.default_rng(seed)
    out = []
    for s in range(n_seq):
        action = "ab"[s % 2]
        coords, ann = [], []
        for f in range(frames):
            pose = "I" if f % 2 == 0 else "II"
            coords.append(KEYPOSES[(action, pose)] + rng.normal(scale=noise, size=(4, 3)))
            ann.append(Annotation(f, action, pose))
        out.append(PoseSequence(np.stack(coords), sequence_id=f"s{s}", skeleton="toy4",
                                action=action, annotations=ann))
    return out


def toy_data(**kw):
    return build_dataset(toy_sequences(**kw), toy_skeleton(), ("a", "b"))


def test_six_annotations_give_six_items():
    coords = np.random.default_rng(0).normal(size=(12, 4, 3))
    ann = [Annotation(f, "a", "I") for f in (0, 4, 8)] + [Annotation(f, "a", "II") for f in (2, 6, 10)]
    data = build_dataset([PoseSequence(coords, skeleton="toy4", annotations=ann)],
                         toy_skeleton(), ("a", "b"))
    assert len(data) == 6
    np.testing.assert_array_equal(data.labels.sum(axis=1), 1.0)
    np.testing.assert_array_equal(data.keys, [0, 0, 0, 1, 1, 1])
    np.testing.assert_array_equal(data.coords[3], coords[2])


def test_no_annotations_is_an_error():
    seq = PoseSequence(np.zeros((3, 4, 3)), skeleton="toy4")
    with pytest.raises(EmptyDatasetError):
        build_dataset([seq], toy_skeleton(), ("a",))


def test_item_count_matches_generator_bookkeeping():
    cfg = CorpusConfig(train_per_class=2, test_per_class=0)
    seqs = [generate(spec) for _, spec in corpus_specs(cfg)]
    data = build_dataset(seqs, blazepose_skeleton(), cfg.actions)
    assert len(data) == sum(len(s.annotations) for s in seqs)
    assert len(data) == sum(2 * s.true_count for s in seqs)


def test_split_holds_out_whole_sequences():
    seqs = toy_sequences(n_seq=10)
    tr, va = split_sequences(seqs, 0.1, seed=3)
    assert len(va) == 1 and len(tr) == 9
    assert {s.sequence_id for s in tr} | {s.sequence_id for s in va} == {f"s{i}" for i in range(10)}
    assert split_sequences(seqs, 0.0, seed=3)[1] == []


def test_lr_autofind_stays_in_stable_region():
    # f(x) = L/2 |x|^2: an SGD step with lr >= 2/L cannot decrease f
    rng = np.random.default_rng(0)
    for big_l in (0.5, 4.0, 30.0):
        x = Parameter(rng.normal(size=(5, 1)), "x")
        before = x.data.copy()
        lr = lr_autofind(lambda: sum_all(x * x) * (big_l / 2), [x], np.geomspace(1e-4, 10.0, 25),
                         optimizer="sgd")
        assert 0 < lr < 2.0 / big_l
        assert abs(lr * big_l - 1.0) < 0.4
        np.testing.assert_array_equal(x.data, before)


def test_lr_autofind_single_candidate_and_fallback():
    x = Parameter(np.ones((2, 2)), "x")
    assert lr_autofind(lambda: sum_all(x * x), [x], [0.25]) == 0.25
    nan = Parameter(np.full((2, 2), np.nan), "nan")
    assert lr_autofind(lambda: sum_all(nan * nan), [nan], [1e-3, 1e-2, 1e-1]) == LR_FALLBACK


def test_histories_are_bit_identical():
    data = toy_data()
    cfg = TrainConfig(batch_size=8, max_epochs=3, seed=5)
    runs = []
    for _ in range(2):
        model = toy_model()
        result = train(model, data, data.subset(range(6)), cfg)
        runs.append((result.history, model.to_bytes()))
    assert runs[0][0] == runs[1][0]
    assert runs[0][1] == runs[1][1]


def test_plateau_decays_after_exactly_patience_epochs(monkeypatch):
    monkeypatch.setattr(training.Adam, "step", lambda self: None)
    monkeypatch.setattr(training, "evaluate_loss", lambda *a, **k: 1.0)
    data = toy_data()
    cfg = TrainConfig(batch_size=8, max_epochs=15, plateau_patience=4, plateau_factor=0.5)
    hist = train(toy_model(), data, data, cfg).history
    reduced = [h["epoch"] for h in hist if h["lr_reduced"]]
    # epoch 0 sets the best value, epochs 1..4 fail to improve
    assert reduced == [4, 8, 12]
    assert hist[5]["lr"] == 0.5e-3 and hist[4]["lr"] == 1e-3 and hist[13]["lr"] == 0.125e-3


def test_best_validation_state_is_restored():
    data = toy_data()
    model = toy_model()
    result = train(model, data, data.subset(range(8)), TrainConfig(batch_size=8, max_epochs=4))
    vals = [h["val_loss"] for h in result.history]
    assert result.best_epoch == int(np.argmin(vals)) and result.best_val_loss == min(vals)
    for k, v in model.state_arrays().items():
        np.testing.assert_array_equal(v, result.best_state[k])


def test_separable_classes_reach_low_bce():
    data = toy_data(n_seq=8, frames=16)
    cfg = ModelConfig(skeleton="toy4", actions=("a", "b"), mia=MiaConfig(k=2, M=8),
                      gbfl=GbflConfig(r=2), head_widths=(64, 32, 16))
    model = GMFLNet(cfg)
    hist = train(model, data, None, TrainConfig(batch_size=8, max_epochs=50,
                                                lr_initial=3e-3)).history
    logits, _ = model.forward(data.coords)
    assert bce_loss(logits, data.labels).item() < 0.1
    losses = [h["train_loss"] for h in hist[:10]]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_non_finite_loss_reports_batch(monkeypatch):
    data = toy_data()
    real = training.batch_loss

    def poisoned(*a, **k):
        loss, bce, trip = real(*a, **k)
        return loss * math.nan, bce, trip

    monkeypatch.setattr(training, "batch_loss", poisoned)
    with pytest.raises(TrainingError) as info:
        train(toy_model(), data, None, TrainConfig(batch_size=8, max_epochs=2))
    assert info.value.epoch == 0 and info.value.batch == 0


def test_triplet_feasibility_and_config_checks():
    data = toy_data(n_seq=2, frames=2)
    lone = data.subset([0, 1])
    with pytest.raises(ValueError):
        train(toy_model(), lone, None, TrainConfig(batch_size=2, max_epochs=1))
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(plateau_factor=1.0)


def test_auto_lr_picks_a_grid_point():
    data = toy_data()
    cfg = TrainConfig(batch_size=8, max_epochs=1, auto_lr=True, lr_grid_points=5)
    result = train(toy_model(), data, None, cfg)
    assert np.isclose(np.geomspace(1e-5, 1e-1, 5), result.lr_initial).any()


def test_gradcheck_full_toy_model():
    report = gradcheck_model(toy_model(), LossConfig())
    assert len(report) == len(toy_model().parameters())
    assert max(report.values()) < 1e-3
