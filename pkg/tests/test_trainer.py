import numpy as np
import numpy.testing as npt
import pytest

from mcdal.data import make_blobs
from mcdal.losses import L1, discrepancy_loss_multi
from mcdal.model import MlpSpec, forward, init_model, predict
from mcdal.numeric import LrSchedule, Rng
from mcdal.trainer import DivergenceError, TrainConfig, discrepancy_ascent_step, train


def toy_problem(seed=0, n=40, classes=2):
    rng = Rng(seed)
    ds = make_blobs(n // classes, classes, rng.split("data"), spread=0.6)
    return ds.features, ds.labels


def fresh_model(seed=0, classes=2, hidden=(8, 8)):
    spec = MlpSpec(input_dim=2, hidden_dims=hidden, num_classes=classes)
    return init_model(spec, Rng(seed).split("model"))


def snapshot(model):
    return [
        (layer.weight.copy(), layer.bias.copy())
        for layer in model.g_layers + [model.main_head] + model.aux_heads
    ]


def assert_snapshots_equal(a, b, bitwise=True):
    for (wa, ba), (wb, bb) in zip(a, b):
        if bitwise:
            assert wa.tobytes() == wb.tobytes()
            assert ba.tobytes() == bb.tobytes()
        else:
            npt.assert_array_equal(wa, wb)


class TestTrain:
    def test_empty_unlabeled_pool_still_trains(self):
        x, y = toy_problem(1)
        model = fresh_model(1)
        before = snapshot(model)
        cfg = TrainConfig(max_epochs=1, batch_size=16)
        _, log = train(model, x, y, None, cfg, Rng(5))
        assert len(log.epochs) == 1
        assert log.epochs[0].dis_loss == 0.0
        assert not np.array_equal(before[0][0], model.g_layers[0].weight)

    def test_disabled_discrepancy_equals_empty_unlabeled(self):
        x, y = toy_problem(2)
        xu = np.random.default_rng(0).normal(size=(30, 2))
        cfg_off = TrainConfig(max_epochs=5, batch_size=8, use_discrepancy_loss=False)
        cfg_on = TrainConfig(max_epochs=5, batch_size=8, use_discrepancy_loss=True)
        m1 = fresh_model(2)
        m2 = fresh_model(2)
        train(m1, x, y, xu, cfg_off, Rng(9))
        train(m2, x, y, None, cfg_on, Rng(9))
        assert_snapshots_equal(snapshot(m1), snapshot(m2))

    def test_discrepancy_only_updates_leave_task_model_untouched(self):
        model = fresh_model(3)
        xu = np.random.default_rng(1).normal(size=(64, 2))
        task_before = snapshot(model)[:3]  # two g layers + main head
        for _ in range(50):
            discrepancy_ascent_step(model, xu, 0.1, L1)
        assert_snapshots_equal(task_before, snapshot(model)[:3])

    def test_determinism(self):
        x, y = toy_problem(4)
        xu = np.random.default_rng(2).normal(size=(25, 2))
        cfg = TrainConfig(max_epochs=6, batch_size=8)
        m1, log1 = train(fresh_model(4), x, y, xu, cfg, Rng(11))
        m2, log2 = train(fresh_model(4), x, y, xu, cfg, Rng(11))
        assert_snapshots_equal(snapshot(m1), snapshot(m2))
        assert log1.to_rows() == log2.to_rows()

    def test_reaches_full_accuracy_on_separable_data(self):
        rng = Rng(6)
        ds = make_blobs(20, 2, rng.split("data"), centers=[[-4.0, 0.0], [4.0, 0.0]], spread=0.3)
        model = fresh_model(6)
        cfg = TrainConfig(max_epochs=200, batch_size=16)
        train(model, ds.features, ds.labels, None, cfg, rng.split("train"))
        assert np.mean(predict(model, ds.features) == ds.labels) == 1.0

    def test_empty_labeled_set_rejected(self):
        with pytest.raises(ValueError, match="labeled"):
            train(fresh_model(0), np.zeros((0, 2)), np.zeros(0, dtype=np.int64), None,
                  TrainConfig(max_epochs=1), Rng(0))

    def test_divergence_reported_with_epoch(self):
        x, y = toy_problem(7)
        cfg = TrainConfig(
            max_epochs=10, batch_size=16, lr_schedule=LrSchedule(1e200, (0.9,), 1.0)
        )
        with pytest.raises(DivergenceError, match="epoch"):
            train(fresh_model(7), x, y, None, cfg, Rng(3))

    def test_log_has_one_record_per_epoch_all_finite(self):
        x, y = toy_problem(8)
        xu = np.random.default_rng(3).normal(size=(12, 2))
        cfg = TrainConfig(max_epochs=7, batch_size=8)
        _, log = train(fresh_model(8), x, y, xu, cfg, Rng(1))
        assert [e.epoch for e in log.epochs] == list(range(7))
        rows = log.to_rows()
        assert all(np.isfinite(list(r.values())).all() for r in rows)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(max_epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


class TestAscentStep:
    def test_small_rate_does_not_decrease_loss(self):
        model = fresh_model(9)
        xu = np.random.default_rng(4).normal(size=(32, 2))
        rec = forward(model, xu)
        before = discrepancy_loss_multi(rec.p, rec.aux_p, L1)
        discrepancy_ascent_step(model, xu, 1e-4, L1)
        rec = forward(model, xu)
        after = discrepancy_loss_multi(rec.p, rec.aux_p, L1)
        assert after >= before - 1e-10

    def test_zero_rate_is_identity(self):
        model = fresh_model(10)
        before = snapshot(model)
        discrepancy_ascent_step(model, np.random.default_rng(5).normal(size=(8, 2)), 0.0, L1)
        assert_snapshots_equal(before, snapshot(model))

    def test_repeated_steps_strictly_increase_loss(self):
        model = fresh_model(11)
        xu = np.random.default_rng(6).normal(size=(32, 2))
        rec = forward(model, xu)
        initial = discrepancy_loss_multi(rec.p, rec.aux_p, L1)
        for _ in range(50):
            discrepancy_ascent_step(model, xu, 1e-3, L1)
        rec = forward(model, xu)
        assert discrepancy_loss_multi(rec.p, rec.aux_p, L1) > initial
