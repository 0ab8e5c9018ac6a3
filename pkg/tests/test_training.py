import numpy as np
import pytest

from feats.data import PanelDataset
from feats.errors import ConfigError, TrainingError
from feats.model import FeatsModel, model_to_json
from feats.training import (TrainConfig, ffnn_baseline, head_count_search, split_train_validation,
                            tau_grid_search, train)


def panel(n, m, L, seed, target):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m, L))
    return PanelDataset(X, target(X, rng))


def test_constant_target():
    ds = panel(600, 2, 8, 0, lambda X, r: np.full(len(X), 3.0))
    model, hist = train(FeatsModel(2, 8, heads=1, tau=1, seed=0), ds,
                        TrainConfig(seed=0, lr=0.05, max_epochs=150, batch_size=64))
    assert hist.best_val_loss < 1e-4
    assert np.all(np.abs(model.predict(ds.X[:20]) - 3.0) < 0.02)


def test_planted_window_mean_is_recovered():
    def target(X, rng):
        return X[:, 0, 0:5].mean(axis=1) + 0.05 * rng.normal(size=len(X))

    ds = panel(3000, 2, 12, 1, target)
    model, _ = train(FeatsModel(2, 12, heads=1, tau=1, seed=1), ds,
                     TrainConfig(seed=1, lr=0.01, max_epochs=40, batch_size=64))
    test = panel(1000, 2, 12, 2, target)
    _, feats, _ = model.head_weights(test.X)
    truth = test.X[:, 0, 0:5].mean(axis=1)
    assert abs(np.corrcoef(feats[0], truth)[0, 1]) > 0.99


def test_history_and_best_restore():
    ds = panel(300, 1, 6, 3, lambda X, r: X[:, 0, 2])
    model, hist = train(FeatsModel(1, 6, heads=1, tau=0, seed=0), ds,
                        TrainConfig(seed=3, lr=0.01, max_epochs=15, patience=3))
    assert len(hist.train_loss) == len(hist.val_loss) <= 15
    assert hist.best_val_loss == min(hist.val_loss)
    _, val = split_train_validation(ds, 0.1, 3)
    from feats.training import evaluate_loss

    assert evaluate_loss(model, val) == pytest.approx(hist.best_val_loss, rel=1e-12)


def test_seeded_determinism():
    ds = panel(400, 2, 6, 4, lambda X, r: X[:, 1].max(axis=1))

    def run():
        model, hist = train(FeatsModel(2, 6, heads=2, tau=1, seed=7), ds, TrainConfig(seed=7, max_epochs=4))
        return model_to_json(model), hist.to_dict()

    assert run() == run()


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_divergence_reports_last_finite_epoch():
    ds = panel(100, 1, 4, 5, lambda X, r: np.full(len(X), 1e200))
    with pytest.raises(TrainingError) as info:
        train(FeatsModel(1, 4, heads=1, tau=0, seed=0), ds, TrainConfig(seed=0, max_epochs=3))
    assert info.value.last_finite_epoch is None


@pytest.mark.parametrize("kw", [dict(lr=0.0), dict(batch_size=0), dict(val_fraction=1.0), dict(seed=None)])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**{"seed": 0, **kw})


def test_ffnn_constant_target():
    ds = panel(500, 2, 5, 6, lambda X, r: np.full(len(X), -1.5))
    model, hist = ffnn_baseline(ds, (8, 8), TrainConfig(seed=0, lr=0.05, max_epochs=150))
    assert hist.best_val_loss < 1e-3


class TestHeadCountSearch:
    def test_full_threshold_stops_at_initial(self):
        ds = panel(300, 2, 6, 7, lambda X, r: X[:, 0, 1] + X[:, 1, 4])
        trace = head_count_search(ds, TrainConfig(seed=0, max_epochs=3), threshold=1.0)
        assert trace.values == [2, 4] and trace.chosen == 2

    def test_pure_noise_stops_at_initial(self):
        ds = panel(600, 2, 6, 8, lambda X, r: r.normal(size=len(X)))
        trace = head_count_search(ds, TrainConfig(seed=0, lr=0.005, max_epochs=15, patience=3))
        assert trace.chosen == 2

    def test_respects_max_heads(self):
        ds = panel(200, 1, 5, 9, lambda X, r: X[:, 0, 0])
        trace = head_count_search(ds, TrainConfig(seed=0, max_epochs=2), threshold=-np.inf, max_heads=5)
        assert trace.values == [1, 3, 5] and trace.chosen == 5


class TestTauSearch:
    def test_singleton_grid(self):
        ds = panel(200, 1, 10, 10, lambda X, r: X[:, 0, 3])
        assert tau_grid_search(ds, TrainConfig(seed=0, max_epochs=2), grid=[0]).chosen == 0

    def test_empty_grid(self):
        ds = panel(50, 1, 10, 11, lambda X, r: X[:, 0, 3])
        with pytest.raises(ConfigError):
            tau_grid_search(ds, TrainConfig(seed=0, max_epochs=1), grid=[])

    def test_default_grid_spans_a_fifth_of_t(self):
        ds = panel(60, 1, 11, 12, lambda X, r: X[:, 0, 3])
        trace = tau_grid_search(ds, TrainConfig(seed=0, max_epochs=1))
        assert trace.values == [0, 1, 2]

    def test_single_time_point_target_prefers_zero(self):
        ds = panel(2000, 1, 12, 13, lambda X, r: X[:, 0, 3] - X[:, 0, 8] + 0.05 * r.normal(size=len(X)))
        trace = tau_grid_search(ds, TrainConfig(seed=0, lr=0.01, max_epochs=40, batch_size=64), grid=[0, 5],
                                model_kwargs={"heads": 1}, tie_tolerance=0.05)
        assert trace.chosen == 0
