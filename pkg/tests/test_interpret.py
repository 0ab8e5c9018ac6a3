import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feats.errors import StateError, StatisticsError
from feats.interpret import (align_heads, component_distributions, extract_weights, variance_decomposition,
                             variance_tables, write_alignment_csv, write_boxstats_csv, write_variance_csv,
                             write_weights_csv)
from feats.layers import HeadConfig
from feats.model import FeatsModel


def fitted_model(**kw):
    model = FeatsModel(3, 10, heads=2, tau=1, seed=4, **kw)
    model.fitted = True
    return model


class TestExtract:
    def test_unfitted(self):
        with pytest.raises(StateError):
            extract_weights(FeatsModel(2, 5, heads=1, seed=0), np.zeros((1, 2, 5)))

    def test_shapes_and_additivity(self):
        X = np.random.default_rng(0).normal(size=(6, 3, 10))
        ext = extract_weights(fitted_model(), X)
        assert ext.weights.shape == (2, 6, 3, 10) and ext.features.shape == (2, 6)
        assert ext.max_additivity_error < 1e-12

    def test_model_with_covariates_needs_no_z(self):
        model = FeatsModel(2, 6, p=2, heads=1, tau=1, downstream="feature_attention", seed=0)
        model.fitted = True
        ext = extract_weights(model, np.random.default_rng(4).normal(size=(3, 2, 6)))
        assert ext.weights.shape == (1, 3, 2, 6)

    def test_zero_kernel_scaling_zeros_head(self):
        model = fitted_model()
        model.heads[1].s1.data[:] = 0.0
        ext = extract_weights(model, np.random.default_rng(1).normal(size=(4, 3, 10)))
        assert np.all(ext.weights[1] == 0.0)
        assert np.any(ext.weights[0] != 0.0)

    def test_weights_refer_to_standardized_inputs(self):
        model = fitted_model()
        rng = np.random.default_rng(2)
        model.scaler.fit(rng.normal(size=(50, 3, 10)) * 5 + 2)
        X = rng.normal(size=(3, 3, 10)) * 5 + 2
        ext = extract_weights(model, X)
        np.testing.assert_allclose(ext.inputs, model.scaler.transform_X(X))

    def test_csv_rows(self, tmp_path):
        ext = extract_weights(fitted_model(), np.random.default_rng(3).normal(size=(2, 3, 10)))
        write_weights_csv(tmp_path / "w.csv", ext, ["s0", "s1"])
        with open(tmp_path / "w.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 2 * 3 * 10
        r = rows[-1]
        assert (r["sample_id"], r["head"], r["series"], r["time"]) == ("s1", "1", "2", "9")
        assert float(r["weight"]) == ext.weights[1, 1, 2, 9]


class TestVariance:
    def test_single_sample(self):
        with pytest.raises(StatisticsError):
            variance_decomposition(np.ones((1, 2, 3)), np.ones((1, 2, 3)))

    def test_support_on_one_series(self):
        rng = np.random.default_rng(4)
        W = np.zeros((50, 3, 6))
        W[:, 0] = rng.normal(size=(50, 6))
        Xs = rng.normal(size=(50, 3, 6))
        t = variance_decomposition(W, Xs)
        assert t.series[1] == 0.0 and t.series[2] == 0.0
        assert t.series[0] == pytest.approx(t.feature)

    def test_constant_feature(self):
        W = np.ones((10, 2, 4))
        Xs = np.tile(np.arange(8.0).reshape(2, 4), (10, 1, 1))
        t = variance_decomposition(W, Xs)
        assert t.feature == 0.0 and np.all(t.series == 0) and np.all(t.time == 0)

    def test_matches_hand_computation(self):
        rng = np.random.default_rng(5)
        W, Xs = rng.normal(size=(30, 2, 5)), rng.normal(size=(30, 2, 5))
        t = variance_decomposition(W, Xs)
        c = W * Xs
        assert t.feature == pytest.approx(np.var(c.sum(axis=(1, 2)), ddof=1))
        np.testing.assert_allclose(t.time[3], np.var(c[:, 0, 3] + c[:, 1, 3], ddof=1))

    def test_export(self, tmp_path):
        ext = extract_weights(fitted_model(), np.random.default_rng(6).normal(size=(8, 3, 10)))
        write_variance_csv(tmp_path / "v.csv", variance_tables(ext))
        rows = list(csv.reader(open(tmp_path / "v.csv")))
        assert rows[0] == ["head", "component", "index", "variance"]
        assert len(rows) == 1 + 2 * (1 + 3 + 10)


class TestDistributions:
    def test_too_few(self):
        with pytest.raises(StatisticsError):
            component_distributions(np.ones((4, 1, 2)), np.ones((4, 1, 2)))

    def test_all_zero_weights(self):
        rows = component_distributions(np.zeros((10, 2, 3)), np.random.default_rng(7).normal(size=(10, 2, 3)))
        assert all(v == 0.0 for r in rows for v in r[2:])
        assert len(rows) == 1 + 2 + 3

    def test_symmetric_inputs_linear_head_median_near_zero(self):
        rng = np.random.default_rng(8)
        n = 4000
        W = np.tile(rng.normal(size=(1, 2, 5)), (n, 1, 1))
        Xs = rng.normal(size=(n, 2, 5))
        feat = (W * Xs).sum(axis=(1, 2))
        median = component_distributions(W, Xs)[0][4]
        # standard error of the median of a normal sample: sd * sqrt(pi / (2n))
        assert abs(median) < 3 * feat.std() * np.sqrt(np.pi / (2 * n))

    def test_quartiles_ordered_and_exported(self, tmp_path):
        ext = extract_weights(fitted_model(), np.random.default_rng(9).normal(size=(20, 3, 10)))
        for row in component_distributions(ext.weights[0], ext.inputs):
            assert row[2] <= row[3] <= row[4] <= row[5] <= row[6]
        write_boxstats_csv(tmp_path / "b.csv", ext)
        assert len(list(csv.reader(open(tmp_path / "b.csv")))) == 1 + 2 * 14


class TestAlign:
    def test_identity(self):
        F = np.random.default_rng(10).normal(size=(3, 200))
        t = align_heads(F, F)
        np.testing.assert_allclose(np.diag(t.abs_corr), 1.0)
        assert t.pairs == [(0, 0), (1, 1), (2, 2)]

    def test_permutation_and_sign(self):
        rng = np.random.default_rng(11)
        C = rng.normal(size=(3, 500))
        F = np.stack([-2 * C[2], C[0] + 0.1 * rng.normal(size=500), 3 * C[1]])
        t = align_heads(F, {"a": C[0], "b": C[1], "c": C[2]})
        assert t.best_for_component()["a"][0] == 1
        assert t.best_for_component()["c"][0] == 0
        assert t.sign[0, 2] == -1

    def test_independent_noise(self):
        rng = np.random.default_rng(12)
        t = align_heads(rng.normal(size=(1, 5000)), rng.normal(size=(1, 5000)))
        assert t.abs_corr[0, 0] < 0.1

    def test_zero_variance_feature(self, caplog):
        t = align_heads(np.ones((1, 10)), np.arange(10.0)[None])
        assert t.abs_corr[0, 0] == 0.0
        assert "zero-variance" in caplog.text

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 10), st.integers(1, 4))
    def test_assignment_is_optimal(self, seed, H, K):
        import itertools

        rng = np.random.default_rng(seed)
        t = align_heads(rng.normal(size=(H, 30)), rng.normal(size=(K, 30)))
        A = t.abs_corr
        # brute force over injective maps from the smaller side into the larger one
        if H >= K:
            best = max(sum(A[h, c] for c, h in enumerate(hs)) for hs in itertools.permutations(range(H), K))
        else:
            best = max(sum(A[h, c] for h, c in enumerate(cs)) for cs in itertools.permutations(range(K), H))
        assert t.score == pytest.approx(best, abs=1e-12)
        assert len(t.pairs) == min(H, K)

    def test_export(self, tmp_path):
        F = np.random.default_rng(13).normal(size=(2, 50))
        write_alignment_csv(tmp_path / "a.csv", align_heads(F, {"x": F[1]}))
        rows = list(csv.DictReader(open(tmp_path / "a.csv")))
        matched = [r for r in rows if r["matched"] == "1"]
        assert len(matched) == 1 and matched[0]["head"] == "1"
