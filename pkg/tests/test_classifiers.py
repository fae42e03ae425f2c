import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_dataset
from nidsopt.classifiers import (ENTROPY, GINI, KNN, RF, HyperParams, fit_model, impurity, knn_fit,
                                 knn_predict, load_model, rf_fit, rf_predict, save_model, tree_fit)
from nidsopt.data import DataError
from nidsopt.evaluation import accuracy


class TestImpurity:
    def test_gini(self):
        assert impurity((3, 1), GINI) == pytest.approx(0.375)

    def test_entropy(self):
        assert impurity((3, 1), ENTROPY) == pytest.approx(0.8113, abs=1e-4)

    @pytest.mark.parametrize("criterion", [GINI, ENTROPY])
    def test_pure(self, criterion):
        assert impurity((5, 0), criterion) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 500), st.integers(0, 500))
    def test_bounds(self, n0, n1):
        if n0 + n1 == 0:
            return
        assert 0.0 <= impurity((n0, n1), GINI) <= 0.5 + 1e-12
        assert 0.0 <= impurity((n0, n1), ENTROPY) <= 1.0 + 1e-12


class TestHyperParams:
    def test_validation(self):
        with pytest.raises(DataError):
            HyperParams("svm")
        with pytest.raises(DataError):
            HyperParams(KNN, knn_k=0)
        with pytest.raises(DataError):
            HyperParams(RF, rf_criterion="mse")

    def test_from_candidate(self):
        hp = HyperParams.from_candidate(RF, {"rf_trees": 20, "rf_criterion": ENTROPY, "extra": 1})
        assert hp.as_dict() == {"variant": RF, "rf_trees": 20, "rf_criterion": ENTROPY}


class TestKnn:
    def test_vote_tie_goes_to_nearest(self):
        d = make_dataset([[0.0], [1.0]], [1, 0])
        m = knn_fit(d, 2)
        np.testing.assert_array_equal(knn_predict(m, [[0.4], [0.6]]), [1, 0])

    def test_distance_tie_lower_index(self):
        d = make_dataset([[-1.0], [1.0], [5.0]], [1, 0, 0])
        np.testing.assert_array_equal(knn_fit(d, 1).predict([[0.0]]), [1])

    def test_k_too_large(self):
        with pytest.raises(DataError):
            knn_fit(make_dataset([[0.0], [1.0]], [0, 1]), 3)

    def test_width_mismatch(self):
        m = knn_fit(make_dataset([[0.0], [1.0]], [0, 1]), 1)
        with pytest.raises(DataError):
            m.predict([[0.0, 1.0]])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((300, 4))
        y = rng.integers(0, 2, 300)
        Q = rng.standard_normal((50, 4))
        got = knn_fit(make_dataset(X, y), 5).predict(Q)
        for q, g in zip(Q, got):
            nn = np.lexsort((np.arange(300), ((X - q) ** 2).sum(axis=1)))[:5]
            assert g == int(y[nn].sum() >= 3)

    def test_separable_blobs(self, two_blobs):
        m = knn_fit(two_blobs, 5)
        assert accuracy(m.predict(two_blobs.features), two_blobs.labels) >= 0.99

    def test_random_labels_near_chance(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((1000, 5))
        y = rng.integers(0, 2, 1000)
        m = knn_fit(make_dataset(X[:500], y[:500]), 5)
        assert abs(accuracy(m.predict(X[500:]), y[500:]) - 0.5) <= 0.07


class TestTree:
    def test_one_dimensional_split(self):
        t = tree_fit(make_dataset([[0.0], [1.0]], [0, 1]))
        assert t.feature[0] == 0
        assert t.threshold[0] == pytest.approx(0.5)
        np.testing.assert_array_equal(t.predict([[0.2], [0.8]]), [0, 1])

    def test_pure_sample_is_leaf(self):
        t = tree_fit(make_dataset([[0.0], [1.0], [2.0]], [1, 1, 1]))
        assert t.n_nodes == 1
        np.testing.assert_array_equal(t.predict([[9.0]]), [1])

    def test_fits_training_data(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((200, 3))
        y = (X[:, 0] * X[:, 1] > 0).astype(int)
        t = tree_fit(make_dataset(X, y), ENTROPY)
        np.testing.assert_array_equal(t.predict(X), y)

    def test_weights_equal_duplicates(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((40, 3))
        y = rng.integers(0, 2, 40)
        w = rng.integers(0, 3, 40)
        a = tree_fit((X, y), GINI, weights=w)
        rep = np.repeat(np.arange(40), w)
        b = tree_fit((X[rep], y[rep]), GINI)
        np.testing.assert_array_equal(a.feature, b.feature)
        np.testing.assert_allclose(a.threshold, b.threshold)
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_empty(self):
        with pytest.raises(DataError):
            tree_fit((np.zeros((0, 2)), np.zeros(0, dtype=int)))


class TestForest:
    def test_separable_blobs(self, two_blobs):
        m = rf_fit(two_blobs, HyperParams(RF, rf_trees=15), seed=1)
        assert accuracy(m.predict(two_blobs.features), two_blobs.labels) >= 0.99

    def test_deterministic(self, two_blobs):
        hp = HyperParams(RF, rf_trees=5)
        a = rf_fit(two_blobs, hp, seed=4)
        b = rf_fit(two_blobs, hp, seed=4)
        for ta, tb in zip(a.trees, b.trees):
            np.testing.assert_array_equal(ta.threshold, tb.threshold)

    def test_even_vote_is_class_zero(self):
        d = make_dataset([[0.0], [1.0]], [0, 1])
        m = rf_fit(d, HyperParams(RF, rf_trees=2), seed=0)
        votes = np.array([t.predict([[0.0], [1.0]]) for t in m.trees]).sum(axis=0)
        np.testing.assert_array_equal(rf_predict(m, [[0.0], [1.0]]), (2 * votes > 2).astype(int))

    def test_forest_matches_per_tree_vote(self, two_blobs):
        m = rf_fit(two_blobs, HyperParams(RF, rf_trees=7), seed=2)
        Q = np.random.default_rng(0).uniform(-3, 7, (100, 2))
        votes = np.array([t.predict(Q) for t in m.trees]).sum(axis=0)
        np.testing.assert_array_equal(m.predict(Q), (2 * votes > 7).astype(int))


class TestSerialization:
    @pytest.mark.parametrize("hp", [HyperParams(KNN, knn_k=3), HyperParams(RF, rf_trees=4, rf_criterion=ENTROPY)])
    def test_round_trip(self, hp, two_blobs, tmp_path):
        m = fit_model(two_blobs, hp, seed=3)
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        Q = np.random.default_rng(1).uniform(-3, 7, (200, 2))
        np.testing.assert_array_equal(back.predict(Q), m.predict(Q))

    def test_rejects_foreign_document(self, tmp_path):
        (tmp_path / "m.json").write_text('{"format": "other"}')
        with pytest.raises(DataError):
            load_model(tmp_path / "m.json")
