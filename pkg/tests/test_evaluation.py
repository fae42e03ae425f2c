import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_dataset
from nidsopt.classifiers import KNN, RF, HyperParams
from nidsopt.data import DataError
from nidsopt.evaluation import (ConfusionMatrix, CurvePoint, LearningCurve, MetricsReport, confusion,
                                fractions_for_sizes, kfold_cv, kfold_indices, learning_curve, metrics,
                                minimum_training_size, overfit_gap, pca2)
from nidsopt.synthetic import make_blobs


def curve(cv, train=None, sizes=None):
    train = cv if train is None else train
    sizes = sizes or [100 * (i + 1) for i in range(len(cv))]
    return LearningCurve(tuple(CurvePoint(s, t, c) for s, t, c in zip(sizes, train, cv)), 5, 0)


class TestConfusion:
    def test_perfect(self):
        truth = np.repeat([0, 1], 10)
        assert confusion(truth, truth) == ConfusionMatrix(10, 10, 0, 0)

    def test_complement(self):
        truth = np.repeat([0, 1], 10)
        cm = confusion(1 - truth, truth)
        assert cm.tp == cm.tn == 0

    def test_constructed_190(self):
        truth = np.repeat([1, 0], [100, 90])
        pred = np.r_[np.ones(90), np.zeros(10), np.zeros(85), np.ones(5)].astype(int)
        assert confusion(pred, truth) == ConfusionMatrix(tp=90, tn=85, fp=5, fn=10)

    def test_errors(self):
        with pytest.raises(DataError):
            confusion([0, 1], [0])
        with pytest.raises(DataError):
            confusion([0, 2], [0, 1])


class TestMetrics:
    def test_example(self):
        r = metrics(ConfusionMatrix(tp=90, tn=85, fp=5, fn=10))
        np.testing.assert_allclose([r.accuracy, r.precision, r.recall, r.far],
                                   [0.9211, 0.9474, 0.9, 0.0556], atol=1e-4)
        assert r.undefined == ()

    def test_perfect(self):
        r = metrics(ConfusionMatrix(5, 5, 0, 0))
        assert (r.accuracy, r.far) == (1.0, 0.0)

    def test_nothing_predicted_positive(self):
        r = metrics(ConfusionMatrix(tp=0, tn=5, fp=0, fn=3))
        assert r.precision == 0.0
        assert "precision" in r.undefined

    def test_empty(self):
        with pytest.raises(DataError):
            metrics(ConfusionMatrix(0, 0, 0, 0))

    def test_dict_round_trip(self):
        r = metrics(ConfusionMatrix(3, 4, 1, 2))
        assert MetricsReport.from_dict(r.as_dict()) == r

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000))
    def test_identities(self, tp, tn, fp, fn):
        if tp + tn + fp + fn == 0:
            return
        r = metrics(ConfusionMatrix(tp, tn, fp, fn))
        assert r.accuracy == (tp + tn) / (tp + tn + fp + fn)
        if tp + fn:
            assert r.recall + fn / (tp + fn) == pytest.approx(1.0, abs=1e-15)
        if tn + fp:
            assert r.far + tn / (tn + fp) == pytest.approx(1.0, abs=1e-15)


class TestKfold:
    def test_partition(self):
        parts = kfold_indices(23, 4, seed=1)
        np.testing.assert_array_equal(np.sort(np.concatenate(parts)), np.arange(23))
        assert [len(p) for p in parts] == [6, 6, 6, 5]

    def test_too_many_folds(self):
        with pytest.raises(DataError):
            kfold_indices(3, 4, 0)

    def test_separable(self, two_blobs):
        assert kfold_cv(two_blobs, HyperParams(KNN, knn_k=3), 5, seed=0) == 1.0

    def test_deterministic(self, two_blobs):
        hp = HyperParams(RF, rf_trees=5)
        assert kfold_cv(two_blobs, hp, 3, 2) == kfold_cv(two_blobs, hp, 3, 2)

    def test_random_labels(self):
        rng = np.random.default_rng(11)
        d = make_dataset(rng.standard_normal((500, 3)), rng.integers(0, 2, 500))
        assert abs(kfold_cv(d, HyperParams(KNN, knn_k=5), 5, seed=0) - 0.5) <= 0.07


class TestLearningCurve:
    def test_full_fraction_matches_kfold(self, two_blobs):
        hp = HyperParams(KNN, knn_k=3)
        c = learning_curve(two_blobs, hp, [0.5, 1.0], folds=4, seed=3)
        assert c.points[-1].cv_acc == kfold_cv(two_blobs, hp, 4, 3)
        assert c.points[-1].train_size == two_blobs.n_rows

    def test_separable_near_one(self, two_blobs):
        c = learning_curve(two_blobs, HyperParams(KNN, knn_k=1), [0.25, 0.5, 1.0], folds=3)
        for p in c.points:
            assert p.train_acc >= 0.99 and p.cv_acc >= 0.98

    def test_bad_fractions(self, two_blobs):
        hp = HyperParams(KNN, knn_k=1)
        with pytest.raises(DataError):
            learning_curve(two_blobs, hp, [0.5, 0.25])
        with pytest.raises(DataError):
            learning_curve(two_blobs, hp, [0.0, 1.0])
        with pytest.raises(DataError, match="fewer than"):
            learning_curve(two_blobs, hp, [0.01, 1.0], folds=5)

    def test_fractions_for_sizes(self):
        assert fractions_for_sizes([50, 100, 400], 200) == [0.25, 0.5, 1.0]

    def test_gap_shrinks_on_blobs(self):
        # single small subsamples are noisy; average over datasets
        gaps = []
        for seed in range(4):
            d = make_blobs(2000, 0.1, n_features=6, separation=2.5, seed=seed)
            c = learning_curve(d, HyperParams(KNN, knn_k=5), [0.05, 0.25, 1.0], folds=3, seed=0)
            gaps.append(overfit_gap(c))
        mean = np.mean(gaps, axis=0)
        assert mean[-1] < mean[0]

    def test_csv(self, tmp_path):
        c = curve([0.9, 0.95])
        c.write_csv(tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_text().splitlines()[0] == "train_size,train_acc,cv_acc,gap"


class TestMinimumTrainingSize:
    def test_flat(self):
        assert minimum_training_size(curve([0.95] * 5)) == (100, True)

    def test_plateau_at_fourth_of_eight(self):
        cv = [0.80, 0.88, 0.93, 0.970, 0.971, 0.970, 0.971, 0.971]
        assert minimum_training_size(curve(cv), 0.002) == (400, True)

    def test_rising(self):
        assert minimum_training_size(curve([0.5, 0.6, 0.7, 0.8])) == (400, False)

    def test_gap_blocks_convergence(self):
        c = curve([0.95, 0.95, 0.95], train=[1.0, 0.955, 0.95])
        assert minimum_training_size(c, 0.002) == (200, True)

    def test_too_short(self):
        with pytest.raises(DataError):
            minimum_training_size(curve([0.9]))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.5, 1.0), min_size=2, max_size=8), st.floats(0.0, 0.05), st.floats(0.0, 0.05))
    def test_monotone_in_epsilon(self, cv, e1, e2):
        lo, hi = sorted((e1, e2))
        c = curve(cv)
        assert minimum_training_size(c, hi)[0] <= minimum_training_size(c, lo)[0]


class TestOverfitGap:
    def test_identical(self):
        assert overfit_gap(curve([0.9, 0.95])) == [0.0, 0.0]

    def test_value(self):
        assert overfit_gap(curve([0.9], train=[1.0], sizes=[10]))[0] == pytest.approx(0.1)


class TestPca:
    def test_line(self):
        t = np.linspace(-1, 1, 21)
        res = pca2(make_dataset(np.c_[t, t], np.arange(21) % 2))
        np.testing.assert_allclose(res.components[0], [1 / np.sqrt(2)] * 2, atol=1e-9)
        assert res.explained_variance[1] == pytest.approx(0.0, abs=1e-12)

    def test_three_points(self):
        res = pca2(make_dataset([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], [0, 1, 0]))
        np.testing.assert_allclose(res.components[0], [1.0, 0.0], atol=1e-9)
        assert res.explained_variance[0] == pytest.approx(2 / 3)
        assert res.explained_variance[1] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(res.explained_variance_ratio, [1.0, 0.0], atol=1e-12)

    def test_isotropic_orthogonal(self):
        X = np.random.default_rng(0).standard_normal((2000, 3))
        res = pca2(make_dataset(X, np.arange(2000) % 2))
        np.testing.assert_allclose(res.components @ res.components.T, np.eye(2), atol=1e-9)

    def test_matches_eigh(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((300, 4)) @ np.diag([4.0, 2.0, 1.0, 0.5])
        res = pca2(make_dataset(X, np.arange(300) % 2))
        Xc = X - X.mean(axis=0)
        w, V = np.linalg.eigh(Xc.T @ Xc / 300)
        np.testing.assert_allclose(res.explained_variance, w[::-1][:2], rtol=1e-6)
        np.testing.assert_allclose(np.abs(res.components @ V[:, ::-1][:, :2]), np.eye(2), atol=1e-6)
        np.testing.assert_allclose(res.projection, Xc @ res.components.T, atol=1e-9)
        assert res.explained_variance[0] >= res.explained_variance[1] >= 0

    def test_sign_convention(self):
        X = np.random.default_rng(2).standard_normal((100, 3))
        res = pca2(make_dataset(X, np.arange(100) % 2))
        for v in res.components:
            assert v[np.argmax(np.abs(v))] > 0

    def test_single_feature(self):
        with pytest.raises(DataError):
            pca2(make_dataset([[1.0], [2.0]], [0, 1]))
