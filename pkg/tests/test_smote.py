import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_dataset
from nidsopt.data import DataError
from nidsopt.smote import SmoteConfig, interpolate, minority_class, nearest_minority_neighbors, oversample


def imbalanced(n0=40, n1=6, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.standard_normal((n0, dim)), rng.standard_normal((n1, dim)) + 3])
    return make_dataset(X, np.repeat([0, 1], [n0, n1]))


class TestInterpolate:
    def test_midpoint(self):
        np.testing.assert_allclose(interpolate([0, 0], [1, 1], 0.5), [0.5, 0.5])

    @pytest.mark.parametrize("r, expected", [(0.0, [2.0, -1.0]), (1.0, [4.0, 3.0])])
    def test_endpoints(self, r, expected):
        np.testing.assert_allclose(interpolate([2, -1], [4, 3], r), expected)


class TestNeighbours:
    def test_line(self):
        X = np.array([[0.0], [1.0], [3.0], [6.0]])
        np.testing.assert_array_equal(nearest_minority_neighbors(X, 2), [[1, 2], [0, 2], [1, 0], [2, 1]])

    def test_distance_tie_lower_index(self):
        X = np.array([[0.0], [-1.0], [1.0]])
        np.testing.assert_array_equal(nearest_minority_neighbors(X, 1)[0], [1])

    def test_k_capped(self):
        assert nearest_minority_neighbors(np.eye(3), 10).shape == (3, 2)


class TestOversample:
    def test_balances_by_default(self):
        out = oversample(imbalanced())
        assert out.class_counts() == (40, 40)

    def test_originals_untouched(self):
        d = imbalanced()
        out = oversample(d, SmoteConfig(k=3, seed=4))
        np.testing.assert_array_equal(out.features[:d.n_rows], d.features)
        np.testing.assert_array_equal(out.labels[:d.n_rows], d.labels)

    def test_explicit_target(self):
        assert oversample(imbalanced(), SmoteConfig(target_minority_count=20)).class_counts() == (40, 20)

    def test_target_below_current(self):
        with pytest.raises(DataError, match="below"):
            oversample(imbalanced(), SmoteConfig(target_minority_count=3))

    def test_already_balanced_is_identity(self):
        d = imbalanced(6, 6)
        assert oversample(d) is d

    def test_single_minority_row(self):
        with pytest.raises(DataError, match="single"):
            oversample(imbalanced(10, 1))

    def test_one_class(self):
        with pytest.raises(DataError, match="both classes"):
            oversample(make_dataset([[0.0], [1.0]], [0, 0]))

    def test_minority_label_zero(self):
        out = oversample(imbalanced(3, 9))
        assert out.class_counts() == (9, 9)
        assert minority_class(imbalanced(3, 9).labels) == 0

    def test_bad_k(self):
        with pytest.raises(DataError):
            SmoteConfig(k=0)

    def test_deterministic(self):
        d = imbalanced()
        a = oversample(d, SmoteConfig(seed=11))
        b = oversample(d, SmoteConfig(seed=11))
        assert a.features.tobytes() == b.features.tobytes()
        assert not np.array_equal(a.features, oversample(d, SmoteConfig(seed=12)).features)

    def test_synthetic_rows_on_neighbour_segments(self):
        d = imbalanced(50, 7, dim=4, seed=2)
        k = 3
        out = oversample(d, SmoteConfig(k=k, seed=5))
        X_min = d.features[d.labels == 1]
        neigh = nearest_minority_neighbors(X_min, k)
        m = len(X_min)
        for s, row in enumerate(out.features[d.n_rows:]):
            base = X_min[s % m]
            residuals = []
            for j in neigh[s % m]:
                seg = X_min[j] - base
                r = float(np.clip((row - base) @ seg / (seg @ seg), 0.0, 1.0))
                residuals.append(np.abs(base + r * seg - row).max())
            assert min(residuals) < 1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 12), st.integers(13, 40), st.integers(1, 6), st.integers(0, 2**31))
    def test_counts_property(self, n_min, n_maj, k, seed):
        d = imbalanced(n_maj, n_min, dim=2, seed=seed % 1000)
        out = oversample(d, SmoteConfig(k=k, seed=seed))
        assert out.class_counts() == (n_maj, n_maj)
        assert np.all(np.isfinite(out.features))
