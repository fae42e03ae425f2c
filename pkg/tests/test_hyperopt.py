import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import bowl_objective, grid_space, make_dataset
from nidsopt.classifiers import KNN
from nidsopt.data import DataError
from nidsopt.hyperopt import (OPTIMIZERS, Categorical, CVObjective, Evaluator, GaConfig, GpState,
                              IntRange, PsoConfig, SearchSpace, Trial, bo_gp_optimize,
                              bo_tpe_optimize, evaluate_objective, expected_improvement, ga_optimize,
                              gp_posterior, knn_space, population_shape, pso_optimize,
                              pso_position_update, pso_velocity_update, random_search, read_jsonl,
                              rf_space, run_optimizer, tpe_split)
from nidsopt.hyperopt.gp import gabriel_pairs
from nidsopt.hyperopt.space import parse_range
from nidsopt.hyperopt.tpe import fit_density, log_density, tpe_select


def line_space(hi=29):
    return SearchSpace([IntRange("k", 0, hi)])


def concave(peak):
    return lambda c: 0.9 - 0.001 * (c["k"] - peak) ** 2


def table_objective(scores):
    return lambda c: scores[c["k"]]


class TestSpace:
    def test_sizes(self):
        assert knn_space().size == 15
        assert rf_space().size == 241 * 2

    def test_index_round_trip(self):
        s = rf_space()
        for flat in (0, 1, 100, s.size - 1):
            c = s.candidate_at(flat)
            assert s.from_indices(s.to_indices(c)) == c

    def test_decode_clamps(self):
        s = knn_space()
        assert s.decode([-3.2]) == {"knn_k": 1}
        assert s.decode([99.0]) == {"knn_k": 29}
        assert s.decode([1.4]) == {"knn_k": 3}

    def test_contains(self):
        s = knn_space()
        assert s.contains({"knn_k": 7})
        assert not s.contains({"knn_k": 8})
        assert not s.contains({"knn_k": 7, "x": 1})

    def test_enumerate_distinct(self):
        s = grid_space()
        keys = {s.key(c) for c in s.enumerate()}
        assert len(keys) == 50

    def test_invalid(self):
        with pytest.raises(DataError):
            IntRange("a", 3, 1)
        with pytest.raises(DataError):
            Categorical("c", ())
        with pytest.raises(DataError):
            SearchSpace([IntRange("a", 0, 1), IntRange("a", 0, 2)])

    def test_parse_range(self):
        assert parse_range("10:250") == (10, 250, 1)
        assert parse_range("1:29:2") == (1, 29, 2)
        with pytest.raises(DataError):
            parse_range("1")


class TestEvaluator:
    def test_memo_and_budget(self):
        calls = []
        ev = Evaluator(line_space(), lambda c: calls.append(c) or 0.5, budget=3)
        ev({"k": 1})
        ev({"k": 1})
        assert len(calls) == 1
        assert ev.trials[1].cached and ev.trials[1].score == ev.trials[0].score
        ev({"k": 2})
        with pytest.raises(RuntimeError):
            ev({"k": 3})

    def test_rejects_outside_space(self):
        with pytest.raises(DataError):
            Evaluator(line_space(), lambda c: 0.5, 2)({"k": 99})

    def test_rejects_score_outside_unit_interval(self):
        with pytest.raises(DataError):
            Evaluator(line_space(), lambda c: 1.5, 2)({"k": 0})


class TestObjective:
    def test_separable_scores_one(self, two_blobs):
        assert evaluate_objective({"knn_k": 3}, two_blobs, KNN) == 1.0

    def test_random_labels_near_chance(self):
        rng = np.random.default_rng(5)
        d = make_dataset(rng.standard_normal((2000, 4)), rng.integers(0, 2, 2000))
        assert abs(evaluate_objective({"knn_k": 15}, d, KNN, folds=3, seed=1) - 0.5) <= 0.05

    def test_fold_support(self):
        d = make_dataset(np.arange(10.0), [0] * 8 + [1] * 2)
        with pytest.raises(DataError, match="support"):
            evaluate_objective({"knn_k": 1}, d, KNN, folds=3)

    def test_best_reproduces(self, two_blobs):
        obj = CVObjective(two_blobs, KNN, folds=3, seed=4)
        tr = random_search(knn_space(), obj, 4, seed=0)
        again = evaluate_objective(tr.best.candidate, two_blobs, KNN, folds=3, seed=4)
        assert again == tr.best.score


class TestRandomSearch:
    def test_exhausts_small_space(self):
        scores = [0.1, 0.5, 0.3, 0.9, 0.2, 0.4]
        tr = random_search(line_space(5), table_objective(scores), budget=6, seed=3)
        assert tr.best.candidate == {"k": 3}
        assert tr.n_evaluations == 6

    def test_budget_one(self):
        tr = random_search(line_space(), concave(7), budget=1, seed=0)
        assert tr.best is tr.trials[0]

    def test_deterministic(self):
        a = random_search(line_space(), concave(7), 10, seed=9)
        b = random_search(line_space(), concave(7), 10, seed=9)
        assert [t.candidate for t in a.trials] == [t.candidate for t in b.trials]


class TestPso:
    def test_velocity_example(self):
        cfg = PsoConfig(c1=1.0, c2=1.0)
        v = pso_velocity_update([0.0], [0.0], [2.0], [4.0], cfg, 1.0, 1.0)
        np.testing.assert_allclose(v, [6.0])

    def test_no_attraction_keeps_velocity(self):
        v = pso_velocity_update([1.5, -2.0], [3.0, 3.0], [3.0, 3.0], [3.0, 3.0], PsoConfig(), 0.7, 0.2)
        np.testing.assert_allclose(v, [1.5, -2.0])

    def test_clamped(self):
        v = pso_velocity_update([0.0], [0.0], [10.0], [10.0], PsoConfig(), 1.0, 1.0, v_max=3.0)
        np.testing.assert_allclose(v, [3.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DataError):
            pso_velocity_update([0.0], [0.0, 1.0], [0.0], [0.0], PsoConfig(), 1.0, 1.0)

    def test_position_clamped(self):
        np.testing.assert_allclose(pso_position_update([8.0, 1.0], [5.0, -4.0], [9.0, 9.0]), [9.0, 0.0])

    def test_finds_interior_peak(self):
        tr = pso_optimize(line_space(), concave(17), PsoConfig(swarm_size=20, iterations=30, seed=1))
        assert tr.best.candidate == {"k": 17}

    def test_swarm_at_optimum(self):
        cfg = PsoConfig(swarm_size=4, iterations=5, seed=0)
        tr = pso_optimize(line_space(), concave(10), cfg, init_positions=[[10.0]] * 4)
        assert tr.trials[0].candidate == {"k": 10}
        assert all(s == tr.trials[0].score for s in tr.incumbent_scores())

    def test_deterministic(self):
        cfg = PsoConfig(swarm_size=5, iterations=4, seed=2)
        a = pso_optimize(grid_space(), bowl_objective(0), cfg)
        b = pso_optimize(grid_space(), bowl_objective(0), cfg)
        assert [(t.candidate, t.score) for t in a.trials] == [(t.candidate, t.score) for t in b.trials]


class TestGa:
    def grid(self):
        space = SearchSpace([IntRange("x", 0, 5), IntRange("y", 0, 3)])
        return space, lambda c: 0.5 + 0.01 * c["x"] - 0.02 * abs(c["y"] - 2) - 0.001 * (c["x"] == 5) * c["y"]

    def test_six_by_four_grid(self):
        space, f = self.grid()
        best = max(space.enumerate(), key=f)
        for seed in range(5):
            assert ga_optimize(space, f, GaConfig(seed=seed)).best.candidate == best

    def test_closed_operators(self):
        space, f = self.grid()
        init = [{"x": 2, "y": 1}] * 6
        cfg = GaConfig(population=6, generations=4, crossover_rate=0.0, mutation_rate=0.0, patience=99)
        tr = ga_optimize(space, f, cfg, initial_population=init)
        assert {space.key(t.candidate) for t in tr.trials} == {(2, 1)}

    def test_incumbent_non_decreasing(self):
        tr = ga_optimize(grid_space(), bowl_objective(3), GaConfig(population=8, generations=10, seed=3))
        inc = tr.incumbent_scores()
        assert all(b >= a for a, b in zip(inc, inc[1:]))

    def test_config_validation(self):
        with pytest.raises(DataError):
            GaConfig(mutation_rate=1.5)
        with pytest.raises(DataError):
            GaConfig(population=4, elitism=4)


class TestGp:
    def test_interpolates(self):
        X = np.array([[0.0], [0.3], [0.7], [1.0]])
        y = np.array([0.8, 0.9, 0.85, 0.7])
        state = GpState.fit(X, y)
        for x, target in zip(X, y):
            mu, sd = gp_posterior(state, x)
            assert abs(mu - target) <= 1e-3
            assert sd <= 1e-2

    def test_prior(self):
        mu, sd = gp_posterior(GpState.fit(np.zeros((0, 1)), np.zeros(0)), [0.5])
        assert (mu, sd) == (0.0, 1.0)

    def test_symmetric_pair(self):
        state = GpState.fit([[0.2], [0.8]], [0.6, 0.9])
        mu, _ = gp_posterior(state, [0.5])
        assert mu == pytest.approx(0.75, abs=1e-9)

    def test_batch_matches_single(self):
        state = GpState.fit([[0.0, 0.0], [1.0, 0.5], [0.3, 1.0]], [0.1, 0.5, 0.3])
        Q = np.random.default_rng(0).random((5, 2))
        mu, sd = gp_posterior(state, Q)
        for q, m, s in zip(Q, mu, sd):
            assert gp_posterior(state, q) == pytest.approx((m, s))

    def test_clustered_points_still_interpolate(self):
        X = np.arange(12)[:, None] / 29.0
        y = np.random.default_rng(14).uniform(0.5, 1.0, 12)
        state = GpState.fit(X, y)
        mu, _ = gp_posterior(state, X)
        np.testing.assert_allclose(mu, y, atol=1e-3)
        assert state.interpolation_error() <= 1e-4

    def test_gabriel_pairs_adjacent_in_1d(self):
        X = np.array([[0.0], [0.3], [0.1], [0.9]])
        sq = (X - X.T) ** 2
        assert gabriel_pairs(sq).tolist() == [[0, 2], [1, 2], [1, 3]]

    def test_gabriel_pairs_skip_blocked_edge(self):
        # (0.5, 0.1) sits inside the ball on the (0,0)-(1,0) diameter
        X = np.array([[0, 0], [1, 0], [0.5, 0.1], [0, 1.0]])
        sq = ((X[:, None] - X[None]) ** 2).sum(-1)
        assert gabriel_pairs(sq).tolist() == [[0, 2], [0, 3], [1, 2], [2, 3]]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 15))
    def test_mean_between_neighbours_bounded(self, seed, n):
        rng = np.random.default_rng(seed)
        X = np.unique(rng.integers(0, 50, n)) / 49.0
        y = rng.uniform(0.5, 1.0, len(X))
        state = GpState.fit(X[:, None], y)
        for i in range(len(X) - 1):
            mu, sd = gp_posterior(state, [(X[i] + X[i + 1]) / 2])
            lo, hi = sorted((y[i], y[i + 1]))
            assert lo - 3 * sd - 1e-9 <= mu <= hi + 3 * sd + 1e-9

    def test_explicit_length_scale_kept(self):
        assert GpState.fit([[0.0], [0.1]], [0.2, 0.4], length_scale=3.0).length_scale == 3.0

    def test_duplicate_points_need_jitter(self):
        state = GpState.fit([[0.5], [0.5]], [0.2, 0.4])
        assert state.jitter >= 1e-6


class TestExpectedImprovement:
    def test_at_incumbent(self):
        assert expected_improvement(0.7, 1.0, 0.7) == pytest.approx(0.39894, abs=1e-5)

    def test_zero_sigma(self):
        assert expected_improvement(0.5, 0.0, 0.7) == 0.0
        assert expected_improvement(0.9, 0.0, 0.7) == pytest.approx(0.2)

    def test_negative_sigma(self):
        with pytest.raises(DataError):
            expected_improvement(0.5, -0.1, 0.7)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-10, 10), st.floats(0, 10), st.floats(-10, 10))
    def test_non_negative(self, mu, sigma, best):
        assert expected_improvement(mu, sigma, best) >= 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(0.01, 5))
    def test_monotone_in_sigma(self, gap, s1, s2):
        lo, hi = sorted((s1, s2))
        assert expected_improvement(gap, lo, 0.0) <= expected_improvement(gap, hi, 0.0) + 1e-12


class TestBoGp:
    def test_one_dimensional_concave(self):
        tr = bo_gp_optimize(line_space(), concave(21), budget=15, seed=0)
        assert tr.best.candidate == {"k": 21}

    def test_flat_scores_pick_max_sigma(self):
        state = GpState.fit([[0.0], [0.5]], [0.4, 0.4])
        pool = np.array([[0.1], [0.25], [1.0]])
        mu, sd = gp_posterior(state, pool)
        ei = expected_improvement(mu, sd, 0.4)
        assert int(np.argmax(ei)) == int(np.argmax(sd)) == 2

    def test_deterministic(self):
        a = bo_gp_optimize(grid_space(), bowl_objective(1), 12, seed=5)
        b = bo_gp_optimize(grid_space(), bowl_objective(1), 12, seed=5)
        assert [t.candidate for t in a.trials] == [t.candidate for t in b.trials]

    def test_budget_below_design(self):
        with pytest.raises(DataError):
            bo_gp_optimize(line_space(), concave(3), budget=2)


class TestTpe:
    def trials(self, scores):
        return [Trial({"k": i}, s, i) for i, s in enumerate(scores)]

    def test_split_sizes(self):
        good, bad = tpe_split(self.trials(np.linspace(0, 1, 10)), 0.3)
        assert (len(good), len(bad)) == (3, 7)
        good, bad = tpe_split(self.trials([0.1, 0.2]), 0.1)
        assert len(good) == 1 and good[0].score == 0.2

    def test_equal_scores_earliest_good(self):
        good, _ = tpe_split(self.trials([0.5] * 8), 0.25)
        assert [t.eval_index for t in good] == [0, 1]

    def test_too_few(self):
        with pytest.raises(DataError):
            tpe_split(self.trials([0.5]), 0.25)

    def test_equal_densities_pick_first(self):
        space = line_space()
        t = self.trials([0.5, 0.4, 0.3])
        dens = fit_density(space, t)
        idx = np.array([[4], [9], [1]])
        assert tpe_select(log_density(dens, idx), log_density(dens, idx)) == 0

    def test_one_dimensional(self):
        tr = bo_tpe_optimize(line_space(), concave(11), budget=30, seed=0)
        assert tr.best.candidate == {"k": 11}

    def test_deterministic(self):
        a = bo_tpe_optimize(grid_space(), bowl_objective(2), 15, seed=8)
        b = bo_tpe_optimize(grid_space(), bowl_objective(2), 15, seed=8)
        assert [t.candidate for t in a.trials] == [t.candidate for t in b.trials]


class TestCommonContract:
    @pytest.mark.parametrize("name", OPTIMIZERS)
    def test_trace_invariants(self, name):
        space, f = grid_space(), bowl_objective(4)
        tr = run_optimizer(name, space, f, 20, seed=1)
        assert tr.budget_used <= 20 and tr.n_evaluations <= 20
        assert all(space.contains(t.candidate) for t in tr.trials)
        inc = tr.incumbent_scores()
        assert all(b >= a for a, b in zip(inc, inc[1:]))
        assert tr.best.score == f(tr.best.candidate)

    @pytest.mark.parametrize("name", OPTIMIZERS)
    def test_deterministic(self, name):
        a = run_optimizer(name, grid_space(), bowl_objective(6), 20, seed=3)
        b = run_optimizer(name, grid_space(), bowl_objective(6), 20, seed=3)
        assert [t.candidate for t in a.trials] == [t.candidate for t in b.trials]

    def test_unknown(self):
        with pytest.raises(DataError):
            run_optimizer("anneal", line_space(), concave(1), 5)

    def test_population_shape(self):
        assert population_shape(600) == (20, 30)
        assert population_shape(30) == (6, 5)


class TestTraceIo:
    def test_jsonl_round_trip(self, tmp_path):
        tr = random_search(grid_space(), bowl_objective(0), 8, seed=1)
        tr.write_jsonl(tmp_path / "t.jsonl")
        back = read_jsonl(tmp_path / "t.jsonl", "rs", 1)
        assert [t.candidate for t in back.trials] == [t.candidate for t in tr.trials]
        assert [t.score for t in back.trials] == [t.score for t in tr.trials]

    def test_csv_rows_match_trials(self, tmp_path):
        tr = random_search(grid_space(), bowl_objective(0), 8, seed=1)
        tr.write_csv(tmp_path / "t.csv")
        assert len((tmp_path / "t.csv").read_text().splitlines()) == len(tr.trials) + 1

    def test_summary(self):
        tr = random_search(grid_space(), bowl_objective(0), 5, seed=1)
        s = json.loads(json.dumps(tr.summary()))
        assert s["budget_used"] == 5 and s["best_score"] == tr.best.score
