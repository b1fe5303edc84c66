import itertools

import numpy as np
import pytest

from periodic_hawkes import (
    EmpiricalCdf,
    EstimationError,
    EventSequence,
    HawkesParams,
    InputError,
    PoissonParams,
    PredictionScore,
    area_statistic,
    interevent_cdf,
    interevent_cdf_by_type,
    interevent_gaps,
    mc_gof_test,
    poisson_gof_pair,
    precision_recall,
    prediction_benchmark,
    predict_window_probability,
    simulate_poisson,
    window_event_probability,
    hawkes_prediction_model,
    poisson_prediction_model,
)


class TestEmpiricalCdf:
    def test_two_point_sample(self):
        seq = EventSequence.from_pairs([(0.0, 0), (1.0, 0), (3.0, 0)], 4.0, 1)
        cdf = interevent_cdf(seq)
        assert cdf(1.0) == 0.5
        assert cdf(2.0) == 1.0
        assert cdf(0.5) == 0.0

    def test_degenerate_single_atom(self):
        seq = EventSequence.from_pairs([(k * 2.0, 0) for k in range(5)], 10.0, 1)
        cdf = interevent_cdf(seq)
        assert cdf(1.999) == 0.0 and cdf(2.0) == 1.0
        assert cdf.breakpoints().size == 1

    def test_needs_two_events(self):
        with pytest.raises(InputError):
            interevent_cdf(EventSequence.from_pairs([(0.5, 0)], 1.0, 1))

    def test_dkw_band_against_exponential(self):
        rng = np.random.default_rng(30)
        gaps = rng.exponential(1.0, size=1000)
        cdf = EmpiricalCdf.from_samples(gaps)
        # Dvoretzky-Kiefer-Wolfowitz: sup |F_n - F| <= eps w.p. 1 - alpha
        eps = np.sqrt(np.log(2 / 0.01) / (2 * 1000))
        grid = np.linspace(0, 10, 2001)
        analytic = 1.0 - np.exp(-grid)
        assert np.max(np.abs(cdf(grid) - analytic)) <= eps

    def test_per_type_variant(self):
        seq = EventSequence.from_pairs(
            [(0.0, 0), (1.0, 1), (2.0, 0), (5.0, 1)], 6.0, 2
        )
        by_type = interevent_cdf_by_type(seq)
        assert set(by_type) == {0, 1}
        assert by_type[0](2.0) == 1.0
        assert by_type[1](3.9) == 0.0

    def test_gaps_pool_across_types(self):
        seq = EventSequence.from_pairs([(0.0, 0), (1.0, 1), (3.0, 0)], 4.0, 2)
        np.testing.assert_allclose(interevent_gaps(seq), [1.0, 2.0])


class TestAreaStatistic:
    def test_identical_is_zero(self):
        f = EmpiricalCdf.from_samples([1.0, 2.0, 3.0])
        assert area_statistic(f, f) == 0.0

    def test_separated_point_masses(self):
        f = EmpiricalCdf.from_samples([0.0])
        g = EmpiricalCdf.from_samples([1.0])
        assert area_statistic(f, g) == pytest.approx(1.0, rel=1e-15)

    def test_against_quadrature(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            f = EmpiricalCdf.from_samples(rng.uniform(0, 5, size=rng.integers(1, 30)))
            g = EmpiricalCdf.from_samples(rng.exponential(2, size=rng.integers(1, 30)))
            grid = np.arange(0.0, 25.0, 1e-4)
            oracle = float(np.sum(np.abs(f(grid) - g(grid))) * 1e-4)
            assert area_statistic(f, g) == pytest.approx(oracle, abs=1e-3)

    def test_pseudometric_properties(self):
        rng = np.random.default_rng(32)
        for _ in range(15):
            f, g, h = (
                EmpiricalCdf.from_samples(rng.uniform(0, 4, size=rng.integers(2, 12)))
                for _ in range(3)
            )
            assert area_statistic(f, g) == pytest.approx(area_statistic(g, f), rel=1e-12)
            assert area_statistic(f, g) >= 0
            assert area_statistic(f, h) <= (
                area_statistic(f, g) + area_statistic(g, h) + 1e-12
            )
        same = EmpiricalCdf.from_samples([1.0, 2.0])
        also_same = EmpiricalCdf.from_samples([1.0, 1.0, 2.0, 2.0])
        assert area_statistic(same, also_same) == 0.0


class TestMcGofTest:
    def test_degenerate_identical_groups_not_rejected(self):
        # fitter/simulator that reproduce one fixed sequence: every area is
        # identical, so there is no evidence against the model
        fixed = EventSequence.from_pairs([(k + 0.5, 0) for k in range(30)], 30.0, 1)

        def fitter(seq):
            return None

        def simulator(fitted, horizon, seed):
            return fixed

        result = mc_gof_test(fixed, fitter, simulator, replicates=20, seed=0)
        assert result.p_value >= 0.05
        assert not result.rejected_at_5pct

    def test_minimum_replicates_enforced(self):
        seq = EventSequence.from_pairs([(0.5, 0), (1.0, 0)], 2.0, 1)
        with pytest.raises(InputError):
            mc_gof_test(seq, lambda s: None, lambda f, h, s: seq, replicates=10)

    def test_replicate_failures_carry_index(self):
        baseline = PoissonParams(mu=np.array([1.0]), delta=np.ones(7))
        seq = simulate_poisson(baseline, 50.0, seed=1)
        calls = {"n": 0}

        def flaky_fitter(data):
            calls["n"] += 1
            if calls["n"] == 4:  # outer fit plus replicates 0 and 1 succeed
                raise EstimationError("boom")
            return baseline

        def simulator(fitted, horizon, seed):
            return simulate_poisson(fitted, horizon, seed)

        with pytest.raises(EstimationError, match="replicate 2"):
            mc_gof_test(seq, flaky_fitter, simulator, replicates=20, seed=2)

    def test_misspecified_model_rejected(self, cascade_params):
        from periodic_hawkes import simulate

        data = simulate(cascade_params, 200.0, seed=3)
        fitter, simulator = poisson_gof_pair()
        result = mc_gof_test(data, fitter, simulator, replicates=20, seed=4)
        assert result.rejected_at_5pct

    def test_permutation_method(self):
        baseline = PoissonParams(mu=np.array([1.5]), delta=np.ones(7))
        seq = simulate_poisson(baseline, 60.0, seed=5)
        fitter, simulator = poisson_gof_pair()
        result = mc_gof_test(
            seq, fitter, simulator, replicates=20, seed=6, method="permutation"
        )
        assert 0.0 < result.p_value <= 1.0
        assert result.method == "permutation"


class TestPredictWindowProbability:
    def test_impossible_type_scores_zero(self):
        params = HawkesParams(
            mu=[0.5, 0.0], delta=np.ones(7), excitation=np.zeros((2, 2))
        )
        history = EventSequence.from_pairs([(1.0, 0)], 5.0, 2)
        value = predict_window_probability(params, history, 5.0, 2.0, 1, n_samples=100, seed=0)
        assert value == 0.0

    def test_matches_closed_form_without_excitation(self):
        params = HawkesParams(
            mu=[0.4, 0.2], delta=np.ones(7), excitation=np.zeros((2, 2))
        )
        baseline = PoissonParams(mu=params.mu, delta=params.delta)
        history = EventSequence.from_pairs([], 0.0, 2)
        n = 10_000
        for u in range(2):
            estimate = predict_window_probability(
                params, history, 10.0, 2.0, u, n_samples=n, seed=7
            )
            exact = window_event_probability(baseline, (10.0, 12.0), u)
            se = np.sqrt(exact * (1 - exact) / n)
            assert abs(estimate - exact) <= 3 * se

    def test_recent_event_strictly_raises_probability(self):
        params = HawkesParams(mu=[0.1], delta=np.ones(7), excitation=[[0.7]])
        recent = EventSequence.from_pairs([(19.9, 0)], 20.0, 1)
        empty = EventSequence.from_pairs([], 0.0, 1)
        boosted = predict_window_probability(
            params, recent, 20.0, 2.0, 0, n_samples=2000, seed=8
        )
        plain = predict_window_probability(
            params, empty, 20.0, 2.0, 0, n_samples=2000, seed=8
        )
        assert boosted > plain

    def test_sample_floor_enforced(self):
        params = HawkesParams(mu=[0.1], delta=np.ones(7), excitation=[[0.0]])
        history = EventSequence.from_pairs([], 0.0, 1)
        with pytest.raises(InputError):
            predict_window_probability(params, history, 1.0, 1.0, 0, n_samples=50)


def _score(s, label, model="m", u=0):
    return PredictionScore(user="x", type_index=u, score=s, label=label, model=model)


class TestPrecisionRecall:
    def test_perfect_scores(self):
        scores = [_score(1.0, True), _score(1.0, True), _score(0.0, False)]
        curve = precision_recall(scores, [0.5])
        assert curve.precision[0] == 1.0 and curve.recall[0] == 1.0

    def test_constant_classifier(self):
        scores = [_score(0.4, True), _score(0.4, False), _score(0.4, False),
                  _score(0.4, True)]
        curve = precision_recall(scores, [0.1])
        assert curve.precision[0] == pytest.approx(0.5)
        assert curve.recall[0] == 1.0

    def test_hand_counted_example(self):
        scores = [_score(0.9, True), _score(0.8, False), _score(0.3, True),
                  _score(0.1, False)]
        curve = precision_recall(scores, [0.5])
        assert curve.precision[0] == pytest.approx(0.5)
        assert curve.recall[0] == pytest.approx(0.5)

    def test_empty_classification_precision_is_one(self):
        scores = [_score(0.2, True), _score(0.1, False)]
        curve = precision_recall(scores, [0.5, 0.9])
        np.testing.assert_array_equal(curve.precision, [1.0, 1.0])
        np.testing.assert_array_equal(curve.recall, [0.0, 0.0])

    def test_requires_positive_label(self):
        with pytest.raises(InputError):
            precision_recall([_score(0.5, False)], [0.5])

    def test_requires_sorted_thresholds(self):
        with pytest.raises(InputError):
            precision_recall([_score(0.5, True)], [0.9, 0.1])

    def test_exhaustive_small_cases(self):
        # every label/score assignment up to four items over a small grid,
        # cross-checked against literal counting
        thresholds = [0.25, 0.75]
        score_values = [0.0, 0.5, 1.0]
        for n in range(1, 5):
            for labels in itertools.product([False, True], repeat=n):
                if not any(labels):
                    continue
                for values in itertools.product(score_values, repeat=n):
                    scores = [_score(v, l) for v, l in zip(values, labels)]
                    curve = precision_recall(scores, thresholds)
                    for k, threshold in enumerate(thresholds):
                        classified = [v >= threshold for v in values]
                        true_pos = sum(
                            1 for c, l in zip(classified, labels) if c and l
                        )
                        expected_p = (
                            true_pos / sum(classified) if any(classified) else 1.0
                        )
                        expected_r = true_pos / sum(labels)
                        assert curve.precision[k] == pytest.approx(expected_p)
                        assert curve.recall[k] == pytest.approx(expected_r)


class TestPredictionBenchmark:
    @staticmethod
    def _single_user():
        rng = np.random.default_rng(40)
        times = np.sort(rng.uniform(0, 98, size=60))
        times = np.append(times, 99.2)  # guarantees a positive label window
        types = np.zeros(times.size, dtype=int)
        return {"solo": EventSequence(times, types, 100.0, 1)}

    def test_single_user_smoke(self):
        users = self._single_user()
        result = prediction_benchmark(
            users, epsilon=2.0, holdout_fraction=0.10,
            models=[poisson_prediction_model()], seed=1, top_k=1, n_samples=100,
        )
        assert len(result.scores) == 1
        score = result.scores[0]
        assert score.user == "solo" and 0.0 <= score.score <= 1.0

    def test_full_holdout_rejected(self):
        with pytest.raises(InputError):
            prediction_benchmark(self._single_user(), holdout_fraction=1.0)

    def test_sparse_users_skipped_and_counted(self):
        users = self._single_user()
        users["empty"] = EventSequence.from_pairs([(1.0, 0)], 100.0, 1)
        result = prediction_benchmark(
            users, models=[poisson_prediction_model()], seed=2, top_k=1,
            n_samples=100,
        )
        assert result.skipped_users == 1
        assert set(result.split_times) == {"solo"}

    def test_hawkes_and_poisson_models_run(self, cascade_params):
        from periodic_hawkes import simulate

        users = {
            f"u{k}": simulate(cascade_params, 200.0, seed=50 + k) for k in range(4)
        }
        result = prediction_benchmark(
            users,
            models=[hawkes_prediction_model(), poisson_prediction_model()],
            seed=3,
            top_k=2,
            n_samples=100,
        )
        models_seen = {s.model for s in result.scores}
        assert models_seen == {"hawkes", "poisson"}
        assert result.tracked_types == [0, 1]
        for curve in result.curves.values():
            assert 0.0 <= curve.average_precision <= 1.0
