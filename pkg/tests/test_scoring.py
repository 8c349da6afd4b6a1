import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

import changedet.scoring as scoring
from changedet.imagery import SceneSpec, TimeSeries, generate_scene
from changedet.model import Classifier, EncoderConfig, init_params
from changedet.scoring import (
    ChangeResult,
    ScoreSeries,
    change_score,
    distance_ratio_baseline,
    fractional_ranks,
    pivot_score,
    pivot_statistic,
    score_series,
    spearman,
    spearman_statistic,
)


def pivot_by_enumeration(values):
    """Independent oracle: direct means over every split."""
    m = len(values)
    best, best_i = -1.0, None
    for i in range(1, m):
        gap = abs(np.mean(values[:i]) - np.mean(values[i:]))
        if gap > best:
            best, best_i = gap, i
    return best, best_i


def make_score_series(values, months=None):
    values = np.asarray(values, dtype=np.float64)
    m = len(values)
    if months is None:
        months = 3 * np.arange(m)
    return ScoreSeries(
        parent_id="x", values=values, query_indices=np.arange(m), query_months=months
    )


def zero_head_classifier(c=1, edge=4, stages=(2, 2)):
    """Real encoder with a zeroed head: omega is exactly 0.5 for any input."""
    enc = EncoderConfig.for_context(c, stages)
    params = init_params(enc, np.random.default_rng(0), dtype="float64")
    params["head.w"][:] = 0.0
    params["head.b"][:] = 0.0
    return Classifier(params=params, encoder=enc, context=c)


class TestPivot:
    def test_perfect_step(self):
        score, idx = pivot_statistic([0, 0, 0, 1, 1, 1])
        assert score == pytest.approx(1.0, abs=1e-12)
        assert idx == 3

    def test_constant_series_is_zero(self):
        score, _ = pivot_statistic([0.4] * 10)
        assert score == pytest.approx(0.0, abs=1e-12)

    def test_hand_enumerated_case(self):
        # splits give |0.2-0.7|=0.5, |0.5-0.65|=0.15, |0.4667-0.9|=0.4333
        score, idx = pivot_statistic([0.2, 0.8, 0.4, 0.9])
        assert score == pytest.approx(0.5, abs=1e-12)
        assert idx == 1

    def test_tie_broken_toward_earliest_split(self):
        score, idx = pivot_statistic([0.0, 1.0, 0.0, 1.0])
        _, oracle_idx = pivot_by_enumeration([0.0, 1.0, 0.0, 1.0])
        assert idx == oracle_idx

    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            pivot_statistic([0.5])

    def test_matches_enumeration_on_1000_random_vectors(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            m = int(rng.integers(2, 65))
            values = rng.uniform(0, 1, m)
            score, idx = pivot_statistic(values)
            oracle_score, oracle_idx = pivot_by_enumeration(values)
            assert abs(score - oracle_score) < 1e-12
            assert idx == oracle_idx

    def test_result_fields(self):
        s = make_score_series([0.1, 0.1, 0.9, 0.9], months=np.array([0, 10, 20, 30]))
        r = pivot_score(s)
        assert r.measure == "pivot"
        assert r.pivot_index == 2
        assert r.pivot_month == 20  # month of the first post-split query


class TestSpearman:
    def test_strictly_increasing_is_one(self):
        assert spearman_statistic(np.linspace(0.1, 0.9, 12)) == pytest.approx(1.0, abs=1e-12)

    def test_strictly_decreasing_is_minus_one(self):
        assert spearman_statistic(np.linspace(0.9, 0.1, 12)) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_case(self):
        # ranks [1,3,2,4], sum d^2 = 2, rho = 1 - 12/60
        assert spearman_statistic([0.1, 0.3, 0.2, 0.4]) == pytest.approx(0.8, abs=1e-12)

    def test_tie_free_matches_rank_pearson(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            m = int(rng.integers(3, 50))
            values = rng.normal(size=m)
            ranks = fractional_ranks(values)
            oracle = np.corrcoef(ranks, np.arange(1, m + 1))[0, 1]
            assert abs(spearman_statistic(values) - oracle) < 1e-9

    def test_permutations_match_closed_form_exactly(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            m = int(rng.integers(2, 20))
            perm = rng.permutation(m) + 1
            d = perm - np.arange(1, m + 1)
            expected = 1.0 - 6.0 * np.sum(d * d) / (m * (m * m - 1))
            assert spearman_statistic(perm.astype(float)) == expected

    def test_matches_scipy_on_tie_free_vectors(self):
        # the d^2 formula deviates from rank-Pearson under ties, so compare tie-free
        rng = np.random.default_rng(9)
        for _ in range(100):
            m = int(rng.integers(4, 30))
            values = rng.permutation(m).astype(float)
            ours = spearman_statistic(values)
            ref = stats.spearmanr(values, np.arange(m)).statistic
            assert ours == pytest.approx(ref, abs=1e-9)

    def test_ties_use_fractional_ranks_in_the_formula(self):
        values = np.array([0.2, 0.2, 0.7])  # ranks [1.5, 1.5, 3]
        d2 = (1.5 - 1) ** 2 + (1.5 - 2) ** 2 + (3 - 3) ** 2
        expected = 1.0 - 6.0 * d2 / (3 * 8)
        assert spearman_statistic(values) == pytest.approx(expected, abs=1e-12)


class TestMeasureProperties:
    @settings(max_examples=200, deadline=None)
    @given(
        values=st.lists(st.floats(-100, 100), min_size=2, max_size=40),
        shift=st.floats(-50, 50),
    )
    def test_shift_invariance(self, values, shift):
        values = np.asarray(values)
        shifted = values + shift
        p0, _ = pivot_statistic(values)
        p1, _ = pivot_statistic(shifted)
        assert p0 == pytest.approx(p1, abs=1e-9)
        if len(np.unique(values)) == len(values) == len(np.unique(shifted)):
            assert spearman_statistic(values) == pytest.approx(
                spearman_statistic(shifted), abs=1e-9
            )

    def test_shift_keeps_pivot_index_when_max_is_clear(self):
        values = np.array([0.1, 0.12, 0.8, 0.82, 0.85])
        _, i0 = pivot_statistic(values)
        _, i1 = pivot_statistic(values + 5.0)
        assert i0 == i1 == 2

    def test_reversal_antisymmetry_tie_free(self):
        rng = np.random.default_rng(17)
        for _ in range(300):
            m = int(rng.integers(2, 40))
            values = rng.permutation(m).astype(float) + rng.uniform(0, 0.4, m)
            rev = values[::-1]
            assert spearman_statistic(rev) == pytest.approx(
                -spearman_statistic(values), abs=1e-9
            )
            p, i = pivot_statistic(values)
            p_rev, i_rev = pivot_statistic(rev)
            assert p_rev == pytest.approx(p, abs=1e-12)
            assert i_rev == m - i

    @settings(max_examples=200, deadline=None)
    @given(values=st.lists(st.floats(0.001, 0.999), min_size=2, max_size=40))
    def test_pivot_bounds(self, values):
        p, i = pivot_statistic(values)
        assert 0.0 <= p <= max(values) - min(values) + 1e-12
        assert 1 <= i <= len(values) - 1


class TestScoreSeries:
    def test_zero_head_model_scores_half_everywhere(self):
        clf = zero_head_classifier(c=1)
        series = generate_scene(
            SceneSpec(height=4, width=4, n_images=8, span_months=24, seed=3)
        )
        s = score_series(clf, series)
        assert np.all(s.values == 0.5)
        assert len(s) == 6

    def test_count_for_n32_c3(self):
        clf = zero_head_classifier(c=3, stages=(2, 2))
        series = generate_scene(SceneSpec(height=4, width=4, seed=4))
        s = score_series(clf, series)
        assert len(s) == 32 - 2 * 3
        assert s.query_indices[0] == 3
        assert s.query_indices[-1] == 28

    def test_oracle_step_stub_gives_step_series(self, monkeypatch):
        series = generate_scene(
            SceneSpec(height=4, width=4, n_images=10, span_months=30, seed=5)
        )
        onset = 14

        def oracle(x1, x2, params, config):
            n = x1.shape[0]
            months = series.timestamps[2 : len(series) - 2]
            return np.where(months >= onset, 0.999, 0.001)

        monkeypatch.setattr(scoring, "classify_batch", oracle)
        clf = zero_head_classifier(c=2)
        s = score_series(clf, series)
        result = pivot_score(s)
        assert result.score == pytest.approx(0.998, abs=1e-9)
        assert np.all(np.diff(s.values) >= 0)

    def test_too_short_rejected(self):
        clf = zero_head_classifier(c=3, stages=(2, 2))
        series = generate_scene(
            SceneSpec(height=4, width=4, n_images=7, span_months=24, seed=6)
        )
        with pytest.raises(ValueError, match="need >="):
            score_series(clf, series)

    def test_single_image_anchor_mode(self):
        clf = zero_head_classifier(c=2)
        series = generate_scene(
            SceneSpec(height=4, width=4, n_images=8, span_months=24, seed=8)
        )
        s = score_series(clf, series, single_image_anchors=True)
        assert len(s) == 4

    def test_change_score_dispatch(self):
        clf = zero_head_classifier(c=1)
        series = generate_scene(
            SceneSpec(height=4, width=4, n_images=8, span_months=24, seed=9)
        )
        assert change_score(clf, series, "pivot").measure == "pivot"
        assert change_score(clf, series, "spearman").measure == "spearman"
        with pytest.raises(ValueError, match="measure"):
            change_score(clf, series, "median")


class TestDistanceRatioBaseline:
    def test_identical_images_undefined(self):
        clf = zero_head_classifier(c=1)
        images = np.full((12, 4, 4, 3), 0.5)
        series = TimeSeries(id="const", images=images, timestamps=3 * np.arange(12))
        assert distance_ratio_baseline(clf, series, np.random.default_rng(0)) is None

    def test_short_span_rejected(self):
        clf = zero_head_classifier(c=1)
        images = np.full((6, 4, 4, 3), 0.5)
        series = TimeSeries(id="short", images=images, timestamps=2 * np.arange(6))
        with pytest.raises(ValueError, match="24"):
            distance_ratio_baseline(clf, series, np.random.default_rng(0))

    def test_returns_positive_ratio_on_noisy_series(self):
        clf = zero_head_classifier(c=1)
        series = generate_scene(
            SceneSpec(height=4, width=4, n_images=16, span_months=48,
                      noise_sigma=0.05, seed=10)
        )
        ratio = distance_ratio_baseline(clf, series, np.random.default_rng(1))
        assert ratio is not None and ratio > 0


class TestCsvRoundTrips:
    def test_change_results_round_trip(self, tmp_path):
        results = [
            ChangeResult("a", "pivot", 0.123456789012345, 4, 37),
            ChangeResult("b", "spearman", -0.5),
        ]
        path = tmp_path / "changes.csv"
        scoring.write_change_results_csv(results, path)
        back = scoring.read_change_results_csv(path)
        assert back == results

    def test_score_series_round_trip(self, tmp_path):
        s = make_score_series([0.25, 0.5, 0.75])
        path = tmp_path / "scores.csv"
        scoring.write_score_series_csv([s], path)
        back = scoring.read_score_series_csv(path)
        assert np.array_equal(back["x"].values, s.values)
        assert np.array_equal(back["x"].query_months, s.query_months)
