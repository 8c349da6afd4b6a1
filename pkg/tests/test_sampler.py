import numpy as np
import pytest
from scipy import stats

from changedet.imagery import TimeSeries
from changedet.sampler import (
    assemble_pair_tensor,
    make_training_batch,
    min_series_length,
    sample_triplet,
)


def tiny_series(n, sid="s", edge=2):
    """Series whose pixel values encode the image index, for layout checks."""
    images = np.zeros((n, edge, edge, 3))
    images[:, 0, 0, 0] = np.arange(n) / max(1, n - 1)
    return TimeSeries(id=sid, images=images, timestamps=2 * np.arange(n))


def valid_layouts(n, c, y):
    """Brute-force enumeration of all layouts satisfying the triplet invariants."""
    out = []
    for a1 in range(n):
        for a2 in range(a1 + c, n - c + 1):
            if y == 0:
                out.extend((a1, a2, q) for q in range(0, a1))
            else:
                out.extend((a1, a2, q) for q in range(a2 + c, n))
    return out


class TestSampleTriplet:
    def test_too_short_rejected_with_required_minimum(self):
        c = 3
        series = tiny_series(2 * c + 1)
        with pytest.raises(ValueError, match=str(min_series_length(c))):
            sample_triplet(series, c, np.random.default_rng(0))

    def test_minimum_length_accepted(self):
        series = tiny_series(8)
        t = sample_triplet(series, 3, np.random.default_rng(0))
        assert t.a1.shape == (3, 2, 2, 3)

    def test_invariants_hold_over_many_samples(self):
        # q strictly outside the anchor span, on the labeled side; never between
        rng = np.random.default_rng(7)
        for n, c in [(8, 3), (9, 1), (12, 2), (20, 5)]:
            series = tiny_series(n)
            for _ in range(2000):
                t = sample_triplet(series, c, rng)
                assert t.a1_start + c <= t.a2_start
                assert t.a2_start + c <= n
                if t.y == 0:
                    assert t.q_pos < t.a1_start
                else:
                    assert t.q_pos >= t.a2_start + c
                assert not (t.a1_start <= t.q_pos < t.a2_start + c)

    def test_query_never_between_anchors_100k(self):
        series = tiny_series(12)
        rng = np.random.default_rng(19)
        for _ in range(100_000):
            t = sample_triplet(series, 2, rng)
            assert not (t.a1_start <= t.q_pos < t.a2_start + 2)

    def test_images_match_positions(self):
        series = tiny_series(10)
        rng = np.random.default_rng(3)
        for _ in range(50):
            t = sample_triplet(series, 2, rng)
            assert np.array_equal(t.q, series.images[t.q_pos])
            assert np.array_equal(t.a1, series.images[t.a1_start : t.a1_start + 2])
            assert np.array_equal(t.a2, series.images[t.a2_start : t.a2_start + 2])

    def test_n8_c3_layouts_are_exactly_the_enumerable_ones(self):
        series = tiny_series(8)
        rng = np.random.default_rng(11)
        seen = {0: set(), 1: set()}
        for _ in range(4000):
            t = sample_triplet(series, 3, rng)
            seen[t.y].add((t.a1_start, t.a2_start, t.q_pos))
        for y in (0, 1):
            assert seen[y] == set(valid_layouts(8, 3, y))

    def test_label_balance_over_10000_samples(self):
        series = tiny_series(16)
        rng = np.random.default_rng(5)
        ys = [sample_triplet(series, 3, rng).y for _ in range(10_000)]
        frac = np.mean(ys)
        assert 0.48 <= frac <= 0.52

    @pytest.mark.parametrize("n,c", [(8, 3), (10, 2)])
    def test_layouts_uniform_conditioned_on_label(self, n, c):
        series = tiny_series(n)
        rng = np.random.default_rng(13)
        counts = {0: {}, 1: {}}
        draws = 30_000
        for _ in range(draws):
            t = sample_triplet(series, c, rng)
            key = (t.a1_start, t.a2_start, t.q_pos)
            counts[t.y][key] = counts[t.y].get(key, 0) + 1
        for y in (0, 1):
            layouts = valid_layouts(n, c, y)
            observed = np.array([counts[y].get(k, 0) for k in layouts])
            result = stats.chisquare(observed)
            assert result.pvalue > 1e-3, f"non-uniform layouts for y={y}"


class TestAssemblePairTensor:
    def test_shape_c3_on_64x64(self):
        rng = np.random.default_rng(0)
        anchor = rng.uniform(size=(3, 64, 64, 3))
        q = rng.uniform(size=(64, 64, 3))
        assert assemble_pair_tensor(anchor, q).shape == (12, 64, 64)

    def test_anchor_equal_to_query_duplicates_channels(self):
        rng = np.random.default_rng(1)
        q = rng.uniform(size=(4, 4, 3))
        t = assemble_pair_tensor(q[None], q)
        assert np.array_equal(t[0:3], t[3:6])

    def test_channel_layout_recovers_each_anchor_image(self):
        rng = np.random.default_rng(2)
        anchor = rng.uniform(size=(4, 5, 6, 3))
        q = rng.uniform(size=(5, 6, 3))
        t = assemble_pair_tensor(anchor, q)
        assert t.shape == (15, 5, 6)
        assert np.array_equal(t[0:3], np.moveaxis(q, -1, 0))
        for k in range(1, 5):
            assert np.array_equal(t[3 * k : 3 * k + 3], np.moveaxis(anchor[k - 1], -1, 0))

    def test_dimension_mismatch_rejected(self):
        anchor = np.zeros((2, 4, 4, 3))
        q = np.zeros((5, 5, 3))
        with pytest.raises(ValueError, match="incompatible"):
            assemble_pair_tensor(anchor, q)


class TestMakeTrainingBatch:
    def test_batch_size_five(self):
        dataset = [tiny_series(10, sid=f"s{i}") for i in range(3)]
        batch = make_training_batch(dataset, 5, 3, np.random.default_rng(0))
        assert len(batch) == 5
        for t1, t2, y in batch:
            assert t1.shape == (12, 2, 2)
            assert t2.shape == (12, 2, 2)
            assert y in (0, 1)

    def test_single_series_dataset(self):
        dataset = [tiny_series(10)]
        batch = make_training_batch(dataset, 1, 3, np.random.default_rng(1))
        assert len(batch) == 1

    def test_fixed_seed_reproduces_batch(self):
        dataset = [tiny_series(12, sid=f"s{i}") for i in range(4)]
        a = make_training_batch(dataset, 5, 2, np.random.default_rng(42))
        b = make_training_batch(dataset, 5, 2, np.random.default_rng(42))
        for (a1, a2, ya), (b1, b2, yb) in zip(a, b):
            assert np.array_equal(a1, b1)
            assert np.array_equal(a2, b2)
            assert ya == yb

    def test_all_series_too_short_rejected(self):
        dataset = [tiny_series(6)]
        with pytest.raises(ValueError, match="long enough"):
            make_training_batch(dataset, 2, 3, np.random.default_rng(0))

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            make_training_batch([], 2, 3, np.random.default_rng(0))

    def test_short_series_skipped_in_mixed_dataset(self):
        dataset = [tiny_series(6, sid="short"), tiny_series(10, sid="long")]
        rng = np.random.default_rng(2)
        # every draw must come from the eligible series
        for _ in range(20):
            batch = make_training_batch(dataset, 2, 3, rng)
            assert len(batch) == 2
