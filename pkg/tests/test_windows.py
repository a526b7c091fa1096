from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_series

from drillmae.ingest import ChannelSpec
from drillmae.segmentation import DrillingSegment
from drillmae.windows import (LabeledWindow, NormalizationStats, WindowSet,
                              balance_wells, carve_validation, extract_windows,
                              fit_stats, group_by_well, load_window_cache,
                              prepare_data, save_window_cache,
                              subsample_and_split)

SPECS = (ChannelSpec("a", "input"), ChannelSpec("b", "input"),
         ChannelSpec("t", "target"))


def make_segment(values, well_id="w", seg_id="w/0", start=0):
    values = np.asarray(values, np.float64)
    return DrillingSegment(well_id, seg_id, start, values, SPECS,
                           np.arange(start, start + len(values)))


def toy_windows(n, well_id="w", seg="s", y=0.5):
    return [LabeledWindow(well_id, seg, i, np.zeros((4, 2)), y) for i in range(n)]


class TestFitStats:
    def test_single_segment_extrema(self):
        seg = make_segment([[2, 1, 0], [4, 1, 1], [6, 1, 2]])
        stats = fit_stats([seg])
        np.testing.assert_array_equal(stats.mins, [2, 1, 0])
        np.testing.assert_array_equal(stats.maxs, [6, 1, 2])

    def test_union_over_segments(self):
        s1 = make_segment([[0, 0, 0], [1, 1, 1]])
        s2 = make_segment([[5, 5, 5], [9, 9, 9]], seg_id="w/1", start=50)
        stats = fit_stats([s1, s2])
        np.testing.assert_array_equal(stats.mins, [0, 0, 0])
        np.testing.assert_array_equal(stats.maxs, [9, 9, 9])

    def test_degenerate_channel_normalizes_to_zero(self):
        seg = make_segment([[3, 1, 0], [3, 2, 1]])
        stats = fit_stats([seg])
        assert stats.degenerate[0]
        normalized = stats.normalize(seg.values)
        assert (normalized[:, 0] == 0.0).all()

    def test_empty_input_is_an_error(self):
        with pytest.raises(ValueError):
            fit_stats([])

    def test_denormalize_roundtrip_tight(self):
        rng = np.random.default_rng(0)
        seg = make_segment(rng.uniform(-5, 20, size=(50, 3)))
        stats = fit_stats([seg])
        x = stats.normalize(seg.values)
        back = stats.normalize(stats.denormalize(x))
        np.testing.assert_allclose(back, x, atol=1e-12, rtol=0)

    def test_stats_depend_only_on_segments(self, segments):
        # permuting anything at the window level cannot change the stats
        s1 = fit_stats(segments)
        s2 = fit_stats(list(reversed(segments)))
        np.testing.assert_array_equal(s1.mins, s2.mins)
        np.testing.assert_array_equal(s1.maxs, s2.maxs)


class TestExtractWindows:
    def _stats(self, seg):
        return fit_stats([seg])

    def test_exact_boundary_one_window(self):
        seg = make_segment(np.random.default_rng(1).uniform(size=(600, 3)))
        wins = extract_windows(seg, self._stats(seg), window_len=600)
        assert len(wins) == 1
        assert wins[0].offset == 0

    def test_count_is_t_minus_len_plus_one(self):
        seg = make_segment(np.random.default_rng(2).uniform(size=(605, 3)))
        wins = extract_windows(seg, self._stats(seg), window_len=600)
        assert len(wins) == 6

    def test_short_segment_yields_no_windows(self):
        seg = make_segment(np.random.default_rng(3).uniform(size=(10, 3)))
        assert extract_windows(seg, self._stats(seg), window_len=600) == []

    def test_constant_target_label(self):
        values = np.random.default_rng(4).uniform(size=(30, 3))
        values[:, 2] = 0.0
        seg = make_segment(values)
        stats = NormalizationStats(SPECS, np.array([0.0, 0.0, -0.7]),
                                   np.array([1.0, 1.0, 0.3]))
        wins = extract_windows(seg, stats, window_len=10)
        for w in wins:
            assert w.y == pytest.approx(0.7, abs=1e-12)

    def test_target_channel_absent_from_inputs(self):
        values = np.random.default_rng(5).uniform(size=(40, 3))
        seg = make_segment(values)
        stats = self._stats(seg)
        wins = extract_windows(seg, stats, window_len=8)
        normalized = stats.normalize(seg.values)
        for w in wins[:3]:
            assert w.inputs.shape == (8, 2)  # inputs only
            np.testing.assert_array_equal(
                w.inputs, normalized[w.offset:w.offset + 8, :2])

    def test_label_is_window_mean_of_normalized_target(self):
        values = np.random.default_rng(6).uniform(size=(25, 3))
        seg = make_segment(values)
        stats = self._stats(seg)
        wins = extract_windows(seg, stats, window_len=7)
        normalized = stats.normalize(seg.values)
        for w in wins:
            assert w.y == pytest.approx(
                np.mean(normalized[w.offset:w.offset + 7, 2]), abs=1e-12)

    def test_normalized_inputs_stay_in_unit_interval(self, segments):
        stats = fit_stats(segments)
        for seg in segments[:2]:
            for w in extract_windows(seg, stats, window_len=30, stride=11):
                assert w.inputs.min() >= 0.0 and w.inputs.max() <= 1.0

    @given(t=st.integers(1, 80), window_len=st.integers(1, 80))
    @settings(max_examples=40, deadline=None)
    def test_window_count_property(self, t, window_len):
        seg = make_segment(np.ones((t, 3)))
        stats = NormalizationStats(SPECS, np.zeros(3), np.ones(3))
        wins = extract_windows(seg, stats, window_len=window_len)
        assert len(wins) == max(0, t - window_len + 1)


class TestBalanceWells:
    def test_truncates_to_shortest(self):
        pool = balance_wells({"a": toy_windows(100, "a"), "b": toy_windows(60, "b")},
                             seed=1)
        assert len(pool) == 120
        per = group_by_well(pool)
        assert len(per["a"]) == 60 and len(per["b"]) == 60

    def test_equal_wells_same_multiset_permuted(self):
        wa, wb = toy_windows(40, "a"), toy_windows(40, "b")
        pool = balance_wells({"a": wa, "b": wb}, seed=2)
        assert sorted(w.identity for w in pool) == \
            sorted(w.identity for w in wa + wb)

    def test_single_well_multiset_unchanged(self):
        wa = toy_windows(17, "a")
        pool = balance_wells({"a": wa}, seed=3)
        assert sorted(w.identity for w in pool) == sorted(w.identity for w in wa)

    def test_deterministic_by_seed(self):
        per = {"a": toy_windows(30, "a"), "b": toy_windows(25, "b")}
        ids1 = [w.identity for w in balance_wells(per, seed=9)]
        ids2 = [w.identity for w in balance_wells(per, seed=9)]
        ids3 = [w.identity for w in balance_wells(per, seed=10)]
        assert ids1 == ids2
        assert ids1 != ids3


class TestSubsampleAndSplit:
    def _pool(self, n, wells=("a", "b")):
        pool = []
        for i in range(n):
            well = wells[i % len(wells)]
            pool.append(LabeledWindow(well, f"{well}/s", i, np.zeros((4, 2)), 0.1))
        return pool

    def _stats(self):
        return NormalizationStats(SPECS, np.zeros(3), np.ones(3))

    def test_forced_arithmetic_1000(self):
        train, test = subsample_and_split(self._pool(1000), self._stats(),
                                          0.2, 0.2, seed=4)
        assert len(train) == 160 and len(test) == 40

    def test_forced_arithmetic_10(self):
        train, test = subsample_and_split(self._pool(10), self._stats(),
                                          1.0, 0.2, seed=4)
        assert len(train) == 8 and len(test) == 2

    def test_same_seed_same_membership(self):
        a = subsample_and_split(self._pool(300), self._stats(), 0.5, 0.2, seed=6)
        b = subsample_and_split(self._pool(300), self._stats(), 0.5, 0.2, seed=6)
        assert set(a[0].identities()) == set(b[0].identities())
        assert set(a[1].identities()) == set(b[1].identities())

    def test_disjoint_by_identity(self):
        train, test = subsample_and_split(self._pool(500), self._stats(),
                                          0.4, 0.25, seed=8)
        assert not set(train.identities()) & set(test.identities())

    def test_stratified_by_well(self):
        train, test = subsample_and_split(self._pool(1000), self._stats(),
                                          1.0, 0.2, seed=5)
        for split in (train, test):
            per = group_by_well(split.windows)
            counts = sorted(len(v) for v in per.values())
            assert abs(counts[0] - counts[-1]) <= 1  # proportional per well

    def test_empty_split_is_an_error(self):
        with pytest.raises(ValueError, match="empty train or test"):
            subsample_and_split(self._pool(4), self._stats(), 1.0, 0.9, seed=1)

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            subsample_and_split(self._pool(10), self._stats(), 0.0, 0.2, seed=1)
        with pytest.raises(ValueError):
            subsample_and_split(self._pool(10), self._stats(), 0.5, 1.5, seed=1)


class TestCarveValidation:
    def test_val_carved_from_train_only(self, window_splits):
        train, val, test = window_splits
        assert not set(val.identities()) & set(train.identities())
        assert not set(val.identities()) & set(test.identities())
        assert val.split_tag == "validation"

    def test_prepared_shapes_and_disjointness(self, prepared):
        assert prepared.train_x.dtype == np.float32
        assert prepared.train_y.shape == (len(prepared.train_ids), 1)
        assert prepared.n_features == 5
        assert not set(prepared.train_ids) & set(prepared.test_ids)

    def test_test_read_counter(self, prepared):
        assert prepared.test_reads == 0
        prepared.read_test()
        prepared.read_test()
        assert prepared.test_reads == 2


class TestWindowCache:
    def test_roundtrip(self, tmp_path, window_splits):
        train, _, _ = window_splits
        path = tmp_path / "train.bin"
        save_window_cache(path, train)
        loaded = load_window_cache(path)
        assert loaded.split_tag == train.split_tag
        assert len(loaded) == len(train)
        assert loaded.identities() == train.identities()
        assert loaded.stats.channel_names == train.stats.channel_names
        np.testing.assert_array_equal(loaded.stats.mins, train.stats.mins)
        # values survive the float32 round trip
        got = loaded.windows[3].inputs
        want = train.windows[3].inputs.astype(np.float32).astype(np.float64)
        np.testing.assert_array_equal(got, want)
        assert loaded.windows[3].y == pytest.approx(train.windows[3].y, abs=1e-7)

    def test_materialize_identical_fresh_vs_cached(self, tmp_path, window_splits):
        # float32 training arrays must not depend on the cache round trip
        train, _, _ = window_splits
        path = tmp_path / "t.bin"
        save_window_cache(path, train)
        x1, y1 = train.materialize()
        x2, y2 = load_window_cache(path).materialize()
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(y1, y2)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a cache at all")
        with pytest.raises(ValueError, match="magic"):
            load_window_cache(path)
