from __future__ import annotations

import numpy as np
import pytest

from drillmae.ingest import ChannelSpec, WellSeries, make_channel_specs
from drillmae.segmentation import SegmentationParams, segment_well
from drillmae.synthetic import synth_series
from drillmae.windows import (balance_wells, carve_validation, extract_windows,
                              fit_stats, group_by_well, prepare_data,
                              subsample_and_split)


@pytest.fixture(scope="session")
def channel_specs():
    return make_channel_specs(
        ["WOB", "ROP", "Total Pump Output", "Hole Depth", "Bit Depth"],
        "Total Mud Volume")


@pytest.fixture(scope="session")
def small_params():
    # shrunk windows so short synthetic wells produce several segments
    return SegmentationParams(long_window=200, short_window=20, block_window=300,
                              min_depth=900.0, gap_limit=50, impute_window=20)


@pytest.fixture(scope="session")
def two_wells(channel_specs):
    return [synth_series("well-A", 6000, seed=101, specs=list(channel_specs)),
            synth_series("well-B", 6000, seed=202, specs=list(channel_specs))]


@pytest.fixture(scope="session")
def segments(two_wells, small_params):
    segs = []
    for series in two_wells:
        segs.extend(segment_well(series, small_params))
    assert segs, "synthetic wells must yield segments"
    return segs


@pytest.fixture(scope="session")
def window_splits(segments):
    """Small (train, val, test) WindowSets over the session segments."""
    stats = fit_stats(segments)
    pool = []
    for seg in segments:
        pool.extend(extract_windows(seg, stats, window_len=40, stride=4))
    balanced = balance_wells(group_by_well(pool), seed=5)
    train, test = subsample_and_split(balanced, stats, 0.8, 0.2, seed=5)
    train, val = carve_validation(train, 0.15, seed=5)
    return train, val, test


@pytest.fixture()
def prepared(window_splits):
    train, val, test = window_splits
    return prepare_data(train, val, test)


def make_series(values_by_channel: dict[str, np.ndarray], well_id="w",
                target: str | None = None) -> WellSeries:
    """Series from explicit per-channel arrays; the ``target`` channel (or
    the last one, if unnamed) takes the target role."""
    names = list(values_by_channel)
    target = target if target in names else names[-1]
    specs = [ChannelSpec(n, "target" if n == target else "input") for n in names]
    values = np.column_stack([np.asarray(values_by_channel[n], np.float64)
                              for n in names])
    return WellSeries(well_id, values, tuple(specs))
