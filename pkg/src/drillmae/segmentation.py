"""Isolation of sustained drilling activity.

Three stages: a per-timestep drilling indicator from physical
conditions on the depth channels, two rolling-mean smoothing passes
that drop flicker and keep only large coherent drilling blocks, and
grouping of the surviving timesteps into segments with within-segment
imputation so no NaN reaches the windowing step.

Numerical contract: full-window rolling means are computed so that each
value is bit-identical to ``np.mean`` of the corresponding slice (the
vectorized path uses the same pairwise reduction over contiguous rows),
and boolean rolling fractions use exact integer counts. A naive
per-sample reference implementation therefore reproduces every mask
decision exactly, not just approximately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ingest import ChannelSpec, WellSeries

__all__ = ["SegmentationParams", "DrillingSegment", "base_mask", "smooth_mask",
           "group_segments", "segment_well", "rolling_mean", "rolling_fraction"]


@dataclass(frozen=True)
class SegmentationParams:
    """Windows, thresholds and tolerances for activity isolation.

    All windows are in samples (1 Hz). Threshold comparisons are strict.
    The depth-equality condition uses an absolute tolerance because the
    two depth sensors rarely agree bit-exactly.
    """

    long_window: int = 10_000
    short_window: int = 100
    short_threshold: float = 0.3
    block_window: int = 20_000
    block_threshold: float = 0.6
    min_depth: float = 1000.0
    gap_limit: int = 100
    impute_window: int = 100
    depth_tolerance: float = 0.01
    hole_depth_channel: str = "Hole Depth"
    bit_depth_channel: str = "Bit Depth"

    def __post_init__(self):
        if min(self.long_window, self.short_window, self.block_window,
               self.impute_window) < 1:
            raise ValueError("all windows must be >= 1")
        if not (0.0 < self.short_threshold < 1.0 and 0.0 < self.block_threshold < 1.0):
            raise ValueError("thresholds must lie in (0, 1)")
        if self.gap_limit < 1:
            raise ValueError("gap_limit must be >= 1")
        if self.depth_tolerance < 0:
            raise ValueError("depth_tolerance must be >= 0")


@dataclass
class DrillingSegment:
    """One sustained drilling interval, fully finite after imputation.

    ``values`` holds the retained rows only (non-retained samples inside
    a tolerated gap are not resurrected); ``indices`` maps each row back
    to its sample index in the parent series.
    """

    well_id: str
    segment_id: str
    start_index: int
    values: np.ndarray
    channel_specs: tuple[ChannelSpec, ...]
    indices: np.ndarray

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError("segment must contain at least one sample")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"segment {self.segment_id} contains non-finite values "
                             "after imputation")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.channel_specs)

    def channel(self, name: str) -> np.ndarray:
        return self.values[:, self.channel_names.index(name)]


# -- rolling statistics ------------------------------------------------------

def rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing rolling mean with partial-prefix warm-up.

    For t >= window-1 the value is bitwise np.mean(x[t-window+1 : t+1]);
    for earlier t it is np.mean over the available prefix.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    out = np.empty(n, dtype=np.float64)
    for t in range(min(window - 1, n)):
        out[t] = np.mean(x[:t + 1])
    if n >= window:
        out[window - 1:] = sliding_window_view(x, window).mean(axis=-1)
    return out


def rolling_fraction(mask: np.ndarray, window: int) -> np.ndarray:
    """Trailing fraction of true values with partial-prefix warm-up.

    Counts are exact integers, so the result is bitwise identical to the
    rolling mean of the 0/1 float sequence regardless of summation order.
    """
    m = np.asarray(mask, dtype=bool).astype(np.int64)
    n = len(m)
    csum = np.cumsum(m)
    counts = csum.copy()
    if n > window:
        counts[window:] -= csum[:-window]
    denom = np.minimum(np.arange(1, n + 1), window).astype(np.float64)
    return counts / denom


# -- stage 1: timestep-level drilling indicator -------------------------------

def base_mask(series: WellSeries, params: SegmentationParams) -> np.ndarray:
    """True where all three drilling conditions hold.

    Conditions: the long rolling mean of hole depth is increasing
    (adjacent first difference > 0; undefined at t=0), hole depth equals
    bit depth within tolerance (on-bottom), and hole depth exceeds the
    shallow-phase cutoff. Any condition on NaN evaluates false.
    """
    names = series.channel_names
    for required in (params.hole_depth_channel, params.bit_depth_channel):
        if required not in names:
            raise ValueError(f"series {series.well_id!r} lacks required channel "
                             f"{required!r}")
    hd = series.channel(params.hole_depth_channel)
    bd = series.channel(params.bit_depth_channel)

    smoothed = rolling_mean(hd, params.long_window)
    diff = np.empty_like(smoothed)
    diff[0] = np.nan  # first difference undefined at t=0
    diff[1:] = smoothed[1:] - smoothed[:-1]

    with np.errstate(invalid="ignore"):
        deepening = diff > 0.0
        on_bottom = np.abs(hd - bd) <= params.depth_tolerance
        below_surface = hd > params.min_depth
    return deepening & on_bottom & below_surface


# -- stage 2: two-pass smoothing ----------------------------------------------

def smooth_mask(mask: np.ndarray, params: SegmentationParams) -> np.ndarray:
    """Keep only flagged timesteps inside sustained drilling regions.

    Pass 1 drops flagged timesteps whose trailing short-window drilling
    fraction is not above the short threshold (flicker removal); pass 2
    additionally requires the trailing block-window fraction of pass-1
    survivors to exceed the block threshold (large coherent blocks only).
    """
    m = np.asarray(mask, dtype=bool)
    pass1 = m & (rolling_fraction(m, params.short_window) > params.short_threshold)
    pass2 = pass1 & (rolling_fraction(pass1, params.block_window) > params.block_threshold)
    return pass2


# -- stage 3: grouping and imputation -----------------------------------------

def _fill_forward(col: np.ndarray) -> np.ndarray:
    # leading NaNs map to index 0 and therefore stay NaN
    idx = np.where(np.isnan(col), 0, np.arange(len(col)))
    np.maximum.accumulate(idx, out=idx)
    return col[idx]


def _impute_column(col: np.ndarray, window: int) -> np.ndarray:
    """Centered rolling-mean imputation, then backward fill, then forward fill.

    The centered mean uses a symmetric stencil of ``window // 2`` samples
    on each side and only applies where the full stencil fits inside the
    segment; it averages the available (non-missing) neighbors. Edge
    positions are left to the fills.
    """
    out = col.copy()
    half = window // 2
    n = len(col)
    for j in np.flatnonzero(np.isnan(col)):
        if j - half >= 0 and j + half < n:
            neighborhood = col[j - half:j + half + 1]
            finite = neighborhood[~np.isnan(neighborhood)]
            if finite.size:
                out[j] = np.mean(finite)
    out = _fill_forward(out[::-1])[::-1]  # backward fill
    out = _fill_forward(out)
    return out


def group_segments(keep: np.ndarray, series: WellSeries,
                   params: SegmentationParams) -> list[DrillingSegment]:
    """Partition retained indices into runs and materialize segments.

    A run breaks where the gap between consecutive retained indices
    exceeds ``gap_limit``. Each segment holds only the retained rows;
    remaining NaNs are imputed per channel.
    """
    keep = np.asarray(keep, dtype=bool)
    if len(keep) != len(series):
        raise ValueError("mask length does not match series length")
    retained = np.flatnonzero(keep)
    if retained.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(retained) > params.gap_limit) + 1
    segments = []
    for k, run in enumerate(np.split(retained, breaks)):
        values = series.values[run].astype(np.float64, copy=True)
        for c in range(values.shape[1]):
            if np.any(np.isnan(values[:, c])):
                values[:, c] = _impute_column(values[:, c], params.impute_window)
                if np.any(np.isnan(values[:, c])):
                    raise ValueError(
                        f"channel {series.channel_names[c]!r} is all-missing in "
                        f"segment {k} of well {series.well_id!r}")
        segments.append(DrillingSegment(
            well_id=series.well_id,
            segment_id=f"{series.well_id}/{k}",
            start_index=int(run[0]),
            values=values,
            channel_specs=series.channel_specs,
            indices=run.copy(),
        ))
    return segments


def segment_well(series: WellSeries, params: SegmentationParams) -> list[DrillingSegment]:
    """Full three-stage segmentation of one well."""
    return group_segments(smooth_mask(base_mask(series, params), params),
                          series, params)
