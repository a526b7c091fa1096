"""Segments to normalized, labeled, leakage-safe windows.

Normalization statistics are per-channel global min/max fitted on the
union of all drilling segments from all wells, before any window is
extracted and before any split. Windows are stride-1 (configurable)
views into the normalized segment matrix; the label is the temporal
mean of the normalized target channel over the window, and the target
column is removed from the inputs.

Pool construction: per-well shuffle + truncate-to-shortest balancing,
then a seeded subsample, then an 80/20-style split stratified by well.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ingest import ChannelSpec
from .segmentation import DrillingSegment
from .seeding import derive_rng

__all__ = ["NormalizationStats", "LabeledWindow", "WindowSet", "PreparedData",
           "fit_stats", "extract_windows", "balance_wells", "group_by_well",
           "subsample_and_split", "carve_validation", "prepare_data",
           "save_window_cache", "load_window_cache"]

# rng stream tags
_STREAM_BALANCE = 10
_STREAM_SUBSAMPLE = 11
_STREAM_SPLIT = 12
_STREAM_VAL = 13


# -- normalization -------------------------------------------------------------

@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel global min/max over the union of all segments."""

    channels: tuple[ChannelSpec, ...]
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if len(self.mins) != len(self.channels) or len(self.maxs) != len(self.channels):
            raise ValueError("stats arrays must match channel count")
        if np.any(self.maxs < self.mins):
            raise ValueError("max must be >= min per channel")

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)

    @property
    def degenerate(self) -> np.ndarray:
        """Channels with max == min; they normalize to 0 everywhere."""
        return self.maxs == self.mins

    def normalize(self, values: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = (values - self.mins) / safe
        if np.any(self.degenerate):
            out[..., self.degenerate] = 0.0
        return out

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return values * (self.maxs - self.mins) + self.mins


def fit_stats(segments: list[DrillingSegment]) -> NormalizationStats:
    """Global per-channel extrema over all samples of all segments."""
    if not segments:
        raise ValueError("fit_stats needs at least one segment")
    channels = segments[0].channel_specs
    for seg in segments:
        if seg.channel_specs != channels:
            raise ValueError("segments disagree on channel layout")
    mins = np.min([seg.values.min(axis=0) for seg in segments], axis=0)
    maxs = np.max([seg.values.max(axis=0) for seg in segments], axis=0)
    return NormalizationStats(channels, mins.astype(np.float64), maxs.astype(np.float64))


# -- windows -------------------------------------------------------------------

@dataclass
class LabeledWindow:
    """One normalized input window with its scalar label.

    ``inputs`` is (window_len, F) in [0, 1] and excludes the target
    channel; it is usually a view into the parent segment's normalized
    matrix, so keeping many windows is cheap.
    """

    well_id: str
    segment_id: str
    offset: int
    inputs: np.ndarray
    y: float

    @property
    def identity(self) -> tuple[str, str, int]:
        return (self.well_id, self.segment_id, self.offset)


@dataclass
class WindowSet:
    """A list of windows sharing one set of normalization stats."""

    windows: list[LabeledWindow]
    stats: NormalizationStats
    split_tag: str = "unsplit"

    def __len__(self) -> int:
        return len(self.windows)

    def identities(self) -> list[tuple[str, str, int]]:
        return [w.identity for w in self.windows]

    def materialize(self, dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
        """Stack windows into contiguous (N, T, F) inputs and (N,) labels."""
        if not self.windows:
            raise ValueError(f"window set {self.split_tag!r} is empty")
        x = np.stack([w.inputs for w in self.windows]).astype(dtype)
        y = np.array([w.y for w in self.windows], dtype=dtype)
        return x, y


def extract_windows(seg: DrillingSegment, stats: NormalizationStats,
                    window_len: int = 600, stride: int = 1) -> list[LabeledWindow]:
    """All windows of one segment, normalized and labeled.

    Window i covers rows [i, i + window_len); a segment shorter than the
    window yields no windows. The label is the mean of the normalized
    target channel over the window.
    """
    if window_len < 1 or stride < 1:
        raise ValueError("window_len and stride must be >= 1")
    t = len(seg)
    if t < window_len:
        return []
    if seg.channel_specs != stats.channels:
        raise ValueError("segment channel layout does not match stats")
    roles = [c.role for c in seg.channel_specs]
    input_cols = [i for i, r in enumerate(roles) if r == "input"]
    target_col = roles.index("target")

    norm = stats.normalize(seg.values)
    inputs_matrix = np.ascontiguousarray(norm[:, input_cols])
    target = np.ascontiguousarray(norm[:, target_col])

    offsets = np.arange(0, t - window_len + 1, stride)
    labels = sliding_window_view(target, window_len).mean(axis=-1)[offsets]
    return [LabeledWindow(seg.well_id, seg.segment_id, int(off),
                          inputs_matrix[off:off + window_len], float(labels[k]))
            for k, off in enumerate(offsets)]


def group_by_well(windows: list[LabeledWindow]) -> dict[str, list[LabeledWindow]]:
    per_well: dict[str, list[LabeledWindow]] = {}
    for w in windows:
        per_well.setdefault(w.well_id, []).append(w)
    return per_well


def balance_wells(per_well: dict[str, list[LabeledWindow]], seed: int) -> list[LabeledWindow]:
    """Equalize well contributions: shuffle each well's list with the
    seeded generator, truncate to the shortest well, concatenate."""
    if not per_well:
        return []
    rng = derive_rng(seed, _STREAM_BALANCE)
    floor = min(len(v) for v in per_well.values())
    pool: list[LabeledWindow] = []
    for well_id in sorted(per_well):
        lst = per_well[well_id]
        order = rng.permutation(len(lst))[:floor]
        pool.extend(lst[i] for i in order)
    return pool


def _stratified_quotas(counts: list[int], total: int) -> list[int]:
    """Split ``total`` across strata proportionally to ``counts`` using
    largest remainders, so the quotas sum to exactly ``total``."""
    n = sum(counts)
    raw = [c * total / n for c in counts]
    quotas = [int(q) for q in raw]
    short = total - sum(quotas)
    remainders = sorted(range(len(counts)), key=lambda i: (-(raw[i] - quotas[i]), i))
    for i in remainders[:short]:
        quotas[i] += 1
    return quotas


def subsample_and_split(pool: list[LabeledWindow], stats: NormalizationStats,
                        subsample_frac: float, test_frac: float,
                        seed: int) -> tuple[WindowSet, WindowSet]:
    """Seeded subsample of the balanced pool, then a train/test split.

    The subsample keeps floor(N * subsample_frac) windows; the split
    puts exactly floor(n_sub * (1 - test_frac)) windows in train,
    allocated across wells by largest remainder so both wells stay
    proportionally represented. Train and test are disjoint by window
    identity.
    """
    if not (0.0 < subsample_frac <= 1.0 and 0.0 < test_frac <= 1.0):
        raise ValueError("fractions must lie in (0, 1]")
    n = len(pool)
    n_sub = int(n * subsample_frac)
    order = derive_rng(seed, _STREAM_SUBSAMPLE).permutation(n)[:n_sub]
    subsample = [pool[i] for i in order]

    n_train = int(n_sub * (1.0 - test_frac))
    if n_train == 0 or n_sub - n_train == 0:
        raise ValueError(
            f"split of {n_sub} subsampled windows gives empty train or test "
            f"(train={n_train})")

    per_well = group_by_well(subsample)
    well_ids = sorted(per_well)
    quotas = _stratified_quotas([len(per_well[w]) for w in well_ids], n_train)

    rng = derive_rng(seed, _STREAM_SPLIT)
    train: list[LabeledWindow] = []
    test: list[LabeledWindow] = []
    for well_id, quota in zip(well_ids, quotas):
        lst = per_well[well_id]
        order = rng.permutation(len(lst))
        train.extend(lst[i] for i in order[:quota])
        test.extend(lst[i] for i in order[quota:])
    return (WindowSet(train, stats, "train"), WindowSet(test, stats, "test"))


def carve_validation(train: WindowSet, val_frac: float,
                     seed: int) -> tuple[WindowSet, WindowSet]:
    """Carve a validation subset out of the train split, stratified by well.

    The test split stays untouched; early stopping monitors this carve.
    """
    if not (0.0 < val_frac < 1.0):
        raise ValueError("val_frac must lie in (0, 1)")
    n_val = int(len(train) * val_frac)
    if n_val == 0:
        raise ValueError(f"validation carve of {len(train)} train windows is empty; "
                         "increase val_frac or the pool size")
    per_well = group_by_well(train.windows)
    well_ids = sorted(per_well)
    quotas = _stratified_quotas([len(per_well[w]) for w in well_ids], n_val)

    rng = derive_rng(seed, _STREAM_VAL)
    kept: list[LabeledWindow] = []
    val: list[LabeledWindow] = []
    for well_id, quota in zip(well_ids, quotas):
        lst = per_well[well_id]
        order = rng.permutation(len(lst))
        val.extend(lst[i] for i in order[:quota])
        kept.extend(lst[i] for i in order[quota:])
    if not kept:
        raise ValueError("validation carve consumed the entire train split")
    return (WindowSet(kept, train.stats, "train"), WindowSet(val, train.stats, "validation"))


# -- training-ready arrays -------------------------------------------------------

@dataclass
class PreparedData:
    """Contiguous float32 arrays for the three splits plus bookkeeping.

    ``read_test`` is the only sanctioned access to the test arrays; it
    counts reads so the harness can assert the test set is touched
    exactly once per model.
    """

    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    stats: NormalizationStats
    train_ids: list[tuple[str, str, int]]
    val_ids: list[tuple[str, str, int]]
    test_ids: list[tuple[str, str, int]]
    test_reads: int = 0

    @property
    def window_len(self) -> int:
        return self.train_x.shape[1]

    @property
    def n_features(self) -> int:
        return self.train_x.shape[2]

    def read_test(self) -> tuple[np.ndarray, np.ndarray]:
        self.test_reads += 1
        return self.test_x, self.test_y


def prepare_data(train: WindowSet, val: WindowSet, test: WindowSet) -> PreparedData:
    """Materialize the three splits; labels become (N, 1) columns to match
    the scalar regression head's output shape."""
    tx, ty = train.materialize()
    vx, vy = val.materialize()
    sx, sy = test.materialize()
    train_ids, val_ids, test_ids = train.identities(), val.identities(), test.identities()
    overlap = set(train_ids + val_ids) & set(test_ids)
    if overlap:
        raise ValueError(f"test windows leaked into train/val: {sorted(overlap)[:3]}")
    return PreparedData(tx, ty[:, None], vx, vy[:, None], sx, sy[:, None],
                        train.stats, train_ids, val_ids, test_ids)


# -- binary window cache ---------------------------------------------------------

_CACHE_MAGIC = b"DMWINC\x00\x01"


def save_window_cache(path, ws: WindowSet) -> None:
    """Write a window set as little-endian binary records.

    Header: versioned magic, window length, input feature count, split
    tag, then per-channel stats (name, role, min, max). Records follow:
    well id, segment id, offset, the (window_len x F) float32 input
    matrix, and the float32 label.
    """
    if not ws.windows:
        raise ValueError("refusing to cache an empty window set")
    window_len, n_feat = ws.windows[0].inputs.shape
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        tag = ws.split_tag.encode()
        fh.write(struct.pack("<IIH", window_len, n_feat, len(tag)) + tag)
        fh.write(struct.pack("<I", len(ws.stats.channels)))
        for i, ch in enumerate(ws.stats.channels):
            nb, rb = ch.name.encode(), ch.role.encode()
            fh.write(struct.pack("<H", len(nb)) + nb)
            fh.write(struct.pack("<H", len(rb)) + rb)
            fh.write(struct.pack("<dd", float(ws.stats.mins[i]), float(ws.stats.maxs[i])))
        fh.write(struct.pack("<I", len(ws.windows)))
        for w in ws.windows:
            wb, sb = w.well_id.encode(), w.segment_id.encode()
            fh.write(struct.pack("<H", len(wb)) + wb)
            fh.write(struct.pack("<H", len(sb)) + sb)
            fh.write(struct.pack("<I", w.offset))
            fh.write(np.ascontiguousarray(w.inputs, dtype="<f4").tobytes())
            fh.write(struct.pack("<f", w.y))


def load_window_cache(path) -> WindowSet:
    """Read a cache written by :func:`save_window_cache`."""
    data = Path(path).read_bytes()
    if data[:8] != _CACHE_MAGIC:
        raise ValueError(f"{path}: not a window cache (bad magic)")
    off = 8

    def take(fmt):
        nonlocal off
        vals = struct.unpack_from(fmt, data, off)
        off += struct.calcsize(fmt)
        return vals

    def take_str(fmt="<H"):
        nonlocal off
        (ln,) = take(fmt)
        s = data[off:off + ln].decode()
        off += ln
        return s

    window_len, n_feat, taglen = take("<IIH")
    tag = data[off:off + taglen].decode(); off += taglen
    (n_channels,) = take("<I")
    channels, mins, maxs = [], [], []
    for _ in range(n_channels):
        name = take_str()
        role = take_str()
        lo, hi = take("<dd")
        channels.append(ChannelSpec(name, role))
        mins.append(lo)
        maxs.append(hi)
    stats = NormalizationStats(tuple(channels), np.array(mins), np.array(maxs))

    (n_records,) = take("<I")
    block = window_len * n_feat
    windows = []
    for _ in range(n_records):
        well_id = take_str()
        segment_id = take_str()
        (offset,) = take("<I")
        inputs = np.frombuffer(data, dtype="<f4", count=block, offset=off)
        inputs = inputs.reshape(window_len, n_feat).astype(np.float64)
        off += block * 4
        (y,) = take("<f")
        windows.append(LabeledWindow(well_id, segment_id, int(offset), inputs, float(y)))
    return WindowSet(windows, stats, tag)
