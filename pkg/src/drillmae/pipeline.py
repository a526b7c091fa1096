"""Manifest-driven orchestration with restartable intermediates.

Each stage is keyed by a content hash of the manifest fields it depends
on: segment caches survive seed changes, window caches do not. Stages
load their cache when present and rebuild otherwise.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .ingest import ChannelSpec, WellSeries, load_well
from .manifest import Manifest
from .segmentation import DrillingSegment, segment_well
from .windows import (PreparedData, WindowSet, balance_wells, carve_validation,
                      extract_windows, fit_stats, group_by_well,
                      load_window_cache, prepare_data, save_window_cache,
                      subsample_and_split)

__all__ = ["load_wells", "get_segments", "build_window_sets", "prepare",
           "cache_dir"]

log = logging.getLogger(__name__)


def cache_dir(man: Manifest) -> Path:
    path = Path(man.out_dir) / "cache"
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_wells(man: Manifest) -> list[WellSeries]:
    specs = man.channel_specs()
    return [load_well(path, specs, delimiter=man.delimiter, well_id=well_id)
            for well_id, path in sorted(man.wells.items())]


# -- segment cache ---------------------------------------------------------------

def _save_segments(path: Path, segments: list[DrillingSegment]) -> None:
    meta = []
    arrays = {}
    for i, seg in enumerate(segments):
        meta.append({
            "well_id": seg.well_id,
            "segment_id": seg.segment_id,
            "start_index": seg.start_index,
            "channels": [[c.name, c.role] for c in seg.channel_specs],
        })
        arrays[f"seg{i}_values"] = seg.values
        arrays[f"seg{i}_indices"] = seg.indices
    np.savez_compressed(path, meta=json.dumps(meta), **arrays)


def _load_segments(path: Path) -> list[DrillingSegment]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        return [DrillingSegment(
            well_id=m["well_id"], segment_id=m["segment_id"],
            start_index=int(m["start_index"]),
            values=data[f"seg{i}_values"],
            channel_specs=tuple(ChannelSpec(n, r) for n, r in m["channels"]),
            indices=data[f"seg{i}_indices"],
        ) for i, m in enumerate(meta)]


def get_segments(man: Manifest, use_cache: bool = True) -> list[DrillingSegment]:
    """All drilling segments of all wells, cached by segmentation hash."""
    path = cache_dir(man) / f"segments_{man.segment_hash()}.npz"
    if use_cache and path.is_file():
        log.info("segments: loading cache %s", path.name)
        return _load_segments(path)
    segments = []
    for series in load_wells(man):
        found = segment_well(series, man.seg)
        log.info("segments: well %s -> %d segment(s)", series.well_id, len(found))
        segments.extend(found)
    if not segments:
        raise ValueError("segmentation produced no drilling segments; "
                         "check the segmentation parameters")
    if use_cache:
        _save_segments(path, segments)
    return segments


# -- window sets -----------------------------------------------------------------

def build_window_sets(man: Manifest, use_cache: bool = True
                      ) -> tuple[WindowSet, WindowSet, WindowSet]:
    """(train, validation, test) window sets, cached by windows hash."""
    cache = cache_dir(man)
    tag_path = {tag: cache / f"windows_{man.windows_hash()}_{tag}.bin"
                for tag in ("train", "validation", "test")}
    if use_cache and all(p.is_file() for p in tag_path.values()):
        log.info("windows: loading caches windows_%s_*.bin", man.windows_hash())
        return tuple(load_window_cache(tag_path[t])
                     for t in ("train", "validation", "test"))

    segments = get_segments(man, use_cache)
    stats = fit_stats(segments)
    pool = []
    for seg in segments:
        pool.extend(extract_windows(seg, stats, man.window_len, man.stride))
    if not pool:
        raise ValueError(f"no windows: segments shorter than window_len="
                         f"{man.window_len}")
    balanced = balance_wells(group_by_well(pool), man.seed)
    train, test = subsample_and_split(balanced, stats, man.subsample_frac,
                                      man.test_frac, man.seed)
    train, val = carve_validation(train, man.val_frac, man.seed)
    log.info("windows: pool=%d balanced=%d train=%d val=%d test=%d",
             len(pool), len(balanced), len(train), len(val), len(test))
    if use_cache:
        for tag, ws in (("train", train), ("validation", val), ("test", test)):
            save_window_cache(tag_path[tag], ws)
    return train, val, test


def prepare(man: Manifest, use_cache: bool = True) -> PreparedData:
    """Training-ready arrays for the manifest's pipeline configuration."""
    train, val, test = build_window_sets(man, use_cache)
    return prepare_data(train, val, test)
