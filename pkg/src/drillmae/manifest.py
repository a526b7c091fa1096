"""Experiment manifest: plain ``key = value`` text.

One manifest drives the whole pipeline. Recognized keys:

    well.<id> = <path>            at least one required
    channels  = name,name,...     input channels, in order
    target    = name              the regression target channel
    delimiter = ,                 telemetry file delimiter
    seg.<field> = value           segmentation parameter overrides
    window_len, stride            windowing
    subsample_frac, test_frac, val_frac
    seed, workers, out_dir
    grid = all | name,name,...    design-space override
    learning_rate, batch_size, clip_norm, patience
    pretrain_epochs, finetune_epochs, baseline_epochs

Unknown keys are rejected by name. Caching keys: ``segment_hash``
covers everything upstream of segmentation, ``windows_hash`` adds the
windowing/split fields, so changing the seed invalidates window caches
but not segment caches.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

from .ingest import ChannelSpec, make_channel_specs
from .mae import MaeConfig
from .segmentation import SegmentationParams
from .dse import RunSettings, enumerate_grid

__all__ = ["Manifest", "ManifestError", "parse_manifest"]

_DEFAULT_INPUTS = ["WOB", "ROP", "Total Pump Output", "Hole Depth", "Bit Depth"]
_DEFAULT_TARGET = "Total Mud Volume"

_SEG_FIELDS = {f.name: f.type for f in dc_fields(SegmentationParams)}
_INT_KEYS = {"window_len", "stride", "seed", "workers", "batch_size", "patience",
             "pretrain_epochs", "finetune_epochs", "baseline_epochs"}
_FLOAT_KEYS = {"subsample_frac", "test_frac", "val_frac", "learning_rate",
               "clip_norm"}
_STR_KEYS = {"channels", "target", "delimiter", "out_dir", "grid"}


class ManifestError(ValueError):
    """Invalid manifest; the message names the offending field."""


@dataclass
class Manifest:
    """Validated manifest with defaults filled in."""

    wells: dict[str, Path]
    channels: list[str] = field(default_factory=lambda: list(_DEFAULT_INPUTS))
    target: str = _DEFAULT_TARGET
    delimiter: str = ","
    seg: SegmentationParams = field(default_factory=SegmentationParams)
    window_len: int = 600
    stride: int = 1
    subsample_frac: float = 0.2
    test_frac: float = 0.2
    val_frac: float = 0.1
    seed: int = 7
    workers: int = 1
    out_dir: Path = Path("runs")
    grid: str = "all"
    learning_rate: float = 0.001
    batch_size: int = 64
    clip_norm: float = 1.0
    patience: int = 5
    pretrain_epochs: int = 10
    finetune_epochs: int = 15
    baseline_epochs: int = 15

    def validate(self) -> None:
        if not self.wells:
            raise ManifestError("manifest field 'well.<id>': at least one well required")
        for well_id, path in self.wells.items():
            if not Path(path).is_file():
                raise ManifestError(
                    f"manifest field 'well.{well_id}': path does not exist: {path}")
        if self.target in self.channels:
            raise ManifestError("manifest field 'target': target channel cannot "
                                "also be an input channel")
        for key in ("window_len", "stride", "seed", "workers", "batch_size",
                    "patience", "pretrain_epochs", "finetune_epochs",
                    "baseline_epochs"):
            if int(getattr(self, key)) < (0 if key == "seed" else 1):
                raise ManifestError(f"manifest field {key!r}: must be positive")
        for key in ("subsample_frac", "test_frac"):
            if not 0.0 < getattr(self, key) <= 1.0:
                raise ManifestError(f"manifest field {key!r}: must lie in (0, 1]")
        if not 0.0 < self.val_frac < 1.0:
            raise ManifestError("manifest field 'val_frac': must lie in (0, 1)")
        self.grid_configs()  # raises on unparseable names

    def channel_specs(self) -> list[ChannelSpec]:
        return make_channel_specs(self.channels, self.target)

    def grid_configs(self) -> list[MaeConfig]:
        if self.grid.strip() == "all":
            return enumerate_grid()
        try:
            return [MaeConfig.from_name(n) for n in self.grid.split(",") if n.strip()]
        except ValueError as exc:
            raise ManifestError(f"manifest field 'grid': {exc}") from exc

    def run_settings(self) -> RunSettings:
        return RunSettings(self.learning_rate, self.batch_size, self.clip_norm,
                           self.patience, self.pretrain_epochs,
                           self.finetune_epochs, self.baseline_epochs)

    # -- cache keys -------------------------------------------------------

    def segment_hash(self) -> str:
        parts = [f"{wid}={self.wells[wid]}" for wid in sorted(self.wells)]
        parts += [",".join(self.channels), self.target, self.delimiter]
        parts += [f"{f.name}={getattr(self.seg, f.name)}"
                  for f in dc_fields(SegmentationParams)]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]

    def windows_hash(self) -> str:
        parts = [self.segment_hash(), str(self.window_len), str(self.stride),
                 repr(self.subsample_frac), repr(self.test_frac),
                 repr(self.val_frac), str(self.seed)]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


def _parse_scalar(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ManifestError(f"manifest field {key!r}: cannot parse {raw!r}") from None
    return raw


def parse_manifest(path, overrides: dict | None = None) -> Manifest:
    """Parse and validate a manifest file.

    ``overrides`` (already-typed values keyed like manifest fields) win
    over file contents; command-line flags land here.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")

    wells: dict[str, Path] = {}
    seg_kwargs: dict = {}
    values: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ManifestError(f"{path.name}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key.startswith("well."):
            wells[key[5:]] = Path(raw)
        elif key.startswith("seg."):
            seg_field = key[4:]
            if seg_field not in _SEG_FIELDS:
                raise ManifestError(f"manifest field {key!r}: unknown segmentation "
                                    f"parameter")
            if seg_field in ("hole_depth_channel", "bit_depth_channel"):
                seg_kwargs[seg_field] = raw
            elif seg_field in ("long_window", "short_window", "block_window",
                               "gap_limit", "impute_window"):
                seg_kwargs[seg_field] = int(raw)
            else:
                seg_kwargs[seg_field] = float(raw)
        elif key in _INT_KEYS | _FLOAT_KEYS | _STR_KEYS:
            values[key] = _parse_scalar(key, raw)
        else:
            raise ManifestError(f"manifest field {key!r}: unknown key")

    if "channels" in values:
        values["channels"] = [c.strip() for c in values["channels"].split(",") if c.strip()]
    if "out_dir" in values:
        values["out_dir"] = Path(values["out_dir"])

    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key == "out_dir":
            val = Path(val)
        values[key] = val

    try:
        seg = SegmentationParams(**seg_kwargs)
    except ValueError as exc:
        raise ManifestError(f"manifest field 'seg.*': {exc}") from exc
    try:
        man = Manifest(wells=wells, seg=seg, **values)
    except TypeError as exc:
        raise ManifestError(str(exc)) from exc
    man.validate()
    return man
