"""Per-well telemetry ingest.

Loads delimited text with a single header row, selects the configured
channels in spec order (independent of file column order) and returns a
validated in-memory series. Unparseable or empty cells become NaN and
are handled downstream by segmentation, whose mask conditions treat
missing values as false.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

__all__ = ["ChannelSpec", "WellSeries", "Diagnostic", "load_well",
           "validate_series", "series_summary", "make_channel_specs"]

ROLES = ("input", "target", "auxiliary")


@dataclass(frozen=True)
class ChannelSpec:
    """One named telemetry channel and its role in the pipeline."""

    name: str
    role: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"channel role must be one of {ROLES}, got {self.role!r}")
        if not self.name:
            raise ValueError("channel name must be non-empty")


def make_channel_specs(inputs: list[str], target: str,
                       auxiliary: list[str] | None = None) -> list[ChannelSpec]:
    """Build and validate a channel spec list (inputs, then target, then aux)."""
    specs = [ChannelSpec(n, "input") for n in inputs]
    specs.append(ChannelSpec(target, "target"))
    specs.extend(ChannelSpec(n, "auxiliary") for n in (auxiliary or []))
    validate_channel_specs(specs)
    return specs


def validate_channel_specs(specs: list[ChannelSpec]) -> None:
    targets = [s for s in specs if s.role == "target"]
    if len(targets) != 1:
        raise ValueError(f"exactly one target channel required, got {len(targets)}")
    inputs = [s.name for s in specs if s.role == "input"]
    if len(set(inputs)) != len(inputs):
        raise ValueError("input channel names must be unique")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("channel names must be unique across roles")


@dataclass
class WellSeries:
    """Raw multichannel telemetry for one well (1 Hz, row index = time).

    ``values`` is (T, C) float64 with NaN for missing cells; columns
    follow ``channel_specs`` order.
    """

    well_id: str
    values: np.ndarray
    channel_specs: tuple[ChannelSpec, ...]
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        self.channel_specs = tuple(self.channel_specs)
        validate_channel_specs(list(self.channel_specs))
        if self.values.ndim != 2 or self.values.shape[1] != len(self.channel_specs):
            raise ValueError("values must be (T, n_channels)")
        if self.values.shape[0] < 1:
            raise ValueError("series must contain at least one row")
        if self.timestamps is not None:
            if len(self.timestamps) != len(self.values):
                raise ValueError("timestamps length must match values")
            if np.any(np.diff(self.timestamps) < 0):
                raise ValueError("timestamps must be monotone")

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.channel_specs)

    @property
    def target_name(self) -> str:
        return next(s.name for s in self.channel_specs if s.role == "target")

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.channel_specs if s.role == "input")

    def __len__(self) -> int:
        return self.values.shape[0]

    def channel(self, name: str) -> np.ndarray:
        try:
            col = self.channel_names.index(name)
        except ValueError:
            raise KeyError(f"well {self.well_id!r} has no channel {name!r}") from None
        return self.values[:, col]


def load_well(path, specs: list[ChannelSpec], delimiter: str = ",",
              well_id: str | None = None,
              timestamp_column: str | None = None) -> WellSeries:
    """Read one well's telemetry file.

    The header must contain every requested channel name; columns are
    reordered to spec order. Cells that do not parse as numbers (and
    empty cells) become NaN.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"telemetry file not found: {path}")
    validate_channel_specs(specs)

    frame = pd.read_csv(path, sep=delimiter, dtype=str, skipinitialspace=True)
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [s.name for s in specs if s.name not in frame.columns]
    if missing:
        raise ValueError(f"{path.name}: missing column(s) {missing}")
    if len(frame) == 0:
        raise ValueError(f"{path.name}: no data rows")

    cols = [pd.to_numeric(frame[s.name], errors="coerce").to_numpy(np.float64)
            for s in specs]
    values = np.column_stack(cols)

    timestamps = None
    if timestamp_column is not None:
        if timestamp_column not in frame.columns:
            raise ValueError(f"{path.name}: missing timestamp column {timestamp_column!r}")
        timestamps = pd.to_numeric(frame[timestamp_column], errors="coerce").to_numpy(np.float64)

    return WellSeries(well_id or path.stem, values, tuple(specs), timestamps)


@dataclass(frozen=True)
class Diagnostic:
    """One data-quality finding from validation."""

    channel: str
    kind: str       # "missing_values" | "zero_variance"
    count: int
    message: str


def validate_series(series: WellSeries) -> list[Diagnostic]:
    """Report per-channel data-quality issues; never mutates the series."""
    out: list[Diagnostic] = []
    for i, spec in enumerate(series.channel_specs):
        col = series.values[:, i]
        n_missing = int(np.count_nonzero(np.isnan(col)))
        if n_missing:
            out.append(Diagnostic(spec.name, "missing_values", n_missing,
                                  f"{spec.name}: {n_missing} missing value(s)"))
        finite = col[~np.isnan(col)]
        if finite.size and np.all(finite == finite[0]):
            out.append(Diagnostic(spec.name, "zero_variance", len(finite),
                                  f"{spec.name}: constant channel (zero variance)"))
    return out


def series_summary(series: WellSeries) -> list[dict]:
    """Per-channel stat rows (missing count, min, max) for reporting."""
    rows = []
    for i, spec in enumerate(series.channel_specs):
        col = series.values[:, i]
        finite = col[~np.isnan(col)]
        rows.append({
            "channel": spec.name,
            "role": spec.role,
            "rows": len(col),
            "missing": int(np.count_nonzero(np.isnan(col))),
            "min": float(finite.min()) if finite.size else float("nan"),
            "max": float(finite.max()) if finite.size else float("nan"),
        })
    return rows
