"""Deterministic synthetic drilling telemetry.

Generates FORGE-style multichannel 1 Hz wells with alternating regimes
(shallow spud-in, sustained drilling, tripping, idle) so that activity
segmentation has realistic structure to find. Channels are smooth
low-frequency signals with regime gating plus noise; a configurable
fraction of cells is blanked to exercise missing-value handling.

``target_mirror`` makes the target channel an exact copy of one input
channel, which turns the downstream label into the window mean of that
input — a task a working pipeline must learn easily.

Run ``python -m drillmae.synthetic OUT_DIR`` to write the two-well demo
corpus plus a ready-to-use manifest.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ingest import ChannelSpec, WellSeries, make_channel_specs
from .seeding import derive_rng

__all__ = ["SYNTH_CHANNELS", "DEFAULT_INPUTS", "DEFAULT_TARGET", "synth_columns",
           "synth_series", "write_well_csv", "make_demo_corpus"]

SYNTH_CHANNELS = ("WOB", "Rotary RPM", "Total Pump Output", "ROP",
                  "Standpipe Pressure", "Rotary Torque", "Hole Depth",
                  "Bit Depth", "Total Mud Volume")
DEFAULT_INPUTS = ["WOB", "ROP", "Total Pump Output", "Hole Depth", "Bit Depth"]
DEFAULT_TARGET = "Total Mud Volume"


def _smooth_signal(rng: np.random.Generator, n: int, base: float, spread: float,
                   periods=(1500.0, 4200.0, 11000.0), noise: float = 0.0) -> np.ndarray:
    """Sum of random-phase sinusoids: slow, bounded, well away from constant."""
    t = np.arange(n, dtype=np.float64)
    out = np.full(n, base, dtype=np.float64)
    for k, period in enumerate(periods):
        amp = spread / (k + 1.5)
        out += amp * np.sin(2 * np.pi * t / (period * rng.uniform(0.7, 1.3))
                            + rng.uniform(0, 2 * np.pi))
    if noise:
        out += rng.normal(0.0, noise, size=n)
    return out


def _regime_plan(rng: np.random.Generator, n: int) -> list[tuple[str, int]]:
    """Regime sequence: spud-in first, then long drilling runs separated by
    trips/idles. Drilling blocks dominate so default segmentation windows
    still find sustained intervals."""
    plan = [("spud", int(n * 0.04) + 200)]
    remaining = n - plan[0][1]
    while remaining > 0:
        drill = int(rng.uniform(0.35, 0.6) * n)
        plan.append(("drill", min(drill, remaining)))
        remaining -= drill
        if remaining <= 0:
            break
        pause_kind = "trip" if rng.random() < 0.5 else "idle"
        pause = int(rng.uniform(0.02, 0.05) * n)
        plan.append((pause_kind, min(pause, remaining)))
        remaining -= pause
    return plan


def synth_columns(well_id: str, n_samples: int, seed: int,
                  missing_rate: float = 0.0005,
                  target_mirror: str | None = None,
                  period_scale: float = 1.0) -> dict[str, np.ndarray]:
    """All nine synthetic channels for one well, keyed by channel name.

    ``period_scale`` stretches every channel's oscillation periods;
    larger values give slower, smoother telemetry.
    """
    rng = derive_rng(seed, sum(well_id.encode()))
    plan = _regime_plan(rng, n_samples)

    def smooth(base, spread, periods=(1500.0, 4200.0, 11000.0), noise=0.0):
        scaled = tuple(p * period_scale for p in periods)
        return _smooth_signal(rng, n_samples, base, spread, scaled, noise)

    drilling = np.zeros(n_samples, dtype=bool)
    tripping = np.zeros(n_samples, dtype=bool)
    pos = 0
    for kind, length in plan:
        end = min(pos + length, n_samples)
        if kind == "drill":
            drilling[pos:end] = True
        elif kind == "trip":
            tripping[pos:end] = True
        pos = end

    # depth: advances only while drilling; starts just below the
    # shallow-phase cutoff so the spud-in region is excluded
    rate = np.clip(smooth(0.012, 0.006), 0.001, None)
    rate *= drilling
    hole = 950.0 + np.cumsum(rate)
    bit = hole.copy()
    # off bottom outside drilling: a small standoff when idle, a large
    # smooth excursion when tripping; either breaks the depth equality
    off_bottom = ~drilling
    excursion = np.abs(smooth(200.0, 120.0)) + 20.0
    bit[off_bottom] = hole[off_bottom] - np.where(
        tripping[off_bottom], excursion[off_bottom], 5.0)

    wob = np.clip(smooth(18.0, 6.0, noise=0.25), 0.5, None)
    wob *= np.where(drilling, 1.0, 0.05)
    rop = rate * 3600.0 + rng.normal(0, 0.5, n_samples)
    pump = np.clip(smooth(950.0, 180.0, noise=4.0), 50.0, None)
    pump *= np.where(drilling, 1.0, 0.35)
    spp = np.clip(smooth(2400.0, 500.0, noise=12.0), 100.0, None)
    rpm = np.clip(smooth(70.0, 25.0, noise=1.0), 0.0, None)
    torque = np.clip(smooth(11.0, 5.0, noise=0.3), 0.0, None)
    mud = smooth(620.0, 90.0, periods=(2500.0, 7000.0, 19000.0), noise=0.8)
    mud += np.cumsum(np.where(drilling, 0.001, -0.0004))

    columns = {
        "WOB": wob, "Rotary RPM": rpm, "Total Pump Output": pump, "ROP": rop,
        "Standpipe Pressure": spp, "Rotary Torque": torque,
        "Hole Depth": hole, "Bit Depth": bit, "Total Mud Volume": mud,
    }
    if target_mirror is not None:
        if target_mirror not in columns:
            raise ValueError(f"unknown channel {target_mirror!r} for target_mirror")
        columns["Total Mud Volume"] = columns[target_mirror].copy()

    if missing_rate > 0:
        # depth counters stay complete: one NaN there blanks a whole
        # rolling-mean window of the drilling indicator, which no real
        # depth channel does
        for name, col in columns.items():
            if name in ("Hole Depth", "Bit Depth"):
                continue
            holes = rng.random(n_samples) < missing_rate
            col[holes] = np.nan
    return columns


def synth_series(well_id: str, n_samples: int, seed: int,
                 specs: list[ChannelSpec] | None = None,
                 missing_rate: float = 0.0005,
                 target_mirror: str | None = None,
                 period_scale: float = 1.0) -> WellSeries:
    """Synthetic well as an in-memory series (skips the CSV round trip)."""
    specs = specs or make_channel_specs(DEFAULT_INPUTS, DEFAULT_TARGET)
    columns = synth_columns(well_id, n_samples, seed, missing_rate, target_mirror,
                            period_scale)
    values = np.column_stack([columns[s.name] for s in specs])
    return WellSeries(well_id, values, tuple(specs))


def write_well_csv(path, columns: dict[str, np.ndarray], delimiter: str = ",") -> None:
    """Write channels as delimited text; NaN becomes an empty cell."""
    names = list(columns)
    n = len(columns[names[0]])
    with open(path, "w") as fh:
        fh.write(delimiter.join(names) + "\n")
        cols = [columns[name] for name in names]
        for i in range(n):
            fh.write(delimiter.join(
                "" if np.isnan(c[i]) else repr(float(c[i])) for c in cols) + "\n")


def make_demo_corpus(out_dir, n_samples: int = 50_000, seed: int = 11,
                     target_mirror: str | None = None) -> Path:
    """Write the two-well demo corpus and a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, well_id in enumerate(("well-A", "well-B")):
        columns = synth_columns(well_id, n_samples, seed + i,
                                target_mirror=target_mirror)
        write_well_csv(out / f"{well_id}.csv", columns)
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join([
        f"well.well-A = {out / 'well-A.csv'}",
        f"well.well-B = {out / 'well-B.csv'}",
        "channels = " + ",".join(DEFAULT_INPUTS),
        f"target = {DEFAULT_TARGET}",
        f"out_dir = {out / 'runs'}",
        "window_len = 600",
        "stride = 50",
        "subsample_frac = 0.5",
        "test_frac = 0.2",
        "val_frac = 0.1",
        "seed = 7",
        "workers = 1",
        "grid = ae1-lat80-hd2-gru-m20,ae1-lat20-hd1-lstm-m50,"
        "ae2-lat50-hd2-gru-m80,ae1-lat80-hd1-lstm-m20",
        "pretrain_epochs = 2",
        "finetune_epochs = 2",
        "baseline_epochs = 2",
    ]) + "\n")
    return manifest


if __name__ == "__main__":
    import sys

    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_data")
    n = int(sys.argv[2]) if len(sys.argv) > 2 else 50_000
    path = make_demo_corpus(target, n_samples=n)
    print(f"demo corpus written; manifest: {path}")
