"""Design-space exploration harness.

Enumerates the full factorial grid (2 encoder depths x 3 latent widths
x 2 header depths x 2 cells x 3 masking ratios = 72 configurations),
executes every configuration plus the two supervised baselines on
identical splits, and produces the analysis artifacts: a run ledger, a
ranking with percent deltas against both baselines, per-dimension
box-plot source data, and a Pearson correlation matrix between design
dimensions and performance metrics.

Each run is seeded from (base seed, canonical config name), so results
are reproducible run-by-run and independent of execution order or
worker count.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mae import (CELLS, ENCODER_DEPTHS, HEADER_DEPTHS, LATENT_PERCENTS,
                  MASK_PERCENTS, MaeConfig, UnlabeledWindows, build_autoencoder,
                  pretrain)
from .nn import TrainConfig
from .seeding import stable_seed
from .transfer import (TaskHeadSpec, build_baseline, build_finetune_model,
                       evaluate_regression, extract_encoder, finetune)
from .windows import PreparedData

__all__ = ["RunSettings", "RunRecord", "DimensionStats", "enumerate_grid",
           "run_one", "run_all", "rank_and_compare", "dimension_analysis",
           "emit_reports", "pearson_r", "save_ledger", "load_ledger",
           "DIMENSIONS", "METRICS", "BASELINE_NAMES"]

BASELINE_NAMES = ("baseline-lstm", "baseline-gru")

# design dimensions (name -> numeric coding of a record) and metrics used
# by the correlation matrix; booleans are coded 0/1, percents numerically
DIMENSIONS = ("encoder_depth", "latent_percent", "header_depth", "is_gru",
              "mask_percent")
METRICS = ("test_mae", "test_rmse", "stage2_val_loss", "is_better_gru")


@dataclass(frozen=True)
class RunSettings:
    """Training knobs shared by every run of a search."""

    learning_rate: float = 0.001
    batch_size: int = 64
    clip_norm: float = 1.0
    patience: int = 5
    pretrain_epochs: int = 10
    finetune_epochs: int = 15
    baseline_epochs: int = 15

    def stage1(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size,
                           self.pretrain_epochs, self.patience, self.clip_norm)

    def stage2(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size,
                           self.finetune_epochs, self.patience, self.clip_norm)

    def baseline(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size,
                           self.baseline_epochs, self.patience, self.clip_norm)


@dataclass
class RunRecord:
    """One trained model's metrics plus its design coordinates."""

    name: str
    kind: str                       # "mae" | "baseline"
    cell: str
    test_mae: float
    test_rmse: float
    stage1_epochs: int = 0
    stage2_epochs: int = 0
    stage1_val_loss: float = float("nan")
    stage2_val_loss: float = float("nan")
    wall_time_s: float = 0.0
    nan_flag: bool = False
    seed: int = 0
    encoder_depth: int | None = None
    latent_percent: float | None = None
    header_depth: int | None = None
    mask_percent: float | None = None

    @property
    def is_gru(self) -> int:
        return int(self.cell == "gru")

    def dimension_value(self, dim: str) -> float:
        if dim == "is_gru":
            return float(self.is_gru)
        value = getattr(self, dim)
        if value is None:
            raise ValueError(f"record {self.name} has no value for dimension {dim}")
        return float(value)


def enumerate_grid() -> list[MaeConfig]:
    """Deterministic Cartesian product over the five design dimensions."""
    return [MaeConfig(*combo) for combo in itertools.product(
        ENCODER_DEPTHS, LATENT_PERCENTS, HEADER_DEPTHS, CELLS, MASK_PERCENTS)]


# -- single runs ----------------------------------------------------------------

def run_one(config: MaeConfig, data: PreparedData, base_seed: int,
            settings: RunSettings) -> RunRecord:
    """Stage 1 + stage 2 for one design point, evaluated once on test.

    A non-finite loss at either stage sets the NaN flag; the best prior
    snapshot still gets evaluated so the ledger row is complete.
    """
    seed = stable_seed(base_seed, config.name)
    t0 = time.perf_counter()

    autoencoder = build_autoencoder(config, data.n_features, data.window_len, seed)
    stage1 = pretrain(autoencoder, UnlabeledWindows(data.train_x),
                      UnlabeledWindows(data.val_x), settings.stage1(),
                      config.mask_percent, seed)

    encoder = extract_encoder(autoencoder, config.encoder_depth)
    model = build_finetune_model(encoder, TaskHeadSpec(config.header_depth, config.cell),
                                 seed + 1)
    encoder_hash = model.param_hash(list(range(encoder.depth)))
    stage2 = finetune(model, data.train_x, data.train_y, data.val_x, data.val_y,
                      settings.stage2(), seed)
    if model.param_hash(list(range(encoder.depth))) != encoder_hash:
        raise RuntimeError(f"frozen encoder changed during stage 2 of {config.name}")

    test_x, test_y = data.read_test()
    mae, rmse = evaluate_regression(model, test_x, test_y)
    return RunRecord(
        name=config.name, kind="mae", cell=config.cell,
        test_mae=mae, test_rmse=rmse,
        stage1_epochs=stage1.epochs_run, stage2_epochs=stage2.epochs_run,
        stage1_val_loss=stage1.best_val_loss, stage2_val_loss=stage2.best_val_loss,
        wall_time_s=time.perf_counter() - t0,
        nan_flag=stage1.nan_terminated or stage2.nan_terminated,
        seed=seed,
        encoder_depth=config.encoder_depth, latent_percent=config.latent_percent,
        header_depth=config.header_depth, mask_percent=config.mask_percent,
    )


def run_baseline(cell: str, data: PreparedData, base_seed: int,
                 settings: RunSettings) -> RunRecord:
    """Train and evaluate one supervised baseline."""
    name = f"baseline-{cell}"
    seed = stable_seed(base_seed, name)
    t0 = time.perf_counter()
    model = build_baseline(cell, data.window_len, data.n_features, seed)
    report = finetune(model, data.train_x, data.train_y, data.val_x, data.val_y,
                      settings.baseline(), seed)
    test_x, test_y = data.read_test()
    mae, rmse = evaluate_regression(model, test_x, test_y)
    return RunRecord(
        name=name, kind="baseline", cell=cell, test_mae=mae, test_rmse=rmse,
        stage2_epochs=report.epochs_run, stage2_val_loss=report.best_val_loss,
        wall_time_s=time.perf_counter() - t0, nan_flag=report.nan_terminated,
        seed=seed,
    )


def _run_task(args) -> RunRecord:
    task, data, base_seed, settings = args
    if isinstance(task, MaeConfig):
        return run_one(task, data, base_seed, settings)
    return run_baseline(task, data, base_seed, settings)


def run_all(grid: list[MaeConfig], data: PreparedData, base_seed: int,
            settings: RunSettings | None = None, workers: int = 1,
            progress=None) -> list[RunRecord]:
    """Execute every grid configuration plus both baselines.

    Results are ordered grid-first then baselines and are identical for
    any worker count because each run derives its own seed.
    """
    settings = settings or RunSettings()
    tasks: list = list(grid) + ["lstm", "gru"]
    payload = [(t, data, base_seed, settings) for t in tasks]
    if workers <= 1:
        records = []
        for args in payload:
            rec = _run_task(args)
            if progress is not None:
                progress(rec)
            records.append(rec)
        return records
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunksize = max(1, (len(payload) + workers - 1) // workers)
        records = list(pool.map(_run_task, payload, chunksize=chunksize))
    if progress is not None:
        for rec in records:
            progress(rec)
    return records


# -- analysis ---------------------------------------------------------------------

def pearson_r(x, y) -> float | None:
    """Pearson correlation, or None when undefined (constant input)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    if len(x) < 2 or np.std(x) == 0.0 or np.std(y) == 0.0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def _baseline_record(records: list[RunRecord], cell: str) -> RunRecord | None:
    for rec in records:
        if rec.kind == "baseline" and rec.cell == cell:
            return rec
    return None


def rank_and_compare(records: list[RunRecord]) -> tuple[list[RunRecord], dict[str, dict[str, float]]]:
    """Sort ascending by test MAE (NaN-flagged last, ties by name) and
    compute percent deltas against each baseline:
    (MAE_model - MAE_baseline) / MAE_baseline * 100."""
    if not any(r.kind == "mae" for r in records):
        raise ValueError("no search records to rank")
    baselines = {}
    for cell in ("lstm", "gru"):
        base = _baseline_record(records, cell)
        if base is None:
            raise ValueError(f"missing baseline record for cell {cell!r}")
        baselines[cell] = base

    def key(rec: RunRecord):
        bad = rec.nan_flag or not np.isfinite(rec.test_mae)
        return (bad, rec.test_mae if not bad else 0.0, rec.name)

    ranked = sorted(records, key=key)
    deltas = {}
    for rec in records:
        deltas[rec.name] = {
            cell: (rec.test_mae - base.test_mae) / base.test_mae * 100.0
            for cell, base in baselines.items()}
    return ranked, deltas


@dataclass
class LevelStats:
    """Aggregate over all runs at one level of one design dimension."""

    median_mae: float
    count: int
    beats: dict[str, int] = field(default_factory=dict)


@dataclass
class DimensionStats:
    """Per-dimension level medians and dimension-metric correlations."""

    levels: dict[str, dict[float, LevelStats]]
    correlations: dict[str, dict[str, float | None]]
    metrics: tuple[str, ...]


def dimension_analysis(records: list[RunRecord]) -> DimensionStats:
    """Medians per dimension level and Pearson r of each dimension coding
    against each metric, over non-NaN search records.

    ``is_better_gru`` (0/1 vs the GRU baseline's test MAE) joins the
    metric set only when that baseline is present in ``records``.
    """
    runs = [r for r in records if r.kind == "mae" and not r.nan_flag
            and np.isfinite(r.test_mae)]
    if not runs:
        raise ValueError("no usable search records")
    gru_base = _baseline_record(records, "gru")
    lstm_base = _baseline_record(records, "lstm")
    metrics = tuple(m for m in METRICS
                    if m != "is_better_gru" or gru_base is not None)

    def metric_value(rec: RunRecord, metric: str) -> float:
        if metric == "is_better_gru":
            return float(rec.test_mae < gru_base.test_mae)
        return float(getattr(rec, metric))

    levels: dict[str, dict[float, LevelStats]] = {}
    correlations: dict[str, dict[str, float | None]] = {}
    for dim in DIMENSIONS:
        values = np.array([r.dimension_value(dim) for r in runs])
        per_level: dict[float, LevelStats] = {}
        for level in sorted(set(values.tolist())):
            members = [r for r, v in zip(runs, values) if v == level]
            maes = np.array([r.test_mae for r in members])
            beats = {}
            if lstm_base is not None:
                beats["lstm"] = int(np.sum(maes < lstm_base.test_mae))
            if gru_base is not None:
                beats["gru"] = int(np.sum(maes < gru_base.test_mae))
            per_level[level] = LevelStats(float(np.median(maes)), len(members), beats)
        levels[dim] = per_level
        correlations[dim] = {
            m: pearson_r(values, [metric_value(r, m) for r in runs])
            for m in metrics}
    return DimensionStats(levels, correlations, metrics)


# -- report files -----------------------------------------------------------------

_LEDGER_COLUMNS = ("name", "kind", "cell", "encoder_depth", "latent_percent",
                   "header_depth", "mask_percent", "test_mae", "test_rmse",
                   "stage1_epochs", "stage2_epochs", "stage1_val_loss",
                   "stage2_val_loss", "wall_time_s", "nan_flag", "seed")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_ledger(path, records: list[RunRecord]) -> None:
    lines = [",".join(_LEDGER_COLUMNS)]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, c)) for c in _LEDGER_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def load_ledger(path) -> list[RunRecord]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    if tuple(header) != _LEDGER_COLUMNS:
        raise ValueError(f"{path}: unexpected ledger columns {header}")
    records = []
    for line in lines[1:]:
        vals = dict(zip(header, line.split(",")))
        records.append(RunRecord(
            name=vals["name"], kind=vals["kind"], cell=vals["cell"],
            test_mae=float(vals["test_mae"]), test_rmse=float(vals["test_rmse"]),
            stage1_epochs=int(vals["stage1_epochs"]),
            stage2_epochs=int(vals["stage2_epochs"]),
            stage1_val_loss=float(vals["stage1_val_loss"]),
            stage2_val_loss=float(vals["stage2_val_loss"]),
            wall_time_s=float(vals["wall_time_s"]),
            nan_flag=vals["nan_flag"] == "1",
            seed=int(vals["seed"]),
            encoder_depth=int(vals["encoder_depth"]) if vals["encoder_depth"] else None,
            latent_percent=float(vals["latent_percent"]) if vals["latent_percent"] else None,
            header_depth=int(vals["header_depth"]) if vals["header_depth"] else None,
            mask_percent=float(vals["mask_percent"]) if vals["mask_percent"] else None,
        ))
    return records


def _boxplot_rows(values: np.ndarray) -> dict[str, float | str]:
    q1, med, q3 = (float(q) for q in np.percentile(values, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = values[(values >= lo_fence) & (values <= hi_fence)]
    outliers = sorted(values[(values < lo_fence) | (values > hi_fence)].tolist())
    return {
        "min": float(inside.min()), "q1": q1, "median": med, "q3": q3,
        "max": float(inside.max()),
        "outliers": ";".join(repr(v) for v in outliers),
    }


def emit_reports(records: list[RunRecord], stats: DimensionStats, out_dir) -> list[Path]:
    """Write ledger, ranking, per-dimension box-plot data and the
    correlation matrix as delimited text with header rows.

    Output is a pure function of (records, stats): rerunning on the same
    ledger produces byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "ledger.csv"
    save_ledger(path, records)
    written.append(path)

    ranked, deltas = rank_and_compare(records)
    lines = ["rank,name,kind,cell,encoder_depth,latent_percent,header_depth,"
             "mask_percent,test_mae,test_rmse,delta_vs_lstm_pct,delta_vs_gru_pct,nan_flag"]
    for i, rec in enumerate(ranked, start=1):
        d = deltas[rec.name]
        lines.append(",".join([
            str(i), rec.name, rec.kind, rec.cell,
            _fmt(rec.encoder_depth), _fmt(rec.latent_percent),
            _fmt(rec.header_depth), _fmt(rec.mask_percent),
            _fmt(rec.test_mae), _fmt(rec.test_rmse),
            _fmt(d["lstm"]), _fmt(d["gru"]), _fmt(rec.nan_flag)]))
    path = out / "ranking.csv"
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    usable = [r for r in records if r.kind == "mae" and not r.nan_flag
              and np.isfinite(r.test_mae)]
    for dim in DIMENSIONS:
        lines = ["level,count,min,q1,median,q3,max,outliers"]
        for level, lstats in stats.levels[dim].items():
            values = np.array([r.test_mae for r in usable
                               if r.dimension_value(dim) == level])
            box = _boxplot_rows(values)
            lines.append(",".join([
                _fmt(level), str(lstats.count), _fmt(box["min"]), _fmt(box["q1"]),
                _fmt(box["median"]), _fmt(box["q3"]), _fmt(box["max"]),
                str(box["outliers"])]))
        path = out / f"boxplot_{dim}.csv"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)

    lines = ["dimension," + ",".join(stats.metrics)]
    for dim in DIMENSIONS:
        row = [dim]
        for metric in stats.metrics:
            r = stats.correlations[dim].get(metric)
            row.append("undefined" if r is None else repr(r))
        lines.append(",".join(row))
    path = out / "correlation_matrix.csv"
    path.write_text("\n".join(lines) + "\n")
    written.append(path)
    return written
