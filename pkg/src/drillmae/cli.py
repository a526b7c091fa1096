"""Command-line entry point.

Verbs chain the pipeline: ingest -> segment -> windows ->
baseline / pretrain / finetune / dse / report. Everything except
``ingest`` is driven by a manifest; ``--seed``, ``--workers`` and
``--out`` override the corresponding manifest fields. Intermediates are
cached under ``<out_dir>/cache`` and reused when their manifest hash
matches.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .dse import (RunRecord, dimension_analysis, emit_reports, load_ledger,
                  run_all, run_baseline, save_ledger)
from .ingest import load_well, make_channel_specs, series_summary, validate_series
from .mae import MaeConfig, UnlabeledWindows, build_autoencoder, pretrain
from .manifest import Manifest, ManifestError, parse_manifest
from .nn import load_into, save_snapshot
from .seeding import stable_seed
from .transfer import (TaskHeadSpec, build_finetune_model, evaluate_regression,
                       extract_encoder, finetune as run_finetune)

log = logging.getLogger("drillmae")


def _print_table(rows: list[dict]) -> None:
    if not rows:
        return
    cols = list(rows[0])
    print("\t".join(cols))
    for row in rows:
        print("\t".join(str(row[c]) for c in cols))


def _load_manifest(args) -> Manifest:
    overrides = {}
    for key in ("seed", "workers", "out_dir", "window_len", "stride",
                "subsample_frac", "test_frac"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    return parse_manifest(args.manifest, overrides)


# -- verbs -----------------------------------------------------------------------

def cmd_ingest(args) -> int:
    inputs = [c.strip() for c in args.channels.split(",") if c.strip()]
    specs = make_channel_specs([c for c in inputs if c != args.target], args.target)
    series = load_well(args.file, specs, delimiter=args.delimiter, well_id=args.well)
    _print_table(series_summary(series))
    diagnostics = validate_series(series)
    for diag in diagnostics:
        print(f"warning\t{diag.message}")
    print(f"ok\twell={series.well_id}\trows={len(series)}\t"
          f"channels={len(series.channel_specs)}\tdiagnostics={len(diagnostics)}")
    return 0


def cmd_segment(args) -> int:
    man = _load_manifest(args)
    segments = pipeline.get_segments(man, use_cache=not args.no_cache)
    _print_table([{
        "well_id": s.well_id, "segment_id": s.segment_id,
        "start": s.start_index, "length": len(s),
    } for s in segments])
    return 0


def cmd_windows(args) -> int:
    man = _load_manifest(args)
    train, val, test = pipeline.build_window_sets(man, use_cache=not args.no_cache)
    _print_table([{"split": ws.split_tag, "windows": len(ws)}
                  for ws in (train, val, test)])
    print(f"cache\t{pipeline.cache_dir(man)}/windows_{man.windows_hash()}_*.bin")
    return 0


def cmd_baseline(args) -> int:
    man = _load_manifest(args)
    data = pipeline.prepare(man, use_cache=not args.no_cache)
    records = [run_baseline(cell, data, man.seed, man.run_settings())
               for cell in ("lstm", "gru")]
    _append_ledger(man, records)
    _print_table([{"name": r.name, "test_mae": r.test_mae, "test_rmse": r.test_rmse,
                   "epochs": r.stage2_epochs} for r in records])
    return 0


def _snapshot_path(man: Manifest, config: MaeConfig) -> Path:
    path = Path(man.out_dir) / "snapshots"
    path.mkdir(parents=True, exist_ok=True)
    return path / f"{config.name}-stage1.snap"


def _append_ledger(man: Manifest, new_records) -> Path:
    path = Path(man.out_dir) / "ledger.csv"
    records = load_ledger(path) if path.is_file() else []
    existing = {r.name for r in records}
    records.extend(r for r in new_records if r.name not in existing)
    Path(man.out_dir).mkdir(parents=True, exist_ok=True)
    save_ledger(path, records)
    return path


def cmd_pretrain(args) -> int:
    man = _load_manifest(args)
    config = MaeConfig.from_name(args.config)
    data = pipeline.prepare(man, use_cache=not args.no_cache)
    seed = stable_seed(man.seed, config.name)
    autoencoder = build_autoencoder(config, data.n_features, data.window_len, seed)
    report = pretrain(autoencoder, UnlabeledWindows(data.train_x),
                      UnlabeledWindows(data.val_x), man.run_settings().stage1(),
                      config.mask_percent, seed)
    snap = _snapshot_path(man, config)
    save_snapshot(snap, autoencoder, {"config": config.name, "stage": "1",
                                      "seed": str(seed)})
    report.save_epochs(snap.with_suffix(".epochs.csv"))
    print(f"pretrained\t{config.name}\tepochs={report.epochs_run}\t"
          f"best_val={report.best_val_loss!r}\tnan={int(report.nan_terminated)}\t"
          f"snapshot={snap}")
    return 0


def cmd_finetune(args) -> int:
    man = _load_manifest(args)
    config = MaeConfig.from_name(args.config)
    snap = _snapshot_path(man, config)
    if not snap.is_file():
        print(f"error: no stage-1 snapshot for {config.name}; run "
              f"`drillmae pretrain --config {config.name}` first", file=sys.stderr)
        return 2
    data = pipeline.prepare(man, use_cache=not args.no_cache)
    seed = stable_seed(man.seed, config.name)

    autoencoder = build_autoencoder(config, data.n_features, data.window_len, seed)
    load_into(snap, autoencoder)
    encoder = extract_encoder(autoencoder, config.encoder_depth)
    model = build_finetune_model(encoder, TaskHeadSpec(config.header_depth, config.cell),
                                 seed + 1)
    report = run_finetune(model, data.train_x, data.train_y, data.val_x, data.val_y,
                          man.run_settings().stage2(), seed)
    test_x, test_y = data.read_test()
    mae, rmse = evaluate_regression(model, test_x, test_y)
    record = RunRecord(
        name=config.name, kind="mae", cell=config.cell, test_mae=mae, test_rmse=rmse,
        stage2_epochs=report.epochs_run, stage2_val_loss=report.best_val_loss,
        nan_flag=report.nan_terminated, seed=seed,
        encoder_depth=config.encoder_depth, latent_percent=config.latent_percent,
        header_depth=config.header_depth, mask_percent=config.mask_percent)
    _append_ledger(man, [record])
    report.save_epochs(Path(man.out_dir) / "snapshots" / f"{config.name}-stage2.epochs.csv")
    save_snapshot(Path(man.out_dir) / "snapshots" / f"{config.name}-stage2.snap",
                  model, {"config": config.name, "stage": "2", "seed": str(seed)})
    print(f"finetuned\t{config.name}\ttest_mae={mae!r}\ttest_rmse={rmse!r}")
    return 0


def cmd_dse(args) -> int:
    man = _load_manifest(args)
    data = pipeline.prepare(man, use_cache=not args.no_cache)
    grid = man.grid_configs()
    log.info("dse: %d configuration(s) + 2 baselines, workers=%d",
             len(grid), man.workers)
    records = run_all(grid, data, man.seed, man.run_settings(), man.workers,
                      progress=lambda r: log.info(
                          "run %-28s test_mae=%.5f nan=%d", r.name, r.test_mae,
                          int(r.nan_flag)))
    stats = dimension_analysis(records)
    written = emit_reports(records, stats, man.out_dir)
    for path in written:
        print(f"report\t{path}")
    return 0


def cmd_report(args) -> int:
    man = _load_manifest(args)
    ledger = Path(args.ledger) if args.ledger else Path(man.out_dir) / "ledger.csv"
    if not ledger.is_file():
        print(f"error: ledger not found: {ledger}", file=sys.stderr)
        return 2
    records = load_ledger(ledger)
    stats = dimension_analysis(records)
    written = emit_reports(records, stats, man.out_dir)
    for path in written:
        print(f"report\t{path}")
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drillmae",
        description="Masked-autoencoder pretraining pipeline for drilling telemetry")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log pipeline progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("ingest", help="load one well and print a validation report")
    p.add_argument("--well", required=True)
    p.add_argument("--file", required=True)
    p.add_argument("--channels", required=True, help="comma-separated input channels")
    p.add_argument("--target", required=True)
    p.add_argument("--delimiter", default=",")
    p.set_defaults(func=cmd_ingest)

    def manifest_parser(name, help_text):
        q = sub.add_parser(name, help=help_text)
        q.add_argument("--manifest", "--params", required=True, dest="manifest")
        q.add_argument("--seed", type=int)
        q.add_argument("--workers", type=int)
        q.add_argument("--out", dest="out_dir")
        q.add_argument("--no-cache", action="store_true",
                       help="ignore cached intermediates")
        return q

    manifest_parser("segment", "segment all wells, print per-segment summaries"
                    ).set_defaults(func=cmd_segment)

    p = manifest_parser("windows", "build the balanced/split window sets")
    p.add_argument("--len", dest="window_len", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--subsample", dest="subsample_frac", type=float)
    p.add_argument("--test", dest="test_frac", type=float)
    p.set_defaults(func=cmd_windows)

    manifest_parser("baseline", "train and evaluate both supervised baselines"
                    ).set_defaults(func=cmd_baseline)

    p = manifest_parser("pretrain", "stage-1 masked reconstruction for one config")
    p.add_argument("--config", required=True, help="e.g. ae1-lat80-hd2-gru-m20")
    p.set_defaults(func=cmd_pretrain)

    p = manifest_parser("finetune", "stage-2 frozen-encoder fine-tuning for one config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_finetune)

    manifest_parser("dse", "full design-space search plus reports"
                    ).set_defaults(func=cmd_dse)

    p = manifest_parser("report", "regenerate reports from an existing ledger")
    p.add_argument("--ledger")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)-7s %(message)s", datefmt="%H:%M:%S")
    try:
        return args.func(args)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
