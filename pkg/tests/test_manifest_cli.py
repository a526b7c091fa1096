from __future__ import annotations

import numpy as np
import pytest

from drillmae.cli import main
from drillmae.manifest import ManifestError, parse_manifest
from drillmae.synthetic import make_demo_corpus, synth_columns, write_well_csv


def small_manifest(tmp_path, n=4000, extra=(), stride=5, window_len=30):
    """Two tiny wells plus a manifest sized for fast tests."""
    for i, well in enumerate(("alpha", "beta")):
        write_well_csv(tmp_path / f"{well}.csv",
                       synth_columns(well, n, seed=50 + i))
    lines = [
        f"well.alpha = {tmp_path / 'alpha.csv'}",
        f"well.beta = {tmp_path / 'beta.csv'}",
        "channels = WOB,ROP,Total Pump Output,Hole Depth,Bit Depth",
        "target = Total Mud Volume",
        f"out_dir = {tmp_path / 'runs'}",
        "seg.long_window = 200",
        "seg.short_window = 20",
        "seg.block_window = 300",
        "seg.min_depth = 900",
        "seg.gap_limit = 50",
        "seg.impute_window = 20",
        f"window_len = {window_len}",
        f"stride = {stride}",
        "subsample_frac = 0.8",
        "test_frac = 0.2",
        "val_frac = 0.15",
        "seed = 9",
        "grid = ae1-lat80-hd1-gru-m20,ae1-lat20-hd1-lstm-m50",
        "pretrain_epochs = 1",
        "finetune_epochs = 1",
        "baseline_epochs = 1",
        "batch_size = 32",
    ] + list(extra)
    path = tmp_path / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestManifestParsing:
    def test_roundtrip_fields(self, tmp_path):
        man = parse_manifest(small_manifest(tmp_path))
        assert set(man.wells) == {"alpha", "beta"}
        assert man.seg.long_window == 200
        assert man.window_len == 30
        assert man.seed == 9
        assert len(man.grid_configs()) == 2

    def test_unknown_key_named(self, tmp_path):
        path = small_manifest(tmp_path, extra=["bogus_key = 1"])
        with pytest.raises(ManifestError, match="bogus_key"):
            parse_manifest(path)

    def test_missing_well_path_named(self, tmp_path):
        path = small_manifest(tmp_path, extra=["well.gone = /no/such/file.csv"])
        with pytest.raises(ManifestError, match="well.gone"):
            parse_manifest(path)

    def test_unparseable_number_named(self, tmp_path):
        path = small_manifest(tmp_path, extra=["seed = lots"])
        with pytest.raises(ManifestError, match="seed"):
            parse_manifest(path)

    def test_bad_grid_name_named(self, tmp_path):
        path = small_manifest(tmp_path, extra=["grid = not-a-config"])
        with pytest.raises(ManifestError, match="grid"):
            parse_manifest(path)

    def test_overrides_win(self, tmp_path):
        man = parse_manifest(small_manifest(tmp_path), overrides={"seed": 42})
        assert man.seed == 42

    def test_seed_changes_windows_hash_not_segment_hash(self, tmp_path):
        path = small_manifest(tmp_path)
        m1 = parse_manifest(path)
        m2 = parse_manifest(path, overrides={"seed": 1234})
        assert m1.segment_hash() == m2.segment_hash()
        assert m1.windows_hash() != m2.windows_hash()

    def test_seg_params_change_both_hashes(self, tmp_path):
        m1 = parse_manifest(small_manifest(tmp_path))
        path2 = small_manifest(tmp_path, extra=["seg.gap_limit = 60"])
        m2 = parse_manifest(path2)
        assert m1.segment_hash() != m2.segment_hash()
        assert m1.windows_hash() != m2.windows_hash()


class TestCliVerbs:
    def test_ingest_reports_channels(self, tmp_path, capsys):
        write_well_csv(tmp_path / "w.csv", synth_columns("w", 500, seed=1))
        code = main(["ingest", "--well", "w", "--file", str(tmp_path / "w.csv"),
                     "--channels", "WOB,ROP,Hole Depth,Bit Depth",
                     "--target", "Total Mud Volume"])
        out = capsys.readouterr().out
        assert code == 0
        assert "Hole Depth" in out
        assert "rows=500" in out

    def test_ingest_missing_column_nonzero_exit(self, tmp_path, capsys):
        write_well_csv(tmp_path / "w.csv", synth_columns("w", 100, seed=1))
        code = main(["ingest", "--well", "w", "--file", str(tmp_path / "w.csv"),
                     "--channels", "WOB,NoSuchChannel",
                     "--target", "Total Mud Volume"])
        assert code != 0
        assert "NoSuchChannel" in capsys.readouterr().err

    def test_missing_well_path_diagnostic_names_path(self, tmp_path, capsys):
        path = small_manifest(tmp_path)
        (tmp_path / "alpha.csv").unlink()
        code = main(["segment", "--manifest", str(path)])
        assert code != 0
        assert "alpha" in capsys.readouterr().err

    def test_segment_prints_table_and_caches(self, tmp_path, capsys):
        path = small_manifest(tmp_path)
        assert main(["segment", "--manifest", str(path)]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].split("\t") == \
            ["well_id", "segment_id", "start", "length"]
        cache = list((tmp_path / "runs" / "cache").glob("segments_*.npz"))
        assert len(cache) == 1
        stamp = cache[0].stat().st_mtime_ns
        assert main(["segment", "--manifest", str(path)]) == 0
        assert cache[0].stat().st_mtime_ns == stamp  # reused, not rebuilt

    def test_windows_builds_caches_seed_invalidates(self, tmp_path, capsys):
        path = small_manifest(tmp_path)
        assert main(["windows", "--manifest", str(path)]) == 0
        cache_dir = tmp_path / "runs" / "cache"
        first = sorted(p.name for p in cache_dir.glob("windows_*.bin"))
        assert len(first) == 3
        seg_stamp = next(cache_dir.glob("segments_*.npz")).stat().st_mtime_ns
        assert main(["windows", "--manifest", str(path), "--seed", "123"]) == 0
        second = sorted(p.name for p in cache_dir.glob("windows_*.bin"))
        assert len(second) == 6  # new hash, new files
        assert next(cache_dir.glob("segments_*.npz")).stat().st_mtime_ns == seg_stamp

    def test_dse_two_config_ledger_and_reports(self, tmp_path, capsys):
        path = small_manifest(tmp_path)
        assert main(["dse", "--manifest", str(path)]) == 0
        out_dir = tmp_path / "runs"
        ledger = (out_dir / "ledger.csv").read_text().strip().splitlines()
        assert len(ledger) == 1 + 2 + 2  # header + 2 configs + 2 baselines
        for name in ("ranking.csv", "correlation_matrix.csv",
                     "boxplot_latent_percent.csv"):
            assert (out_dir / name).is_file()

    def test_report_rerun_byte_identical(self, tmp_path, capsys):
        path = small_manifest(tmp_path)
        assert main(["dse", "--manifest", str(path)]) == 0
        out_dir = tmp_path / "runs"
        names = ["ranking.csv", "correlation_matrix.csv", "ledger.csv",
                 "boxplot_mask_percent.csv"]
        first = {n: (out_dir / n).read_bytes() for n in names}
        assert main(["report", "--manifest", str(path)]) == 0
        second = {n: (out_dir / n).read_bytes() for n in names}
        assert main(["report", "--manifest", str(path)]) == 0
        third = {n: (out_dir / n).read_bytes() for n in names}
        assert first == second == third

    def test_pretrain_then_finetune(self, tmp_path, capsys):
        path = small_manifest(tmp_path)
        config = "ae1-lat80-hd1-gru-m20"
        code = main(["finetune", "--manifest", str(path), "--config", config])
        assert code == 2  # no stage-1 snapshot yet
        assert "pretrain" in capsys.readouterr().err
        assert main(["pretrain", "--manifest", str(path), "--config", config]) == 0
        snap = tmp_path / "runs" / "snapshots" / f"{config}-stage1.snap"
        assert snap.is_file()
        assert main(["finetune", "--manifest", str(path), "--config", config]) == 0
        ledger = (tmp_path / "runs" / "ledger.csv").read_text()
        assert config in ledger

    def test_baseline_verb_appends_ledger(self, tmp_path, capsys):
        path = small_manifest(tmp_path)
        assert main(["baseline", "--manifest", str(path)]) == 0
        ledger = (tmp_path / "runs" / "ledger.csv").read_text().strip().splitlines()
        assert len(ledger) == 3
        assert any("baseline-lstm" in line for line in ledger)


class TestEndToEndSmoke:
    def test_bundled_corpus_dse_completes(self, tmp_path):
        # two synthetic wells of ~50k samples each, 4-config grid; the
        # bundled manifest uses coarse stride and short epochs
        manifest = make_demo_corpus(tmp_path, n_samples=50_000, seed=11)
        assert main(["dse", "--manifest", str(manifest)]) == 0
        out_dir = tmp_path / "runs"
        ledger = (out_dir / "ledger.csv").read_text().strip().splitlines()
        assert len(ledger) == 1 + 4 + 2
        produced = sorted(p.name for p in out_dir.glob("*.csv"))
        assert produced == ["boxplot_encoder_depth.csv", "boxplot_header_depth.csv",
                            "boxplot_is_gru.csv", "boxplot_latent_percent.csv",
                            "boxplot_mask_percent.csv", "correlation_matrix.csv",
                            "ledger.csv", "ranking.csv"]
