from __future__ import annotations

import numpy as np
import pytest

from oracles import pearson_formula, sorted_median

from drillmae.dse import (DIMENSIONS, RunRecord, RunSettings, dimension_analysis,
                          emit_reports, enumerate_grid, load_ledger, pearson_r,
                          rank_and_compare, run_all, save_ledger)
from drillmae.mae import MaeConfig


def mae_record(name="ae1-lat80-hd2-gru-m20", test_mae=0.03, test_rmse=0.04,
               stage2_val=0.03, nan=False, **dims):
    cfg = MaeConfig.from_name(name)
    return RunRecord(
        name=name, kind="mae", cell=cfg.cell, test_mae=test_mae,
        test_rmse=test_rmse, stage2_val_loss=stage2_val, nan_flag=nan,
        encoder_depth=cfg.encoder_depth, latent_percent=cfg.latent_percent,
        header_depth=cfg.header_depth, mask_percent=cfg.mask_percent, **dims)


def baseline_record(cell, test_mae):
    return RunRecord(name=f"baseline-{cell}", kind="baseline", cell=cell,
                     test_mae=test_mae, test_rmse=test_mae * 1.2,
                     stage2_val_loss=test_mae)


class TestEnumerateGrid:
    def test_exactly_72_distinct_configs(self):
        grid = enumerate_grid()
        assert len(grid) == 72
        assert len(set(grid)) == 72

    def test_contains_reported_best_configuration(self):
        assert MaeConfig(1, 0.8, 2, "gru", 0.2) in enumerate_grid()

    def test_per_level_counts(self):
        grid = enumerate_grid()
        expect = {"encoder_depth": 36, "latent_percent": 24, "header_depth": 36,
                  "cell": 36, "mask_percent": 24}
        for dim, count in expect.items():
            values = [getattr(c, dim) for c in grid]
            for level in set(values):
                assert values.count(level) == count, (dim, level)

    def test_deterministic_order(self):
        assert [c.name for c in enumerate_grid()] == \
            [c.name for c in enumerate_grid()]


class TestRankAndCompare:
    def test_paper_fixture_deltas(self):
        # the three published MAE values must reproduce the published deltas
        records = [mae_record(test_mae=0.02085),
                   baseline_record("lstm", 0.01959),
                   baseline_record("gru", 0.02599)]
        _, deltas = rank_and_compare(records)
        d = deltas["ae1-lat80-hd2-gru-m20"]
        assert round(d["gru"], 1) == -19.8
        assert round(d["lstm"], 1) == 6.4

    def test_equal_mae_zero_delta(self):
        records = [mae_record(test_mae=0.02), baseline_record("lstm", 0.02),
                   baseline_record("gru", 0.03)]
        _, deltas = rank_and_compare(records)
        assert deltas["ae1-lat80-hd2-gru-m20"]["lstm"] == 0.0

    def test_ranking_is_permutation_sorted_ascending(self):
        records = [mae_record("ae1-lat20-hd1-lstm-m20", test_mae=0.05),
                   mae_record("ae1-lat80-hd2-gru-m20", test_mae=0.02),
                   mae_record("ae2-lat50-hd2-gru-m50", test_mae=0.03),
                   baseline_record("lstm", 0.019), baseline_record("gru", 0.026)]
        ranked, _ = rank_and_compare(records)
        assert sorted(r.name for r in ranked) == sorted(r.name for r in records)
        maes = [r.test_mae for r in ranked]
        assert maes == sorted(maes)

    def test_nan_flagged_sorted_last_ties_by_name(self):
        records = [mae_record("ae1-lat20-hd1-lstm-m20", test_mae=float("nan"), nan=True),
                   mae_record("ae1-lat80-hd2-gru-m20", test_mae=0.02),
                   mae_record("ae1-lat50-hd2-gru-m20", test_mae=0.02),
                   baseline_record("lstm", 0.019), baseline_record("gru", 0.026)]
        ranked, _ = rank_and_compare(records)
        assert ranked[-1].name == "ae1-lat20-hd1-lstm-m20"
        tied = [r.name for r in ranked if r.test_mae == 0.02]
        assert tied == sorted(tied)

    def test_missing_baseline_is_an_error(self):
        with pytest.raises(ValueError, match="baseline"):
            rank_and_compare([mae_record(), baseline_record("gru", 0.02)])


class TestPearson:
    def test_perfect_anticorrelation(self):
        assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_matches_covariance_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.normal(size=6)
            y = rng.normal(size=6)
            assert pearson_r(x, y) == pytest.approx(pearson_formula(x, y),
                                                    abs=1e-12)

    def test_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            r = pearson_r(rng.normal(size=8), rng.normal(size=8))
            assert -1.0 <= r <= 1.0

    def test_constant_input_undefined(self):
        assert pearson_r([1, 1, 1], [1, 2, 3]) is None
        assert pearson_r([1, 2, 3], [5, 5, 5]) is None


class TestDimensionAnalysis:
    def _records(self):
        # six synthetic runs spanning two latent levels and both cells
        specs = [("ae1-lat20-hd1-gru-m20", 0.020), ("ae1-lat20-hd2-gru-m50", 0.040),
                 ("ae1-lat80-hd1-lstm-m20", 0.030), ("ae1-lat80-hd2-lstm-m50", 0.050),
                 ("ae2-lat20-hd1-gru-m80", 0.025), ("ae2-lat80-hd2-lstm-m80", 0.045)]
        records = [mae_record(name, test_mae=m, test_rmse=m * 1.3, stage2_val=m * 0.9)
                   for name, m in specs]
        records += [baseline_record("lstm", 0.028), baseline_record("gru", 0.035)]
        return records

    def test_even_count_median(self):
        stats = dimension_analysis(self._records())
        level = stats.levels["latent_percent"][0.2]
        assert level.median_mae == pytest.approx(0.025)  # median of .02,.04,.025
        assert level.count == 3

    def test_medians_match_sort_oracle(self):
        records = self._records()
        stats = dimension_analysis(records)
        for dim in DIMENSIONS:
            for level, lstats in stats.levels[dim].items():
                maes = [r.test_mae for r in records if r.kind == "mae"
                        and r.dimension_value(dim) == level]
                assert lstats.median_mae == pytest.approx(sorted_median(maes),
                                                          abs=1e-15)

    def test_correlations_match_formula_oracle(self):
        records = self._records()
        stats = dimension_analysis(records)
        runs = [r for r in records if r.kind == "mae"]
        gru_mae = 0.035
        for dim in DIMENSIONS:
            xs = [r.dimension_value(dim) for r in runs]
            for metric in stats.metrics:
                if metric == "is_better_gru":
                    ys = [float(r.test_mae < gru_mae) for r in runs]
                else:
                    ys = [getattr(r, metric) for r in runs]
                want = pearson_formula(xs, ys) if (len(set(xs)) > 1
                                                   and len(set(ys)) > 1) else None
                got = stats.correlations[dim][metric]
                if want is None:
                    assert got is None
                else:
                    assert got == pytest.approx(want, abs=1e-12)

    def test_beats_counts(self):
        stats = dimension_analysis(self._records())
        # all three lat20 runs sit below the GRU baseline (0.035): 0.020,
        # 0.040, 0.025 -> 2 beat it
        assert stats.levels["latent_percent"][0.2].beats["gru"] == 2

    def test_nan_flagged_excluded(self):
        records = self._records()
        records.append(mae_record("ae2-lat50-hd1-gru-m20", test_mae=float("nan"),
                                  nan=True))
        stats = dimension_analysis(records)
        assert 0.5 not in stats.levels["latent_percent"]

    def test_perfect_anticorrelation_case(self):
        # three latent levels with MAE 3,2,1 -> r == -1 exactly
        records = [
            mae_record("ae1-lat20-hd1-gru-m20", test_mae=3.0),
            mae_record("ae1-lat50-hd1-gru-m20", test_mae=2.0),
            mae_record("ae1-lat80-hd1-gru-m20", test_mae=1.0),
        ]
        stats = dimension_analysis(records)
        assert stats.correlations["latent_percent"]["test_mae"] == pytest.approx(-1.0)


class TestReports:
    def test_report_files_and_determinism(self, tmp_path):
        records = (TestDimensionAnalysis()._records())
        stats = dimension_analysis(records)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        files1 = emit_reports(records, stats, out1)
        emit_reports(records, stats, out2)
        names = sorted(p.name for p in files1)
        assert names == sorted(["ledger.csv", "ranking.csv",
                                "boxplot_encoder_depth.csv",
                                "boxplot_latent_percent.csv",
                                "boxplot_header_depth.csv", "boxplot_is_gru.csv",
                                "boxplot_mask_percent.csv",
                                "correlation_matrix.csv"])
        for path in files1:
            assert path.read_bytes() == (out2 / path.name).read_bytes()

    def test_boxplot_level_counts(self, tmp_path):
        records = (TestDimensionAnalysis()._records())
        stats = dimension_analysis(records)
        emit_reports(records, stats, tmp_path)
        mask_lines = (tmp_path / "boxplot_mask_percent.csv").read_text().strip()
        assert len(mask_lines.splitlines()) == 1 + 3  # header + 3 levels

    def test_ranking_rows_include_baselines(self, tmp_path):
        records = (TestDimensionAnalysis()._records())
        stats = dimension_analysis(records)
        emit_reports(records, stats, tmp_path)
        lines = (tmp_path / "ranking.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 6 + 2

    def test_ledger_roundtrip(self, tmp_path):
        records = (TestDimensionAnalysis()._records())
        path = tmp_path / "ledger.csv"
        save_ledger(path, records)
        loaded = load_ledger(path)
        assert [r.name for r in loaded] == [r.name for r in records]
        assert loaded[0].test_mae == records[0].test_mae
        assert loaded[0].latent_percent == records[0].latent_percent
        assert loaded[-1].encoder_depth is None  # baseline row


class TestRunAll:
    def _grid(self):
        return [MaeConfig(1, 0.8, 1, "gru", 0.2), MaeConfig(1, 0.2, 1, "lstm", 0.5)]

    def _settings(self):
        return RunSettings(pretrain_epochs=1, finetune_epochs=1, baseline_epochs=1)

    def test_counts_and_test_read_discipline(self, prepared):
        records = run_all(self._grid(), prepared, base_seed=3,
                          settings=self._settings())
        assert len(records) == 4  # 2 configs + 2 baselines
        assert [r.kind for r in records] == ["mae", "mae", "baseline", "baseline"]
        assert prepared.test_reads == 4  # exactly once per model

    def test_worker_count_does_not_change_results(self, prepared):
        serial = run_all(self._grid(), prepared, 3, self._settings(), workers=1)
        parallel = run_all(self._grid(), prepared, 3, self._settings(), workers=2)
        for a, b in zip(serial, parallel):
            assert a.name == b.name
            assert a.test_mae == b.test_mae
            assert a.test_rmse == b.test_rmse
            assert a.seed == b.seed

    def test_nan_data_flagged_not_fatal(self, prepared):
        import copy
        poisoned = copy.deepcopy(prepared)
        poisoned.train_x[0, 0, 0] = np.nan
        records = run_all(self._grid()[:1], poisoned, 3, self._settings())
        assert len(records) == 3
        assert records[0].nan_flag

    def test_per_run_seeds_are_order_independent(self, prepared):
        grid = self._grid()
        records_fwd = run_all(grid, prepared, 3, self._settings())
        records_rev = run_all(list(reversed(grid)), prepared, 3, self._settings())
        by_name_fwd = {r.name: r for r in records_fwd}
        by_name_rev = {r.name: r for r in records_rev}
        for name in by_name_fwd:
            assert by_name_fwd[name].seed == by_name_rev[name].seed
            assert by_name_fwd[name].test_mae == by_name_rev[name].test_mae
