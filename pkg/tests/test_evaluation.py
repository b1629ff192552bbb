import csv
import datetime as dt
import json

import numpy as np
import pytest

from wmimpute import DayMatrix, PipelineError
from wmimpute.evaluation import (
    ExperimentSpec,
    ModelSpec,
    expand_grid,
    grid_search,
    mae,
    prepare,
    run_experiment,
    selection_mask,
    table_two,
)
from wmimpute.preprocessing import build_day_matrix
from wmimpute.rng import derive_seed
from wmimpute.synthgen import BuildingProfile, generate_building, generate_dataset


def day_matrix(values, building="b"):
    values = np.asarray(values, dtype=float)
    dates = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(values.shape[0])]
    return DayMatrix(building, dates, values, ~np.isnan(values))


def synthetic(n_buildings=2, n_days=40, seed=0):
    return {b: build_day_matrix(t) for b, (t, _) in generate_dataset(n_buildings, n_days, seed, scale_jitter=0.2).items()}


FAST = (ModelSpec("mean", "mean"), ModelSpec("interp", "interp"), ModelSpec("knn", "knn", {"k": 3}))


class TestMae:
    def test_identical(self):
        x = np.arange(4.0)
        assert mae(x, x, np.ones(4, bool)) == 0.0

    def test_hand_arithmetic(self):
        assert mae([1.0, 3.0, 9.0], [0.0, 0.0, 0.0], [True, True, False]) == 2.0

    def test_sign_ignored(self):
        assert mae([1.5], [2.0], [True]) == 0.5

    def test_empty_mask(self):
        with pytest.raises(PipelineError) as err:
            mae([1.0], [1.0], [False])
        assert err.value.code == "no-cells-to-score"


class TestRunExperiment:
    def test_constant_data_scores_zero(self):
        flat = BuildingProfile(base_night_rate=10, workday_peak=10, weekend_factor=1, noise_std=0)
        truth, _ = generate_building(flat, 30, seed=0)
        report = run_experiment(ExperimentSpec("dedicated", (ModelSpec("mean", "mean"),)), {"b": build_day_matrix(truth)})
        assert report.aggregate_of("mean") == 0.0 and report.aggregate_of("mean", "mae_lph") == 0.0

    @pytest.mark.parametrize("family,config", [("mean", {}), ("interp", {}), ("knn", {"k": 1})])
    def test_identical_buildings_common_equals_dedicated(self, family, config):
        truth, _ = generate_building(BuildingProfile(), 60, seed=3)
        m = build_day_matrix(truth)
        dataset = {"a": m, "b": DayMatrix("b", m.dates, m.values, m.mask)}
        models = (ModelSpec(family, family, config),)
        ded = run_experiment(ExperimentSpec("dedicated", models, per_building_seeds=False), dataset)
        com = run_experiment(ExperimentSpec("common", models, per_building_seeds=False), dataset)
        assert ded.aggregate_of(family) == com.aggregate_of(family)
        assert ded.mae_table() == {family: com.mae_table()[family]}

    def test_aggregate_recomputes_from_rows(self):
        report = run_experiment(ExperimentSpec("dedicated", FAST), synthetic(3))
        for agg in report.aggregate:
            rows = [r for r in report.results if r["model"] == agg["model"]]
            assert agg["mae_norm"] == float(np.mean([r["mae_norm"] for r in rows]))
            assert agg["buildings"] == 3
        assert all(r["n_cells"] == len(report.manifests[r["building"]]["split"]["val_rows"]) for r in report.results)

    def test_masks_shared_across_models(self):
        report = run_experiment(ExperimentSpec("common", FAST), synthetic(2))
        for b, rows_by_model in report.series.items():
            stamps = [[(s, a) for s, a, _ in rows] for rows in rows_by_model.values()]
            assert all(s == stamps[0] for s in stamps)

    def test_lph_units_invert_normalization(self):
        report = run_experiment(ExperimentSpec("dedicated", FAST[:1]), synthetic(1))
        rows = report.series["B00"]["mean"]
        lph = float(np.mean([abs(a - i) for _, a, i in rows]))
        assert lph == pytest.approx(report.aggregate_of("mean", "mae_lph"), rel=1e-12)

    def test_building_without_complete_days_is_excluded(self):
        dataset = synthetic(2)
        broken = np.array(dataset["B01"].values)
        broken[:, 3] = np.nan
        dataset["B01"] = day_matrix(broken, "B01")
        report = run_experiment(ExperimentSpec("dedicated", FAST[:1]), dataset)
        assert [e["building"] for e in report.excluded] == ["B01"]
        assert {r["building"] for r in report.results} == {"B00"}

    def test_no_usable_building(self):
        with pytest.raises(PipelineError) as err:
            run_experiment(ExperimentSpec("dedicated", FAST[:1]), {"x": day_matrix(np.full((3, 24), np.nan))})
        assert err.value.code == "no-usable-buildings"

    def test_spec_validation(self):
        with pytest.raises(PipelineError):
            ExperimentSpec("shared", FAST)
        with pytest.raises(PipelineError):
            ExperimentSpec("common", FAST, split_seed=None)
        with pytest.raises(PipelineError):
            ExperimentSpec("common", (FAST[0], FAST[0]))

    def test_report_files(self, tmp_path):
        report = run_experiment(ExperimentSpec("dedicated", FAST), synthetic(2))
        report.write(tmp_path)
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["prng"] == "numpy.PCG64" and data["spec"]["seeds"] == {"split": 0, "mask": 1, "model": 2}
        with open(tmp_path / "mae_by_building.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6 and set(rows[0]) == {"building", "model", "mode", "mae_norm", "mae_lph"}
        with open(tmp_path / "imputed_vs_actual_B00.csv") as fh:
            series = list(csv.DictReader(fh))
        assert set(series[0]) == {"timestamp", "actual", "imputed", "model"}
        assert series[0]["timestamp"].endswith("Z")
        assert "timings" not in json.loads(report.to_json(include_timings=False))

    def test_table_layout(self):
        data = synthetic(2)
        reports = [run_experiment(ExperimentSpec(mode, FAST[:2]), data) for mode in ("dedicated", "common")]
        table = table_two(reports)
        assert [row["model"] for row in table] == ["mean", "interp"]
        assert set(table[0]) == {"model", "mae_dedicated", "mae_common"}


class TestSelectionMask:
    def test_never_hides_the_scored_cell(self):
        prepared, _ = prepare(synthetic(3, 60, seed=2), ExperimentSpec("dedicated", FAST))
        for d in prepared.values():
            scored = {r: c for r, c, _ in d.validation.hidden}
            assert len(d.selection.hidden) == len(scored)
            assert all(c != scored[r] for r, c, _ in d.selection.hidden)
            assert np.array_equal(d.selection.truth, d.validation.truth)

    def test_deterministic_and_seed_sensitive(self):
        prepared, _ = prepare(synthetic(1, 200, seed=3), ExperimentSpec("dedicated", FAST))
        raw = next(iter(prepared.values())).validation_raw
        assert selection_mask(raw, 5).hidden == selection_mask(raw, 5).hidden
        assert selection_mask(raw, 5).hidden != selection_mask(raw, 6).hidden

    def test_attention_selects_on_selection_mask(self):
        tiny = {"n_layers": 1, "d_model": 8, "d_ff": 8, "n_heads": 2, "d_k": 4, "d_v": 4, "epochs": 2}
        spec = ExperimentSpec("dedicated", (ModelSpec("att", "attention", tiny),))
        dataset = synthetic(1, 30, seed=4)
        report = run_experiment(spec, dataset)
        d = prepare(dataset, spec)[0]["B00"]
        model = report.fitted["att"]["B00"]
        assert model.history_.val_mae[model.history_.best_epoch - 1] == min(model.history_.val_mae)
        assert report.manifests["B00"]["selection_mask"]["hidden"] == [[r, c] for r, c, _ in d.selection.hidden]


class TestGridSearch:
    def test_expand_grid(self):
        assert expand_grid({"k": [1, 2], "x": ["a"]}) == [{"k": 1, "x": "a"}, {"k": 2, "x": "a"}]
        assert expand_grid([{"k": 4}]) == [{"k": 4}]

    def test_single_point(self):
        result = grid_search("knn", {"k": [2]}, synthetic(1), seed=0)
        assert result.best["config"] == {"k": 2} and len(result.leaderboard) == 1

    def test_duplicate_days_make_k1_exact(self, rng):
        # the split depends only on which rows are complete, so it can be read off
        # first and every held-out day then given an exact twin among the training days
        rows = rng.gamma(2.0, 10.0, (60, 24)).round()
        spec = ExperimentSpec("dedicated", (), derive_seed(1, "grid-split"), derive_seed(1, "grid-mask"))
        split = prepare({"b": day_matrix(rows)}, spec)[0]["b"].split
        for i, v in enumerate(split.val_rows):
            rows[v] = rows[split.train_rows[i]]
        result = grid_search("knn", {"k": [1, 3, 5]}, {"b": day_matrix(rows)}, seed=1)
        assert result.best["config"] == {"k": 1} and result.best["mae_norm"] == 0.0
        assert all(r["mae_norm"] > 0 for r in result.leaderboard[1:])

    def test_ties_go_to_first_grid_point(self):
        flat = BuildingProfile(base_night_rate=10, workday_peak=10, weekend_factor=1, noise_std=0)
        m = build_day_matrix(generate_building(flat, 30, seed=0)[0])
        result = grid_search("knn", {"k": [3, 1, 2]}, {"b": m}, seed=0)
        assert result.best["config"] == {"k": 3} and result.best["rank_in_grid"] == 0

    def test_grid_masking_differs_from_default_experiment(self):
        data = synthetic(1, 60)
        default = run_experiment(ExperimentSpec("dedicated", FAST[:1]), data).manifests["B00"]
        spec = ExperimentSpec("dedicated", (), derive_seed(0, "grid-split"), derive_seed(0, "grid-mask"))
        held_out = prepare(data, spec)[0]["B00"]
        assert held_out.split.to_dict() != default["split"]
