"""
Dedicated versus common models
==============================

Ten buildings share one usage pattern at different scales, and occupancy
swings from day to day. Each has only a couple of months of complete days.
Dedicated models see one building; the common model sees every building's
(individually normalized) training days.
"""

from wmimpute.evaluation import ExperimentSpec, ModelSpec, run_experiment, table_two
from wmimpute.preprocessing import build_day_matrix, census
from wmimpute.synthgen import BuildingProfile, GapMechanism, generate_dataset, inject_gaps

dataset = generate_dataset(10, 75, seed=21, profile=BuildingProfile(day_level_std=0.3), scale_jitter=0.3)
series = {b: inject_gaps(t, GapMechanism("random-point", 0.002 * i, seed=i)) for i, (b, (t, _)) in enumerate(dataset.items())}
matrices = {b: build_day_matrix(s) for b, s in series.items()}

print(f"{'building':<10}{'rows':>6}{'% missing':>11}")
for row in census(series, matrices):
    print(f"{row['building']:<10}{row['day_rows']:>6}{row['pct_missing']:>11.2f}")

models = (
    ModelSpec("mean", "mean"),
    ModelSpec("knn", "knn", {"k": 3}),
    ModelSpec("attention", "attention", {"n_layers": 1, "d_model": 32, "d_ff": 32, "n_heads": 2,
                                         "d_k": 16, "d_v": 16, "epochs": 20}),
)
reports = [run_experiment(ExperimentSpec(mode, models), matrices) for mode in ("dedicated", "common")]

print(f"\n{'model':<12}{'dedicated':>11}{'common':>9}")
for row in table_two(reports):
    print(f"{row['model']:<12}{row['mae_dedicated']:>11.4f}{row['mae_common']:>9.4f}")
