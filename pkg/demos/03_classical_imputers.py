"""
Classical imputers on day vectors
=================================

Mean and interpolation baselines, kNN over incomplete vectors, and MissForest,
all behind the same fit/impute contract.
"""

import numpy as np

from wmimpute.evaluation import ExperimentSpec, ModelSpec, run_experiment
from wmimpute.imputers import KnnImputer
from wmimpute.preprocessing import build_day_matrix
from wmimpute.synthgen import BuildingProfile, generate_building

truth, _ = generate_building(BuildingProfile(), n_days=200, seed=3)
days = build_day_matrix(truth)

# a single query: Tuesday with the 10:00 reading missing
query = days.values[1].copy()
query[10] = np.nan
knn = KnnImputer(k=3).fit(np.delete(days.values, 1, axis=0))
print("neighbours:", knn.neighbors(query)[0].tolist())
print("true 10:00 =", days.values[1, 10], " kNN guess =", round(float(knn.impute(query)[10]), 2))

models = (
    ModelSpec("mean", "mean"),
    ModelSpec("interp", "interp"),
    ModelSpec("knn", "knn", {"k": 3}),
    ModelSpec("missforest", "missforest", {"max_iter": 5}),
)
report = run_experiment(ExperimentSpec("dedicated", models), {"B00": days})
print(f"{'model':<12}{'MAE (z)':>10}{'MAE (l/h)':>12}")
for row in report.aggregate:
    print(f"{row['model']:<12}{row['mae_norm']:>10.4f}{row['mae_lph']:>12.3f}")
