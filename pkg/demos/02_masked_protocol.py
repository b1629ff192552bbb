"""
The masked evaluation protocol
==============================

Complete days are split 80/20. Every validation day gets one extra hour hidden,
and imputers are scored on exactly those hidden hours.
"""

import numpy as np

from wmimpute.preprocessing import apply_norm, build_day_matrix, fit_normalizer, mask_validation, split_complete_days
from wmimpute.synthgen import BuildingProfile, GapMechanism, generate_building, inject_gaps

truth, _ = generate_building(BuildingProfile(), n_days=120, seed=2)
series = inject_gaps(truth, GapMechanism("burst", 0.08, seed=2))
days = build_day_matrix(series)

split, incomplete = split_complete_days(days, ratio=0.8, seed=0)
print(f"{days.n_rows} days: {len(split.train_rows)} train, {len(split.val_rows)} validation, {len(incomplete)} incomplete")

# z-score per hour column, fitted on training days only
train = days.values[list(split.train_rows)]
stats = fit_normalizer(train)
print("column means (first 8 hours):", stats.mean[:8].round(1).tolist())

val = mask_validation(days.values[list(split.val_rows)], seed=1, source_rows=split.val_rows)
print("hidden cells (row, hour, true l/h):", [(r, c, v) for r, c, v in val.hidden[:5]], "...")

# the same seed always hides the same hours
again = mask_validation(days.values[list(split.val_rows)], seed=1, source_rows=split.val_rows)
print("replayable:", again.hidden == val.hidden)

normalized = apply_norm(train, stats)
print("normalized train mean/std:", round(float(normalized.mean()), 6), round(float(normalized.std()), 6))
print("hidden-hour histogram:", np.bincount([c for _, c, _ in val.hidden], minlength=24).tolist())
