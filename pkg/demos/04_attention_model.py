"""
A self-attention imputer
========================

Each hour becomes a token built from its value and a present/absent bit. The
model learns by hiding one known hour per day and reconstructing it. This demo
uses a narrow model and few epochs so it finishes in seconds; the full SAITS
preset is ``make_imputer("saits")``.
"""

import numpy as np

from wmimpute.imputers import AttentionConfig, AttentionImputer, TrainConfig
from wmimpute.imputers.attention import gradient_check
from wmimpute.preprocessing import apply_norm, build_day_matrix, fit_normalizer, invert_norm, mask_validation
from wmimpute.synthgen import BuildingProfile, generate_building

small = AttentionConfig(n_layers=1, d_model=32, d_ff=32, n_heads=2, d_k=16, d_v=16, dropout=0.1, attn_dropout=0.1)

# backprop agrees with central differences
print("gradient check, max relative error:", f"{gradient_check(small, seed=0):.2e}")

truth, _ = generate_building(BuildingProfile(), n_days=150, seed=4)
rows = build_day_matrix(truth).values
stats = fit_normalizer(rows[:120])
train, held = apply_norm(rows[:120], stats), apply_norm(rows[120:], stats)
validation = mask_validation(held, seed=0)

model = AttentionImputer(small, TrainConfig(epochs=15, batch_size=32)).fit(train, seed=0, validation=validation)
print("validation MAE by epoch:", np.round(model.history_.val_mae, 3).tolist())
print("kept epoch", model.history_.best_epoch)

# attention weights for one day: every row is a distribution over the 24 hours
record = []
model.reconstruct(validation.rows[:1], record=record)
weights = record[0][0, 0]
print("row sums:", np.unique(weights.sum(axis=1).round(12)).tolist())
print("09:00 attends most to hours", np.argsort(weights[9])[::-1][:4].tolist())

filled = invert_norm(model.impute(validation.rows), stats)
r, c, v = validation.hidden[0]
print(f"day {r}, hour {c}: true {stats.mean[c] + v * stats.std[c]:.0f} l/h, imputed {filled[r, c]:.1f} l/h")
