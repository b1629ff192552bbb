"""Masked-MAE evaluation of imputers in dedicated and common (pooled) modes."""

from __future__ import annotations

import csv
import datetime as dt
import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from . import __version__
from .core import UTC, DayMatrix, NormStats
from .errors import PipelineError
from .imputers import make_imputer
from .imputers.attention import AttentionImputer
from .preprocessing import MaskedValidation, apply_norm, fit_normalizer, invert_norm, mask_validation, split_complete_days
from .rng import PRNG_NAME, derive_seed, make_rng

REPORT_SCHEMA_VERSION = 1
NORMALIZATION_NOTE = "per-building z-score per hour column, fitted on that building's training rows"
SPLIT_NOTE = "per-building random split of complete days; common mode pools the normalized training rows"


def mae(predicted, actual, at) -> float:
    """Mean of ``|predicted - actual|`` over the cells selected by ``at``."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    at = np.asarray(at, dtype=bool)
    if predicted.shape != actual.shape or at.shape != actual.shape:
        raise PipelineError("shape-error", "predicted, actual and mask shapes must match")
    if not at.any():
        raise PipelineError("no-cells-to-score", "the scoring mask selects no cells")
    return float(np.abs(predicted[at] - actual[at]).mean())


@dataclass(frozen=True)
class ModelSpec:
    name: str
    family: str
    config: dict = field(default_factory=dict)

    def build(self):
        return make_imputer(self.family, self.config)

    def to_dict(self):
        return {"name": self.name, "family": self.family, "config": dict(self.config)}


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str
    models: tuple
    split_seed: int = 0
    mask_seed: int = 1
    model_seed: int = 2
    ratio: float = 0.8
    normalize: bool = True
    per_building_seeds: bool = True

    def __post_init__(self):
        if self.mode not in ("dedicated", "common"):
            raise PipelineError("bad-config", f"mode must be 'dedicated' or 'common', got {self.mode!r}")
        if any(s is None for s in (self.split_seed, self.mask_seed, self.model_seed)):
            raise PipelineError("bad-config", "all seeds must be set")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise PipelineError("bad-config", "model names must be unique")
        object.__setattr__(self, "models", tuple(self.models))

    def seeds_for(self, building):
        if not self.per_building_seeds:
            return self.split_seed, self.mask_seed
        return derive_seed(self.split_seed, building), derive_seed(self.mask_seed, building)

    def to_dict(self):
        return {
            "mode": self.mode,
            "models": [m.to_dict() for m in self.models],
            "seeds": {"split": self.split_seed, "mask": self.mask_seed, "model": self.model_seed},
            "ratio": self.ratio,
            "normalize": self.normalize,
            "per_building_seeds": self.per_building_seeds,
        }


@dataclass
class BuildingData:
    """One building's split, normalizer and masked validation (raw and normalized).

    ``selection`` masks the same validation rows at other cells; training
    picks its best epoch there, so the scored cells never steer selection.
    """

    matrix: DayMatrix
    split: object
    incomplete: tuple
    norm: NormStats
    train: np.ndarray
    validation: MaskedValidation
    validation_raw: MaskedValidation
    selection: MaskedValidation


def _identity_norm():
    return NormStats(np.zeros(24), np.ones(24), 0)


def normalize_validation(val: MaskedValidation, stats: NormStats) -> MaskedValidation:
    truth = apply_norm(val.truth, stats)
    hidden = tuple((r, c, float(truth[r, c])) for r, c, _ in val.hidden)
    return MaskedValidation(apply_norm(val.rows, stats), truth, hidden, val.seed, val.source_rows)


def selection_mask(scored: MaskedValidation, seed: int) -> MaskedValidation:
    """Hide one cell per row of ``scored``, chosen uniformly among the other 23."""
    truth = scored.truth
    n, width = truth.shape
    scored_cols = np.array([c for _, c, _ in sorted(scored.hidden)], dtype=int)
    cols = (scored_cols + make_rng(seed).integers(1, width, size=n)) % width
    rows = truth.copy()
    rows[np.arange(n), cols] = np.nan
    hidden = tuple((i, int(c), float(truth[i, c])) for i, c in enumerate(cols))
    return MaskedValidation(rows, truth, hidden, seed, scored.source_rows)


def prepare_building(m: DayMatrix, spec: ExperimentSpec) -> BuildingData:
    split_seed, mask_seed = spec.seeds_for(m.building_id)
    split, incomplete = split_complete_days(m, spec.ratio, split_seed)
    train_raw = m.values[list(split.train_rows)]
    norm = fit_normalizer(train_raw) if spec.normalize else _identity_norm()
    raw = mask_validation(m.values[list(split.val_rows)], mask_seed, source_rows=split.val_rows)
    selection = normalize_validation(selection_mask(raw, derive_seed(mask_seed, "selection")), norm)
    return BuildingData(m, split, incomplete, norm, apply_norm(train_raw, norm), normalize_validation(raw, norm), raw,
                        selection)


def prepare(dataset: dict, spec: ExperimentSpec):
    """Prepare every building; returns ``(prepared, excluded)``."""
    prepared, excluded = {}, []
    for b in sorted(dataset):
        try:
            prepared[b] = prepare_building(dataset[b], spec)
        except PipelineError as exc:
            if exc.code not in ("insufficient-complete-days", "insufficient-data"):
                raise
            excluded.append({"building": b, "reason": exc.code, "complete_days": int(dataset[b].complete_rows().size)})
    if not prepared:
        raise PipelineError("no-usable-buildings", "no building has enough complete days")
    return prepared, excluded


def _fit(model: ModelSpec, train, seed, validation=None):
    imputer = model.build()
    if isinstance(imputer, AttentionImputer):
        return imputer.fit(train, seed=seed, validation=validation)
    return imputer.fit(train, seed=seed)


def _pooled_validation(parts):
    rows = np.vstack([p.rows for p in parts])
    truth = np.vstack([p.truth for p in parts])
    hidden, offset = [], 0
    for p in parts:
        hidden.extend((r + offset, c, v) for r, c, v in p.hidden)
        offset += p.rows.shape[0]
    return MaskedValidation(rows, truth, tuple(hidden), parts[0].seed)


def _hour_stamp(day: dt.date, hour: int, tz: str) -> str:
    zone = UTC if tz == "UTC" else ZoneInfo(tz)
    stamp = dt.datetime.combine(day, dt.time(hour), tzinfo=zone)
    if tz == "UTC":
        return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")
    return stamp.isoformat()


@dataclass
class EvaluationReport:
    """Per-building and aggregate masked MAE for one experiment.

    ``results`` rows carry ``building, model, mode, mae_norm, mae_lph, n_cells``;
    ``aggregate`` holds the unweighted mean over buildings for each model.
    ``series`` maps building -> model -> list of ``(timestamp, actual, imputed)``
    in liters/hour. ``timings`` is the only non-deterministic field.
    """

    spec: dict
    results: list
    aggregate: list
    excluded: list
    manifests: dict
    series: dict
    timings: dict = field(default_factory=dict)
    histories: dict = field(default_factory=dict)
    fitted: dict = field(default_factory=dict, repr=False)  # model -> building -> imputer, not serialized

    def to_dict(self, include_timings=True):
        out = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "package_version": __version__,
            "prng": PRNG_NAME,
            "normalization": NORMALIZATION_NOTE,
            "split_policy": SPLIT_NOTE,
            "aggregate_weighting": "unweighted mean over buildings",
            "spec": self.spec,
            "results": self.results,
            "aggregate": self.aggregate,
            "excluded": self.excluded,
            "manifests": self.manifests,
            "histories": self.histories,
        }
        if include_timings:
            out["timings"] = self.timings
        return out

    def to_json(self, include_timings=True) -> str:
        return json.dumps(self.to_dict(include_timings), sort_keys=True, indent=1)

    def mae_table(self, unit="mae_norm"):
        """``{model: {building: mae}}``."""
        table = {}
        for row in self.results:
            table.setdefault(row["model"], {})[row["building"]] = row[unit]
        return table

    def aggregate_of(self, model, unit="mae_norm"):
        for row in self.aggregate:
            if row["model"] == model:
                return row[unit]
        raise KeyError(model)

    def write(self, outdir):
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(self.to_json() + "\n")
        write_mae_csv([self], outdir / "mae_by_building.csv")
        for b, models in sorted(self.series.items()):
            write_series_csv(b, models, outdir / f"imputed_vs_actual_{b}.csv")


def write_mae_csv(reports, path, append=False):
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not append:
            writer.writerow(("building", "model", "mode", "mae_norm", "mae_lph"))
        for report in reports:
            for row in report.results:
                writer.writerow((row["building"], row["model"], row["mode"], repr(float(row["mae_norm"])), repr(float(row["mae_lph"]))))


def write_series_csv(building, models, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("timestamp", "actual", "imputed", "model"))
        for model in sorted(models):
            for stamp, actual, imputed in models[model]:
                writer.writerow((stamp, repr(float(actual)), repr(float(imputed)), model))


def run_experiment(spec: ExperimentSpec, dataset: dict, prepared=None) -> EvaluationReport:
    """Fit every model in ``spec`` and score it on each building's masked validation.

    ``dataset`` maps building id -> :class:`DayMatrix`. Dedicated mode fits one
    model per building; common mode fits one model on the pooled training rows
    and scores it on every building. Every model sees the same splits and
    masks. Buildings without enough complete days are excluded and listed.
    """
    if prepared is None:
        prepared, excluded = prepare(dataset, spec)
    else:
        prepared, excluded = prepared
    buildings = sorted(prepared)
    results, series, timings, histories = [], {b: {} for b in buildings}, {}, {}
    fitted_models = {}

    for model in spec.models:
        fitted = {}
        started = time.perf_counter()
        if spec.mode == "dedicated":
            for b in buildings:
                d = prepared[b]
                fitted[b] = _fit(model, d.train, derive_seed(spec.model_seed, model.name, b), d.selection)
        else:
            pooled = np.vstack([prepared[b].train for b in buildings])
            validation = _pooled_validation([prepared[b].selection for b in buildings])
            shared = _fit(model, pooled, derive_seed(spec.model_seed, model.name), validation)
            fitted = {b: shared for b in buildings}
        fitted_models[model.name] = fitted
        fit_seconds = time.perf_counter() - started

        started = time.perf_counter()
        for b in buildings:
            d = prepared[b]
            imputed = fitted[b].impute(d.validation.rows)
            hidden = d.validation.hidden_mask
            imputed_lph = invert_norm(imputed, d.norm)
            results.append({
                "building": b,
                "model": model.name,
                "mode": spec.mode,
                "mae_norm": mae(imputed, d.validation.truth, hidden),
                "mae_lph": mae(imputed_lph, d.validation_raw.truth, hidden),
                "n_cells": int(hidden.sum()),
            })
            rows = []
            for r, c, true_value in d.validation_raw.hidden:
                day = d.matrix.dates[d.validation_raw.source_rows[r]]
                rows.append((_hour_stamp(day, c, d.matrix.tz), float(true_value), float(imputed_lph[r, c])))
            series[b][model.name] = rows
            history = getattr(fitted[b], "history_", None)
            if history is not None and (spec.mode == "dedicated" or b == buildings[0]):
                histories.setdefault(model.name, {})["pooled" if spec.mode == "common" else b] = history.to_dict()
        timings[model.name] = {"fit_seconds": fit_seconds, "impute_seconds": time.perf_counter() - started}

    aggregate = []
    for model in spec.models:
        rows = [r for r in results if r["model"] == model.name]
        aggregate.append({
            "model": model.name,
            "mode": spec.mode,
            "mae_norm": float(np.mean([r["mae_norm"] for r in rows])),
            "mae_lph": float(np.mean([r["mae_lph"] for r in rows])),
            "buildings": len(rows),
        })
    manifests = {
        b: {
            "split": prepared[b].split.to_dict(),
            "incomplete_rows": list(prepared[b].incomplete),
            "mask": prepared[b].validation_raw.to_dict(),
            "selection_mask": {"seed": prepared[b].selection.seed,
                               "hidden": [[int(r), int(c)] for r, c, _ in prepared[b].selection.hidden]},
            "norm": prepared[b].norm.to_dict(),
        }
        for b in buildings
    }
    return EvaluationReport(spec.to_dict(), results, aggregate, excluded, manifests, series, timings, histories, fitted_models)


def expand_grid(grid) -> list:
    """A dict of lists becomes its cartesian product in key order; a list passes through."""
    if isinstance(grid, dict):
        keys = list(grid)
        return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]
    return [dict(g) for g in grid]


@dataclass
class GridSearchResult:
    best: dict
    leaderboard: list


def grid_search(family: str, grid, dataset: dict, seed: int, mode: str = "dedicated", ratio: float = 0.8) -> GridSearchResult:
    """Score every configuration in ``grid`` on a held-out masking.

    The split and mask seeds are derived from ``seed`` so that the masking
    differs from the one used by a final :func:`run_experiment`. The lowest
    aggregate normalized MAE wins; ties go to the earlier grid point.
    """
    configs = expand_grid(grid)
    if not configs:
        raise PipelineError("bad-config", "empty grid")
    models = tuple(ModelSpec(f"{family}[{i}]", family, cfg) for i, cfg in enumerate(configs))
    spec = ExperimentSpec(mode, models, derive_seed(seed, "grid-split"), derive_seed(seed, "grid-mask"),
                          derive_seed(seed, "grid-model"), ratio)
    report = run_experiment(spec, dataset)
    leaderboard = [
        {"rank_in_grid": i, "config": cfg, "mae_norm": report.aggregate_of(m.name), "mae_lph": report.aggregate_of(m.name, "mae_lph")}
        for i, (cfg, m) in enumerate(zip(configs, models))
    ]
    best = min(leaderboard, key=lambda row: (row["mae_norm"], row["rank_in_grid"]))
    return GridSearchResult(best, leaderboard)


def table_two(reports) -> list:
    """Rows ``{model, mae_dedicated, mae_common}`` built from experiment reports."""
    rows = {}
    for report in reports:
        for agg in report.aggregate:
            rows.setdefault(agg["model"], {"model": agg["model"]})[f"mae_{agg['mode']}"] = agg["mae_norm"]
    return list(rows.values())
