"""Command-line entry point: ``wmimpute <subcommand> ...``.

Every failure prints a one-line JSON object ``{"error": code, ...}`` on stderr
and exits with a code from :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .artifact import load_model, save_model
from .config import load_config
from .errors import PipelineError
from .evaluation import (
    ExperimentSpec,
    ModelSpec,
    grid_search,
    prepare,
    run_experiment,
    table_two,
    write_mae_csv,
    write_series_csv,
)
from .imputers import FAMILIES
from .ingestion import IngestOptions, aggregate_buildings, ingest_report, parse_readings, read_hourly_csv, write_hourly_csv
from .preprocessing import apply_norm, build_day_matrix, census, invert_norm, read_days_csv, write_days_csv
from .synthgen import BuildingProfile, GapMechanism, generate_dataset, inject_gaps, write_readings_csv, write_truth_csv

log = logging.getLogger("wmimpute")

EXIT_CODES = {
    "usage": 2,
    "config-error": 2,
    "bad-config": 2,
    "missing-input": 3,
    "version-mismatch": 4,
    "checksum-mismatch": 5,
    "bad-magic": 5,
    "kind-mismatch": 6,
}
EXIT_OTHER = 1


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _require(path):
    path = Path(path)
    if not path.exists():
        raise PipelineError("missing-input", f"no such file: {path}", path=str(path))
    return path


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _options(pairs):
    out = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise PipelineError("usage", f"expected KEY=VALUE, got {pair!r}")
        out[key] = _parse_value(value)
    return out


def load_days(kind: str, path, tz="UTC", reset_policy="flag"):
    """Load a dataset as ``{building: DayMatrix}`` from any pipeline stage's file."""
    path = _require(path)
    if kind == "days":
        with open(path, newline="") as fh:
            return read_days_csv(fh, tz)
    if kind == "hourly":
        with open(path, newline="") as fh:
            series = read_hourly_csv(fh)
    else:
        parsed = parse_readings(path.read_bytes())
        series = aggregate_buildings(parsed.readings, IngestOptions(reset_policy=reset_policy))
    return {b: build_day_matrix(s, tz) for b, s in series.items()}


# subcommands --------------------------------------------------------------

def cmd_synthgen(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = BuildingProfile(day_level_std=args.day_level_std)
    if args.noise_std is not None:
        profile = dataclasses.replace(profile, noise_std=args.noise_std)
    dataset = generate_dataset(args.buildings, args.days, args.seed, profile, args.scale_jitter)
    if args.gap_rate > 0:
        gapped = {}
        for i, (b, (truth, readings)) in enumerate(sorted(dataset.items())):
            holes = inject_gaps(truth, GapMechanism(args.gap_kind, args.gap_rate, seed=args.seed + 1 + i))
            lost = {h for h, present in zip(truth.hour_starts(), holes.mask) if not present}
            kept = [r for r in readings if r.timestamp.replace(minute=0, second=0) not in lost]
            gapped[b] = (truth, kept)
        dataset = gapped
    with open(out / "readings.csv", "w", newline="") as fh:
        write_readings_csv(dataset, fh)
    with open(out / "truth.csv", "w", newline="") as fh:
        write_truth_csv(dataset, fh)
    print(json.dumps({"readings": str(out / "readings.csv"), "truth": str(out / "truth.csv"), "buildings": len(dataset)}))


def cmd_ingest(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    parsed = parse_readings(_require(args.input).read_bytes())
    series = aggregate_buildings(parsed.readings, IngestOptions(reset_policy=args.reset_policy))
    with open(out / "hourly.csv", "w", newline="") as fh:
        write_hourly_csv(series, fh)
    report = ingest_report(parsed, series)
    _write_json(out / "ingest_report.json", report)
    print(json.dumps({"buildings": report["buildings"], "malformed": len(report["malformed"])}))


def cmd_preprocess(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(_require(args.hourly), newline="") as fh:
        series = read_hourly_csv(fh)
    matrices = {b: build_day_matrix(s, args.tz) for b, s in series.items()}
    with open(out / "days.csv", "w", newline="") as fh:
        write_days_csv(matrices, fh)
    _write_json(out / "census.json", census(series, matrices))
    spec = ExperimentSpec("dedicated", (), args.split_seed, args.mask_seed, 0, args.ratio)
    prepared, excluded = prepare(matrices, spec)
    manifests = {
        b: {"split": d.split.to_dict(), "incomplete_rows": list(d.incomplete), "mask": d.validation_raw.to_dict()}
        for b, d in prepared.items()
    }
    _write_json(out / "manifests.json", {"buildings": manifests, "excluded": excluded, "ratio": args.ratio})
    print(json.dumps({"buildings": len(matrices), "excluded": len(excluded)}))


def cmd_train(args):
    matrices = load_days("days", args.days, args.tz)
    model = ModelSpec(args.family, args.family, _options(args.set))
    spec = ExperimentSpec(args.mode, (model,), args.split_seed, args.mask_seed, args.model_seed, args.ratio)
    if args.mode == "dedicated":
        if args.building is None:
            raise PipelineError("usage", "dedicated training needs --building")
        if args.building not in matrices:
            raise PipelineError("missing-input", f"building {args.building!r} not in {args.days}")
        matrices = {args.building: matrices[args.building]}
    prepared, excluded = prepare(matrices, spec)
    report = run_experiment(spec, matrices, (prepared, excluded))
    buildings = sorted(prepared)
    imputer = report.fitted[model.name][buildings[0]]
    norms = {b: prepared[b].norm for b in buildings}
    save_model(args.out, imputer, norms, {"mode": args.mode, "family": args.family})
    print(json.dumps({"artifact": str(args.out), "kind": imputer.kind,
                      "validation_mae_norm": {r["building"]: r["mae_norm"] for r in report.results}}))


def cmd_impute(args):
    artifact = load_model(args.model)
    imputer = artifact.imputer(args.expect_kind)
    matrices = load_days("days", args.days, args.tz)
    targets = [args.building] if args.building else sorted(matrices)
    out = {}
    for b in targets:
        if b not in matrices:
            raise PipelineError("missing-input", f"building {b!r} not in {args.days}")
        m = matrices[b]
        norm = artifact.norm.get(b)
        if norm is None:
            raise PipelineError("missing-input", f"artifact has no normalization for building {b!r}")
        rows = m.values.copy()
        todo = m.incomplete_rows()
        todo = todo[m.mask[todo].any(axis=1)]  # all-absent days are left as they are
        if todo.size:
            filled = invert_norm(imputer.impute(apply_norm(rows[todo], norm)), norm)
            rows[todo] = np.where(m.mask[todo], rows[todo], np.maximum(filled, 0.0))
        out[b] = type(m)(b, m.dates, rows, ~np.isnan(rows), m.tz)
    with open(args.out, "w", newline="") as fh:
        write_days_csv(out, fh)
    print(json.dumps({"imputed": str(args.out), "buildings": len(out)}))


def _evaluate(cfg, matrices):
    reports = []
    for mode in cfg.modes:
        reports.append(run_experiment(cfg.experiment(mode), matrices))
    return reports


def cmd_evaluate(args):
    cfg = load_config(args.config)
    kind, path = next(iter(cfg.data.items()))
    matrices = load_days(kind, path, cfg.timezone, cfg.reset_policy)
    reports = _evaluate(cfg, matrices)
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    combined = {
        "schema_version": 1,
        "experiments": [r.to_dict() for r in reports],
        "table": table_two(reports),
        "census": census_from_matrices(matrices),
    }
    _write_json(out / "report.json", combined)
    write_mae_csv(reports, out / "mae_by_building.csv")
    for b in sorted(reports[0].series):
        labelled = {f"{model}@{r.spec['mode']}": rows for r in reports for model, rows in r.series.get(b, {}).items()}
        write_series_csv(b, labelled, out / f"imputed_vs_actual_{b}.csv")
    manifests = {r.spec["mode"]: r.manifests for r in reports}
    _write_json(out / "manifests.json", manifests)
    print(format_table(combined["table"]))


def census_from_matrices(matrices):
    rows = []
    for b in sorted(matrices):
        m = matrices[b]
        rows.append({
            "building": b,
            "rows": m.n_rows,
            "complete_days": int(m.complete_rows().size),
            "pct_missing": round(100.0 * float((~m.mask).mean()), 4),
        })
    return rows


def cmd_grid_search(args):
    cfg = load_config(args.config)
    kind, path = next(iter(cfg.data.items()))
    matrices = load_days(kind, path, cfg.timezone, cfg.reset_policy)
    grid = json.loads(args.grid)
    result = grid_search(args.family, grid, matrices, args.seed, args.mode, cfg.ratio)
    payload = {"family": args.family, "mode": args.mode, "seed": args.seed, "best": result.best, "leaderboard": result.leaderboard}
    if args.out:
        _write_json(args.out, payload)
    print(json.dumps(payload["best"], sort_keys=True))


def format_table(table, census_rows=None):
    lines = [f"{'Model':<14}{'MAE dedicated':>16}{'MAE common':>14}"]
    for row in table:
        ded, com = row.get("mae_dedicated"), row.get("mae_common")
        lines.append(f"{row['model']:<14}{'' if ded is None else f'{ded:.4f}':>16}{'' if com is None else f'{com:.4f}':>14}")
    if census_rows:
        lines.append("")
        lines.append(f"{'Building':<10}{'Rows':>8}{'Complete':>10}{'% missing':>12}")
        for r in census_rows:
            lines.append(f"{r['building']:<10}{r['rows']:>8}{r['complete_days']:>10}{r['pct_missing']:>12.2f}")
    return "\n".join(lines)


def cmd_report(args):
    report = json.loads(_require(args.report).read_text())
    if "table" not in report:
        raise PipelineError("config-error", "report.json lacks a 'table' section")
    print(format_table(report["table"], report.get("census")))


def build_parser():
    p = argparse.ArgumentParser(prog="wmimpute", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthgen", help="write synthetic readings and a ground-truth sidecar")
    s.add_argument("--buildings", type=int, default=3)
    s.add_argument("--days", type=int, default=400)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scale-jitter", type=float, default=0.2)
    s.add_argument("--noise-std", type=float, default=None)
    s.add_argument("--day-level-std", type=float, default=0.0)
    s.add_argument("--gap-kind", choices=("random-point", "burst", "whole-day"), default="random-point")
    s.add_argument("--gap-rate", type=float, default=0.0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_synthgen)

    s = sub.add_parser("ingest", help="difference cumulative readings into hourly consumption")
    s.add_argument("--input", required=True)
    s.add_argument("--reset-policy", choices=("flag", "error", "clamp-zero"), default="flag")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("preprocess", help="build day vectors, census, split and mask manifests")
    s.add_argument("--hourly", required=True)
    s.add_argument("--tz", default="UTC")
    s.add_argument("--ratio", type=float, default=0.8)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--mask-seed", type=int, default=1)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train", help="fit one imputer and save a model artifact")
    s.add_argument("--days", required=True)
    s.add_argument("--family", choices=FAMILIES, required=True)
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="model option (JSON value)")
    s.add_argument("--mode", choices=("dedicated", "common"), default="dedicated")
    s.add_argument("--building")
    s.add_argument("--tz", default="UTC")
    s.add_argument("--ratio", type=float, default=0.8)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--mask-seed", type=int, default=1)
    s.add_argument("--model-seed", type=int, default=2)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("impute", help="fill the missing cells of a days file with a saved model")
    s.add_argument("--model", required=True)
    s.add_argument("--days", required=True)
    s.add_argument("--building")
    s.add_argument("--expect-kind")
    s.add_argument("--tz", default="UTC")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_impute)

    s = sub.add_parser("evaluate", help="run the masked evaluation described by a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("grid-search", help="score a configuration grid for one imputer family")
    s.add_argument("--config", required=True)
    s.add_argument("--family", choices=FAMILIES, required=True)
    s.add_argument("--grid", required=True, help='JSON, e.g. \'{"k": [1, 3, 5]}\'')
    s.add_argument("--mode", choices=("dedicated", "common"), default="dedicated")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_grid_search)

    s = sub.add_parser("report", help="print the model comparison table and census from report.json")
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            sys.stderr.write(json.dumps({"error": "usage", "message": "invalid command line"}) + "\n")
            return EXIT_CODES["usage"]
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PipelineError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return EXIT_CODES.get(exc.code, EXIT_OTHER)
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io-error", "message": str(exc)}) + "\n")
        return EXIT_OTHER
    return 0


if __name__ == "__main__":
    sys.exit(main())
