"""Run configuration loaded from TOML.

Shape::

    [data]
    readings = "readings.csv"   # or: hourly = "...", or: days = "..."
    timezone = "UTC"
    reset_policy = "flag"

    [split]
    ratio = 0.8

    [seeds]
    split = 0
    mask = 1
    model = 2

    [output]
    dir = "out"

    [evaluate]
    modes = ["dedicated", "common"]

    [[models]]
    name = "knn"
    family = "knn"
    config = { k = 3 }

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import PipelineError
from .evaluation import ExperimentSpec, ModelSpec
from .imputers import FAMILIES

_SECTIONS = {"data", "split", "seeds", "output", "evaluate", "models"}


@dataclass(frozen=True)
class RunConfig:
    data: dict
    timezone: str = "UTC"
    reset_policy: str = "flag"
    ratio: float = 0.8
    seeds: dict = field(default_factory=lambda: {"split": 0, "mask": 1, "model": 2})
    output_dir: Path = Path("out")
    modes: tuple = ("dedicated", "common")
    models: tuple = ()

    def experiment(self, mode: str) -> ExperimentSpec:
        return ExperimentSpec(mode, self.models, self.seeds["split"], self.seeds["mask"], self.seeds["model"], self.ratio)


def _fail(message):
    raise PipelineError("config-error", message)


def parse_config(raw: dict, base: Path = Path(".")) -> RunConfig:
    unknown = set(raw) - _SECTIONS
    if unknown:
        _fail(f"unknown config sections: {sorted(unknown)}")
    data = dict(raw.get("data", {}))
    inputs = {k: data[k] for k in ("readings", "hourly", "days") if k in data}
    if len(inputs) != 1:
        _fail("[data] must name exactly one of readings, hourly, days")
    kind, path = next(iter(inputs.items()))
    resolved = {kind: (base / path).resolve()}

    ratio = raw.get("split", {}).get("ratio", 0.8)
    if not isinstance(ratio, (int, float)) or not 0 < ratio < 1:
        _fail("split.ratio must lie in (0, 1)")

    seeds = {"split": 0, "mask": 1, "model": 2}
    for k, v in raw.get("seeds", {}).items():
        if k not in seeds or not isinstance(v, int) or v < 0:
            _fail(f"seeds.{k} must be one of split/mask/model and a non-negative integer")
        seeds[k] = v

    out = (base / raw.get("output", {}).get("dir", "out")).resolve()
    if any(p == out or out in p.parents for p in resolved.values()):
        _fail("input paths must not lie inside the output directory")

    modes = tuple(raw.get("evaluate", {}).get("modes", ["dedicated", "common"]))
    if not modes or any(m not in ("dedicated", "common") for m in modes):
        _fail("evaluate.modes must be a non-empty subset of dedicated/common")

    models = []
    for i, m in enumerate(raw.get("models", [])):
        if "family" not in m or m["family"] not in FAMILIES:
            _fail(f"models[{i}].family must be one of {', '.join(FAMILIES)}")
        models.append(ModelSpec(m.get("name", m["family"]), m["family"], dict(m.get("config", {}))))
    if not models:
        _fail("at least one [[models]] entry is required")
    if len({m.name for m in models}) != len(models):
        _fail("model names must be unique")

    return RunConfig(
        data=resolved,
        timezone=data.get("timezone", "UTC"),
        reset_policy=data.get("reset_policy", "flag"),
        ratio=float(ratio),
        seeds=seeds,
        output_dir=out,
        modes=modes,
        models=tuple(models),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise PipelineError("missing-input", f"no such config file: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise PipelineError("config-error", f"invalid TOML: {exc}") from exc
    return parse_config(raw, path.parent)
