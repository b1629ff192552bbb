"""Imputers sharing one fit/impute contract, plus a family registry."""

from dataclasses import fields, replace

from ..errors import PipelineError
from .attention import PRESETS, AttentionConfig, AttentionImputer, TrainConfig
from .base import Imputer
from .baselines import InterpImputer, MeanImputer
from .forest import MissForestConfig, MissForestImputer
from .knn import KnnConfig, KnnImputer

FAMILIES = ("mean", "interp", "knn", "missforest", "saits", "transformer", "attention")

KINDS = {cls.kind: cls for cls in (MeanImputer, InterpImputer, KnnImputer, MissForestImputer, AttentionImputer)}


def _split_attention_config(family, config):
    config = dict(config)
    preset = config.pop("preset", family if family in PRESETS else "saits")
    arch_names = {f.name for f in fields(AttentionConfig)}
    train_names = {f.name for f in fields(TrainConfig)}
    unknown = set(config) - arch_names - train_names
    if unknown:
        raise PipelineError("bad-config", f"unknown attention options: {sorted(unknown)}")
    if preset not in PRESETS:
        raise PipelineError("bad-config", f"unknown attention preset {preset!r}")
    arch = replace(PRESETS[preset], **{k: v for k, v in config.items() if k in arch_names})
    train = TrainConfig(**{k: v for k, v in config.items() if k in train_names})
    return arch, train


def make_imputer(family: str, config: dict | None = None) -> Imputer:
    """Build an unfitted imputer of ``family`` from a plain config dict."""
    config = dict(config or {})
    try:
        if family == "mean":
            return MeanImputer()
        if family == "interp":
            return InterpImputer()
        if family == "knn":
            return KnnImputer(config=KnnConfig(**config))
        if family == "missforest":
            return MissForestImputer(MissForestConfig(**config))
        if family in ("saits", "transformer", "attention"):
            return AttentionImputer(*_split_attention_config(family, config))
    except TypeError as exc:
        raise PipelineError("bad-config", f"invalid {family} config: {exc}") from exc
    raise PipelineError("unknown-family", f"unknown imputer family {family!r}")


__all__ = [
    "AttentionConfig", "AttentionImputer", "FAMILIES", "Imputer", "InterpImputer", "KINDS", "KnnConfig",
    "KnnImputer", "MeanImputer", "MissForestConfig", "MissForestImputer", "PRESETS", "TrainConfig", "make_imputer",
]
