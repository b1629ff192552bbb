"""Domain types shared by every stage of the pipeline.

Missing slots are stored as NaN inside float arrays and always travel with an
explicit boolean ``mask`` (True where a value is present). Code never relies on
NaN propagation for correctness; it selects present cells through the mask.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import PipelineError

HOURS_PER_DAY = 24
STD_FLOOR = 1e-8

UTC = dt.timezone.utc


def _frozen(array, dtype=np.float64):
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RawReading:
    """One decoded meter observation: a cumulative register in liters."""

    building_id: str
    timestamp: dt.datetime
    register: float

    def __post_init__(self):
        if self.timestamp.tzinfo is None:
            raise PipelineError("naive-timestamp", "timestamps must be timezone-aware")
        if not np.isfinite(self.register) or self.register < 0:
            raise PipelineError("negative-register", f"invalid register {self.register!r}")


@dataclass(frozen=True)
class HourlySeries:
    """Hourly consumption (liters/hour) for one building.

    ``values[i]`` is the consumption during the hour starting at
    ``start_hour + i hours``; NaN marks an absent slot. ``resets`` lists the
    hours at which a register decrease was observed during aggregation.
    """

    building_id: str
    start_hour: dt.datetime
    values: np.ndarray
    resets: tuple = ()

    def __post_init__(self):
        start = self.start_hour
        if start.tzinfo is None:
            raise PipelineError("naive-timestamp", "start_hour must be timezone-aware")
        start = start.astimezone(UTC)
        if start.minute or start.second or start.microsecond:
            raise PipelineError("not-hour-aligned", f"start_hour {start} is not on an hour boundary")
        values = _frozen(self.values)
        if values.ndim != 1:
            raise PipelineError("shape-error", "hourly values must be one-dimensional")
        present = values[~np.isnan(values)]
        if np.any(present < 0):
            raise PipelineError("negative-consumption", "present hourly values must be >= 0")
        object.__setattr__(self, "start_hour", start)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "resets", tuple(self.resets))

    @property
    def mask(self):
        return ~np.isnan(self.values)

    def __len__(self):
        return self.values.shape[0]

    @property
    def end_hour(self):
        """Exclusive end of the series window."""
        return self.start_hour + dt.timedelta(hours=len(self))

    def hour_starts(self):
        return [self.start_hour + dt.timedelta(hours=i) for i in range(len(self))]

    def concat(self, other: HourlySeries) -> HourlySeries:
        if other.building_id != self.building_id or other.start_hour != self.end_hour:
            raise PipelineError("not-adjacent", "series windows must be adjacent and share a building")
        return HourlySeries(
            self.building_id,
            self.start_hour,
            np.concatenate([self.values, other.values]),
            self.resets + other.resets,
        )

    def slice(self, start: int, stop: int) -> HourlySeries:
        return HourlySeries(
            self.building_id,
            self.start_hour + dt.timedelta(hours=start),
            self.values[start:stop],
        )


@dataclass(frozen=True)
class DayMatrix:
    """N x 24 grid of one building's hourly consumption, one row per local day."""

    building_id: str
    dates: tuple
    values: np.ndarray
    mask: np.ndarray
    tz: str = "UTC"

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "mask", _frozen(self.mask, dtype=bool))

    @property
    def n_rows(self):
        return self.values.shape[0]

    def complete_rows(self):
        return np.flatnonzero(self.mask.all(axis=1))

    def incomplete_rows(self):
        return np.flatnonzero(~self.mask.all(axis=1))


class Violation(NamedTuple):
    kind: str
    row: int | None = None
    col: int | None = None


@dataclass(frozen=True)
class SplitIndex:
    train_rows: tuple
    val_rows: tuple
    seed: int

    def to_dict(self):
        return {"seed": self.seed, "train_rows": list(self.train_rows), "val_rows": list(self.val_rows)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(int(i) for i in d["train_rows"]), tuple(int(i) for i in d["val_rows"]), int(d["seed"]))


@dataclass(frozen=True)
class NormStats:
    """Per-hour-column z-score statistics, fitted on training rows only."""

    mean: np.ndarray
    std: np.ndarray
    fitted_on: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "std", _frozen(np.maximum(self.std, STD_FLOOR)))

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "fitted_on": self.fitted_on}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float), int(d["fitted_on"]))


def missing_fraction(series) -> float:
    """Fraction of absent slots in an hourly series (or any 1-D/2-D value array)."""
    values = series.values if hasattr(series, "values") else np.asarray(series, float)
    if values.size == 0:
        raise PipelineError("empty-series", "cannot compute the missing fraction of an empty series")
    return float(np.count_nonzero(np.isnan(values))) / values.size


def validate_day_matrix(m: DayMatrix) -> list[Violation]:
    """Return every invariant violation of ``m``; an empty list means valid."""
    out = []
    values, mask = m.values, m.mask
    if values.ndim != 2 or values.shape[1] != HOURS_PER_DAY or mask.shape != values.shape:
        return [Violation("shape")]
    if len(m.dates) != values.shape[0]:
        out.append(Violation("row-count"))

    present = ~np.isnan(values)
    for r, c in zip(*np.nonzero(present != mask)):
        out.append(Violation("mask-mismatch", int(r), int(c)))
    with np.errstate(invalid="ignore"):
        negative = present & (values < 0)
    for r, c in zip(*np.nonzero(negative)):
        out.append(Violation("negative-value", int(r), int(c)))

    seen = {}
    for i, d in enumerate(m.dates):
        if d in seen:
            out.append(Violation("duplicate-date", i))
        else:
            seen[d] = i
        if i and m.dates[i - 1] > d:
            out.append(Violation("unordered-dates", i))
    return out
