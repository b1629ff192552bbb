"""Synthetic multi-building consumption data with known ground truth.

Buildings follow an office-like weekly cycle: a flat night rate, a plateau
during working hours, and a damped profile on weekends and holidays. An
optional per-day level (``day_level_std``) scales whole days, modelling
occupancy that varies from one day to the next. Hourly
truth is quantized to whole liters (meter resolution), which keeps the
cumulative register sums exact in float64.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .core import HOURS_PER_DAY, UTC, HourlySeries, RawReading
from .errors import PipelineError
from .ingestion import format_timestamp
from .rng import derive_seed, make_rng

DEFAULT_START = dt.datetime(2019, 1, 1, tzinfo=UTC)

# Fixed-date public holidays observed in Greece, as (month, day).
GREEK_FIXED_HOLIDAYS = frozenset({(1, 1), (1, 6), (3, 25), (5, 1), (8, 15), (10, 28), (12, 25), (12, 26)})


@dataclass(frozen=True)
class BuildingProfile:
    base_night_rate: float = 5.0
    workday_peak: float = 60.0
    peak_hours: frozenset = frozenset(range(7, 20))
    weekend_factor: float = 0.2
    noise_std: float = 6.0
    day_level_std: float = 0.0
    holiday_dates: frozenset = GREEK_FIXED_HOLIDAYS
    seed: int = 0

    def __post_init__(self):
        if min(self.base_night_rate, self.workday_peak, self.noise_std, self.day_level_std) < 0:
            raise PipelineError("bad-profile", "rates and noise must be non-negative")
        if not 0 <= self.weekend_factor <= 1:
            raise PipelineError("bad-profile", "weekend_factor must lie in [0, 1]")
        object.__setattr__(self, "peak_hours", frozenset(self.peak_hours))
        object.__setattr__(self, "holiday_dates", frozenset(self.holiday_dates))

    def scaled(self, factor: float) -> BuildingProfile:
        """Same shape, all rates (and noise) multiplied by ``factor``."""
        return dataclasses.replace(
            self,
            base_night_rate=self.base_night_rate * factor,
            workday_peak=self.workday_peak * factor,
            noise_std=self.noise_std * factor,
        )

    def is_holiday(self, day: dt.date) -> bool:
        return day in self.holiday_dates or (day.month, day.day) in self.holiday_dates


@dataclass(frozen=True)
class GapMechanism:
    kind: str = "random-point"
    rate: float = 0.0
    burst_len: tuple = (2, 48)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("random-point", "burst", "whole-day"):
            raise PipelineError("bad-gap-kind", f"unknown gap kind {self.kind!r}")
        if not 0 <= self.rate <= 1:
            raise PipelineError("bad-gap-rate", "gap rate must lie in [0, 1]")
        lo, hi = self.burst_len
        if not 1 <= lo <= hi:
            raise PipelineError("bad-gap-kind", "burst_len must satisfy 1 <= min <= max")


def expected_rates(profile: BuildingProfile, n_days: int, start: dt.datetime = DEFAULT_START) -> np.ndarray:
    """Noise-free hourly rates, shape ``(n_days * 24,)``."""
    hours = np.arange(HOURS_PER_DAY)
    peak = np.isin(hours, sorted(profile.peak_hours))
    day_shape = np.where(peak, profile.workday_peak, profile.base_night_rate)
    rows = []
    for d in range(n_days):
        day = (start + dt.timedelta(days=d)).date()
        off = day.weekday() >= 5 or profile.is_holiday(day)
        rows.append(day_shape * (profile.weekend_factor if off else 1.0))
    return np.concatenate(rows) if rows else np.zeros(0)


def generate_building(
    profile: BuildingProfile,
    n_days: int,
    seed: int | None = None,
    building_id: str = "B00",
    start: dt.datetime = DEFAULT_START,
    readings_per_hour: int = 1,
):
    """Return ``(hourly_truth, readings)`` for one building.

    ``readings`` holds the cumulative register: one reading closing the hour
    before ``start`` and ``readings_per_hour`` evenly spaced readings inside
    every hour, the last one at ``hh:59:59`` carrying the full hour's volume.
    """
    if n_days < 1:
        raise PipelineError("bad-days", "n_days must be >= 1")
    rng = make_rng(profile.seed if seed is None else seed)
    rates = expected_rates(profile, n_days, start)
    noise = rng.normal(0.0, 1.0, rates.shape) * profile.noise_std
    if profile.day_level_std:
        # shared occupancy level per day: one lognormal multiplier for all 24 hours
        level = np.exp(rng.normal(0.0, profile.day_level_std, n_days))
        rates = rates * np.repeat(level, HOURS_PER_DAY)
    truth = np.round(np.maximum(rates + noise, 0.0))

    register = float(rng.integers(1_000, 100_000))
    readings = [RawReading(building_id, start - dt.timedelta(seconds=1), register)]
    step = 3600 // readings_per_hour
    for i, volume in enumerate(truth):
        hour = start + dt.timedelta(hours=i)
        for k in range(1, readings_per_hour):
            part = float(np.floor(volume * k / readings_per_hour))
            readings.append(RawReading(building_id, hour + dt.timedelta(seconds=k * step - 1), register + part))
        register += float(volume)
        readings.append(RawReading(building_id, hour + dt.timedelta(seconds=3599), register))
    return HourlySeries(building_id, start, truth), readings


def generate_dataset(
    n_buildings: int,
    n_days: int,
    seed: int,
    profile: BuildingProfile | None = None,
    scale_jitter: float = 0.0,
    start: dt.datetime = DEFAULT_START,
) -> dict:
    """``{building_id: (truth, readings)}`` for buildings ``B00, B01, ...``.

    With ``scale_jitter = j`` each building's rates are multiplied by a factor
    drawn uniformly from ``[1 - j, 1 + j]``.
    """
    profile = profile or BuildingProfile()
    out = {}
    for b in range(n_buildings):
        bid = f"B{b:02d}"
        bseed = derive_seed(seed, bid)
        scale = make_rng(derive_seed(seed, bid, 1)).uniform(1 - scale_jitter, 1 + scale_jitter)
        prof = profile.scaled(scale) if scale_jitter else profile
        out[bid] = generate_building(prof, n_days, bseed, building_id=bid, start=start)
    return out


def inject_gaps(series: HourlySeries, mechanism: GapMechanism) -> HourlySeries:
    """Hide slots until the series' missing fraction reaches ``mechanism.rate``.

    Slots that are already absent count toward the target. ``whole-day``
    hides complete UTC calendar days that lie fully inside the window.
    """
    n = len(series)
    values = np.array(series.values)
    target = int(np.floor(mechanism.rate * n + 0.5))
    missing = np.isnan(values)
    need = target - int(missing.sum())
    if need <= 0:
        return series
    rng = make_rng(mechanism.seed)

    if mechanism.kind == "random-point":
        hide = rng.choice(np.flatnonzero(~missing), size=need, replace=False)
        values[hide] = np.nan

    elif mechanism.kind == "burst":
        lo, hi = mechanism.burst_len
        if n < lo:
            raise PipelineError("cannot-satisfy-rate", f"series of {n} slots is shorter than the minimum burst")
        while need > 0:
            length = int(rng.integers(lo, hi + 1))
            begin = int(rng.integers(0, n - min(length, n) + 1))
            span = np.arange(begin, min(begin + length, n))
            fresh = span[~np.isnan(values[span])]
            if fresh.size > need:
                # trim the burst from its tail so it stays contiguous
                fresh = fresh[:need]
                span = span[: np.searchsorted(span, fresh[-1]) + 1]
            values[span] = np.nan
            need -= fresh.size

    else:
        offset = (-series.start_hour.hour) % HOURS_PER_DAY
        n_days = (n - offset) // HOURS_PER_DAY
        day_missing = np.array(
            [np.isnan(values[offset + d * 24: offset + (d + 1) * 24]).sum() for d in range(n_days)]
        )
        for d in rng.permutation(n_days):
            if need <= 0:
                break
            block = slice(offset + d * 24, offset + (d + 1) * 24)
            values[block] = np.nan
            need -= HOURS_PER_DAY - int(day_missing[d])
        if need > 0:
            raise PipelineError("cannot-satisfy-rate", "not enough whole days to reach the requested rate")

    return HourlySeries(series.building_id, series.start_hour, values, series.resets)


def write_readings_csv(dataset: dict, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("building_id", "timestamp", "register_liters"))
    for bid in sorted(dataset):
        for r in dataset[bid][1]:
            writer.writerow((r.building_id, format_timestamp(r.timestamp), repr(float(r.register))))


def write_truth_csv(dataset: dict, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("building_id", "hour_start", "liters"))
    for bid in sorted(dataset):
        truth = dataset[bid][0]
        for stamp, v in zip(truth.hour_starts(), truth.values):
            writer.writerow((bid, format_timestamp(stamp), "nan" if np.isnan(v) else repr(float(v))))
