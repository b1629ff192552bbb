"""Parsing of cumulative meter readings and differencing into hourly consumption."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from dataclasses import dataclass, field
from itertools import groupby

import numpy as np

from .core import UTC, HourlySeries, RawReading
from .errors import PipelineError

log = logging.getLogger(__name__)

CSV_HEADER = ("building_id", "timestamp", "register_liters")
RESET_POLICIES = ("flag", "error", "clamp-zero")
_HOUR = dt.timedelta(hours=1)


@dataclass(frozen=True)
class IngestOptions:
    hour_bucket_rule: str = "last-reading-per-hour"
    reset_policy: str = "flag"
    window: tuple | None = None

    def __post_init__(self):
        if self.hour_bucket_rule != "last-reading-per-hour":
            raise PipelineError("bad-option", f"unknown hour_bucket_rule {self.hour_bucket_rule!r}")
        if self.reset_policy not in RESET_POLICIES:
            raise PipelineError("bad-option", f"unknown reset_policy {self.reset_policy!r}")
        if self.window is not None:
            start, end = (floor_hour(t) for t in self.window)
            if not start < end:
                raise PipelineError("bad-option", "window start must precede window end")
            object.__setattr__(self, "window", (start, end))


@dataclass
class ParseResult:
    readings: list
    malformed: list = field(default_factory=list)
    n_lines: int = 0
    duplicates_removed: int = 0


def parse_timestamp(text: str) -> dt.datetime:
    """Parse an RFC 3339 timestamp; a zone designator is mandatory."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    stamp = dt.datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        raise ValueError("timestamp lacks a UTC offset")
    return stamp.astimezone(UTC)


def format_timestamp(stamp: dt.datetime) -> str:
    return stamp.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


def floor_hour(stamp: dt.datetime) -> dt.datetime:
    return stamp.astimezone(UTC).replace(minute=0, second=0, microsecond=0)


def parse_readings(source, delimiter: str = ",") -> ParseResult:
    """Parse the ingestion CSV (bytes, text, or a binary/text stream).

    Lines that cannot be parsed are skipped and listed in ``malformed`` as
    ``(line_number, reason)``. A negative register aborts the parse because it
    can only come from a corrupted export.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    elif isinstance(source, io.RawIOBase | io.BufferedIOBase):
        source = io.TextIOWrapper(source, encoding="utf-8")

    reader = csv.reader(source, delimiter=delimiter)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise PipelineError("bad-header", f"expected header {','.join(CSV_HEADER)}", line=1)

    result = ParseResult(readings=[])
    for row in reader:
        lineno = reader.line_num
        result.n_lines += 1
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            result.malformed.append((lineno, f"expected 3 fields, got {len(row)}"))
            continue
        building, stamp_text, register_text = (cell.strip() for cell in row)
        try:
            register = float(register_text)
        except ValueError:
            result.malformed.append((lineno, f"bad register {register_text!r}"))
            continue
        if register < 0:
            raise PipelineError("negative-register", f"negative register on line {lineno}", line=lineno)
        if not np.isfinite(register) or not building:
            result.malformed.append((lineno, "non-finite register or empty building id"))
            continue
        try:
            stamp = parse_timestamp(stamp_text)
        except ValueError as exc:
            result.malformed.append((lineno, f"bad timestamp: {exc}"))
            continue
        result.readings.append(RawReading(building, stamp, register))

    result.readings.sort(key=lambda r: (r.building_id, r.timestamp))
    deduped = []
    for r in result.readings:
        if deduped and deduped[-1].building_id == r.building_id and deduped[-1].timestamp == r.timestamp:
            if deduped[-1].register != r.register:
                raise PipelineError(
                    "duplicate-conflict",
                    f"building {r.building_id} has conflicting registers at {format_timestamp(r.timestamp)}",
                )
            result.duplicates_removed += 1
            continue
        deduped.append(r)
    result.readings = deduped
    return result


def hourly_aggregate(readings, opts: IngestOptions | None = None) -> HourlySeries:
    """Difference one building's cumulative registers into hourly consumption.

    The register observed last within each UTC hour is taken as that hour's
    closing state; hour ``h`` is present only when the closing states of both
    ``h`` and ``h - 1`` are known.
    """
    opts = opts or IngestOptions()
    readings = list(readings)
    if not readings:
        raise PipelineError("empty-input", "no readings to aggregate")
    building = readings[0].building_id
    for i, r in enumerate(readings):
        if r.building_id != building:
            raise PipelineError("mixed-buildings", "hourly_aggregate expects a single building")
        if i and r.timestamp < readings[i - 1].timestamp:
            raise PipelineError("unsorted-input", "readings must be sorted by timestamp", index=i)

    closing = {}
    for r in readings:
        closing[floor_hour(r.timestamp)] = r.register

    hours = sorted(closing)
    if opts.window is not None:
        start, end = opts.window
    else:
        start, end = hours[0] + _HOUR, hours[-1] + _HOUR
    n = int((end - start) / _HOUR)
    if n <= 0:
        raise PipelineError("empty-window", "fewer than two hours of readings")

    values = np.full(n, np.nan)
    resets = []
    for i in range(n):
        h = start + i * _HOUR
        now, before = closing.get(h), closing.get(h - _HOUR)
        if now is None or before is None:
            continue
        delta = now - before
        if delta >= 0:
            values[i] = delta
            continue
        if opts.reset_policy == "error":
            raise PipelineError("register-reset", f"register decreased at {format_timestamp(h)}", hour=format_timestamp(h))
        resets.append({"hour": format_timestamp(h), "before": before, "after": now})
        if opts.reset_policy == "clamp-zero":
            values[i] = 0.0
        log.info("register reset for %s at %s (%s -> %s)", building, h, before, now)
    return HourlySeries(building, start, values, tuple(resets))


def aggregate_buildings(readings, opts: IngestOptions | None = None) -> dict:
    """Aggregate a sorted multi-building reading list into ``{building: HourlySeries}``."""
    return {
        b: hourly_aggregate(list(group), opts)
        for b, group in groupby(readings, key=lambda r: r.building_id)
    }


def ingest_report(parsed: ParseResult, series: dict) -> dict:
    return {
        "lines": parsed.n_lines,
        "readings": len(parsed.readings),
        "duplicates_removed": parsed.duplicates_removed,
        "buildings": len(series),
        "hourly_slots": {b: len(s) for b, s in series.items()},
        "resets": {b: list(s.resets) for b, s in series.items() if s.resets},
        "malformed": [{"line": ln, "reason": why} for ln, why in parsed.malformed],
    }


def write_hourly_csv(series: dict, stream):
    """Write ``building_id,hour_start,liters`` rows; absent slots are ``nan``."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("building_id", "hour_start", "liters"))
    for b in sorted(series):
        s = series[b]
        for stamp, v in zip(s.hour_starts(), s.values):
            writer.writerow((b, format_timestamp(stamp), "nan" if np.isnan(v) else repr(float(v))))


def read_hourly_csv(stream) -> dict:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(header) != ("building_id", "hour_start", "liters"):
        raise PipelineError("bad-header", "expected header building_id,hour_start,liters")
    rows = {}
    for building, stamp, value in reader:
        rows.setdefault(building, []).append((parse_timestamp(stamp), float(value)))
    out = {}
    for b, items in rows.items():
        items.sort()
        start = items[0][0]
        n = int((items[-1][0] - start) / _HOUR) + 1
        values = np.full(n, np.nan)
        for stamp, v in items:
            values[int((stamp - start) / _HOUR)] = v
        out[b] = HourlySeries(b, start, values)
    return out
