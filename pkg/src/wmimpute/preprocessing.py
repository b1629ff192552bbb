"""Day vectors, complete-day split, normalization and validation masking."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from zoneinfo import ZoneInfo

import numpy as np

from .core import HOURS_PER_DAY, UTC, DayMatrix, HourlySeries, NormStats, SplitIndex, missing_fraction
from .errors import PipelineError
from .rng import make_rng

MIN_COMPLETE_DAYS = 5
HOUR_COLUMNS = tuple(f"h{h:02d}" for h in range(HOURS_PER_DAY))


@dataclass(frozen=True)
class MaskedValidation:
    """Validation rows with exactly one extra hidden cell per row.

    ``rows`` has NaN at the hidden cells; ``truth`` is the unmasked copy.
    ``hidden`` holds ``(row, col, true_value)`` triples indexing ``rows``;
    ``source_rows`` maps each row back to its DayMatrix row.
    """

    rows: np.ndarray
    truth: np.ndarray
    hidden: tuple
    seed: int
    source_rows: tuple = ()

    @property
    def hidden_mask(self):
        out = np.zeros(self.rows.shape, dtype=bool)
        for r, c, _ in self.hidden:
            out[r, c] = True
        return out

    def to_dict(self):
        return {
            "seed": self.seed,
            "hidden": [[int(r), int(c), float(v)] for r, c, v in self.hidden],
            "source_rows": [int(i) for i in self.source_rows],
        }


def _day_start(day: dt.date, tz) -> dt.datetime:
    return dt.datetime.combine(day, dt.time(), tzinfo=tz)


def build_day_matrix(series: HourlySeries, tz: str = "UTC") -> DayMatrix:
    """Lay an hourly series out as one row per local calendar day.

    Column ``h`` holds the hour starting at local wall-clock ``h:00``. On a
    DST fall-back day the repeated wall-clock hour is summed (absent if either
    half is absent); on a spring-forward day the skipped hour stays absent.
    """
    if len(series) == 0:
        raise PipelineError("empty-series", "cannot build a day matrix from an empty series")
    if tz == "UTC":
        lead = series.start_hour.hour
        n_days = -(-(lead + len(series)) // HOURS_PER_DAY)
        flat = np.full(n_days * HOURS_PER_DAY, np.nan)
        flat[lead: lead + len(series)] = series.values
        first = series.start_hour.date()
        grid = flat.reshape(n_days, HOURS_PER_DAY)
        dates = tuple(first + dt.timedelta(days=d) for d in range(n_days))
        return DayMatrix(series.building_id, dates, grid, ~np.isnan(grid), tz)

    zone = ZoneInfo(tz)
    stamps = [s.astimezone(zone) for s in series.hour_starts()]
    first, last = stamps[0].date(), stamps[-1].date()
    n_days = (last - first).days + 1
    dates = tuple(first + dt.timedelta(days=d) for d in range(n_days))

    grid = np.full((n_days, HOURS_PER_DAY), np.nan)
    filled = np.zeros(grid.shape, dtype=bool)
    poisoned = np.zeros(grid.shape, dtype=bool)
    for stamp, v in zip(stamps, series.values):
        r, c = (stamp.date() - first).days, stamp.hour
        if filled[r, c]:
            poisoned[r, c] |= np.isnan(v)
            grid[r, c] += v
        else:
            grid[r, c] = v
            filled[r, c] = True
            poisoned[r, c] = np.isnan(v)
    grid[poisoned] = np.nan
    return DayMatrix(series.building_id, dates, grid, ~np.isnan(grid), tz)


def split_complete_days(m: DayMatrix, ratio: float = 0.8, seed: int = 0):
    """Randomly partition complete rows into train/validation.

    Returns ``(SplitIndex, incomplete_rows)``; ``|train| = round(ratio * n)``
    with halves rounded up.
    """
    if not 0 < ratio < 1:
        raise PipelineError("bad-ratio", "split ratio must lie in (0, 1)")
    complete = m.complete_rows()
    if complete.size < MIN_COMPLETE_DAYS:
        raise PipelineError(
            "insufficient-complete-days",
            f"building {m.building_id} has {complete.size} complete days, need {MIN_COMPLETE_DAYS}",
            building=m.building_id,
        )
    n_train = math.floor(ratio * complete.size + 0.5)
    order = make_rng(seed).permutation(complete)
    split = SplitIndex(tuple(sorted(int(i) for i in order[:n_train])), tuple(sorted(int(i) for i in order[n_train:])), seed)
    return split, tuple(int(i) for i in m.incomplete_rows())


def fit_normalizer(train_rows) -> NormStats:
    """Per-column mean and population std of the training rows."""
    x = np.asarray(train_rows, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise PipelineError("insufficient-data", "normalization needs at least two training rows")
    if np.isnan(x).any():
        raise PipelineError("row-not-complete", "normalizer must be fitted on complete rows")
    return NormStats(x.mean(axis=0), x.std(axis=0), x.shape[0])


def apply_norm(rows, stats: NormStats) -> np.ndarray:
    return (np.asarray(rows, dtype=float) - stats.mean) / stats.std


def invert_norm(rows, stats: NormStats) -> np.ndarray:
    return np.asarray(rows, dtype=float) * stats.std + stats.mean


def mask_validation(val_rows, seed: int, source_rows=None) -> MaskedValidation:
    """Hide one uniformly chosen cell in every (complete) validation row."""
    truth = np.array(val_rows, dtype=float, ndmin=2)
    if np.isnan(truth).any():
        bad = int(np.flatnonzero(np.isnan(truth).any(axis=1))[0])
        raise PipelineError("row-not-complete", f"validation row {bad} already has a missing cell", row=bad)
    cols = make_rng(seed).integers(0, truth.shape[1], size=truth.shape[0])
    rows = truth.copy()
    rows[np.arange(truth.shape[0]), cols] = np.nan
    hidden = tuple((i, int(c), float(truth[i, c])) for i, c in enumerate(cols))
    truth.flags.writeable = False
    rows.flags.writeable = False
    src = tuple(range(truth.shape[0])) if source_rows is None else tuple(int(i) for i in source_rows)
    return MaskedValidation(rows, truth, hidden, seed, src)


def census(series: dict, matrices: dict | None = None) -> list[dict]:
    """Per-building missingness table: window, slot counts and % missing."""
    out = []
    for b in sorted(series):
        s = series[b]
        row = {
            "building": b,
            "since": s.start_hour.strftime("%Y-%m-%dT%H:%MZ"),
            "until": s.end_hour.strftime("%Y-%m-%dT%H:%MZ"),
            "expected_hours": len(s),
            "collected_hours": int(s.mask.sum()),
            "pct_missing": round(100.0 * missing_fraction(s), 4),
        }
        if matrices and b in matrices:
            row["day_rows"] = matrices[b].n_rows
            row["complete_days"] = int(matrices[b].complete_rows().size)
        out.append(row)
    return out


def write_days_csv(matrices: dict, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("building_id", "date", *HOUR_COLUMNS))
    for b in sorted(matrices):
        m = matrices[b]
        for d, row in zip(m.dates, m.values):
            writer.writerow((b, d.isoformat(), *("nan" if np.isnan(v) else repr(float(v)) for v in row)))


def read_days_csv(stream, tz: str = "UTC") -> dict:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(header) != ("building_id", "date", *HOUR_COLUMNS):
        raise PipelineError("bad-header", "expected header building_id,date,h00..h23")
    rows = {}
    for line in reader:
        rows.setdefault(line[0], []).append((dt.date.fromisoformat(line[1]), [float(v) for v in line[2:]]))
    out = {}
    for b, items in rows.items():
        values = np.array([v for _, v in items], dtype=float)
        out[b] = DayMatrix(b, tuple(d for d, _ in items), values, ~np.isnan(values), tz)
    return out
