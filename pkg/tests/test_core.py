import datetime as dt

import numpy as np
import pytest

from wmimpute import DayMatrix, HourlySeries, PipelineError, missing_fraction, validate_day_matrix
from wmimpute.core import UTC, NormStats, RawReading, SplitIndex

T0 = dt.datetime(2021, 3, 1, tzinfo=UTC)


def series(values):
    return HourlySeries("b", T0, np.array(values, dtype=float))


def well_formed(n=3):
    values = np.arange(n * 24, dtype=float).reshape(n, 24)
    dates = [dt.date(2021, 3, 1) + dt.timedelta(days=i) for i in range(n)]
    return DayMatrix("b", dates, values, np.ones((n, 24), bool))


class TestMissingFraction:
    def test_all_present(self):
        assert missing_fraction(series([1.0] * 8)) == 0.0

    def test_all_missing(self):
        assert missing_fraction(series([np.nan] * 8)) == 1.0

    def test_two_of_eight(self):
        assert missing_fraction(series([1, np.nan, 2, 3, np.nan, 4, 5, 6])) == 0.25

    def test_empty_series(self):
        with pytest.raises(PipelineError) as err:
            missing_fraction(series([]))
        assert err.value.code == "empty-series"

    def test_concat_is_slot_weighted(self):
        a = series([1, np.nan, 3])
        b = HourlySeries("b", a.end_hour, np.array([np.nan, np.nan, 1, 1, 1, 1.0]))
        joined = a.concat(b)
        expected = (3 * missing_fraction(a) + 6 * missing_fraction(b)) / 9
        assert missing_fraction(joined) == pytest.approx(expected, abs=1e-15)


class TestValidateDayMatrix:
    def test_well_formed(self):
        assert validate_day_matrix(well_formed()) == []

    def test_mask_true_where_absent(self):
        m = well_formed()
        values = np.array(m.values)
        values[1, 5] = np.nan
        bad = DayMatrix("b", m.dates, values, np.ones((3, 24), bool))
        assert [(v.kind, v.row, v.col) for v in validate_day_matrix(bad)] == [("mask-mismatch", 1, 5)]

    def test_duplicate_date(self):
        m = well_formed()
        dates = list(m.dates)
        dates[2] = dates[1]
        kinds = [v.kind for v in validate_day_matrix(DayMatrix("b", dates, m.values, m.mask))]
        assert kinds == ["duplicate-date"]

    def test_negative_value(self):
        m = well_formed()
        values = np.array(m.values)
        values[0, 3] = -1.0
        violations = validate_day_matrix(DayMatrix("b", m.dates, values, m.mask))
        assert [(v.kind, v.row, v.col) for v in violations] == [("negative-value", 0, 3)]

    def test_unordered_and_wrong_row_count(self):
        m = well_formed()
        kinds = {v.kind for v in validate_day_matrix(DayMatrix("b", m.dates[::-1], m.values, m.mask))}
        assert kinds == {"unordered-dates"}
        kinds = [v.kind for v in validate_day_matrix(DayMatrix("b", m.dates[:2], m.values, m.mask))]
        assert kinds == ["row-count"]

    def test_wrong_width(self):
        m = DayMatrix("b", [dt.date(2021, 1, 1)], np.zeros((1, 23)), np.ones((1, 23), bool))
        assert [v.kind for v in validate_day_matrix(m)] == ["shape"]

    def test_matrix_is_read_only(self):
        with pytest.raises(ValueError):
            well_formed().values[0, 0] = 1.0


class TestTypes:
    def test_reading_rejects_negative_register(self):
        with pytest.raises(PipelineError) as err:
            RawReading("b", T0, -5.0)
        assert err.value.code == "negative-register"

    def test_reading_needs_timezone(self):
        with pytest.raises(PipelineError):
            RawReading("b", dt.datetime(2021, 1, 1), 1.0)

    def test_series_must_start_on_the_hour(self):
        with pytest.raises(PipelineError):
            HourlySeries("b", T0 + dt.timedelta(minutes=5), np.zeros(3))

    def test_series_rejects_negative_consumption(self):
        with pytest.raises(PipelineError):
            series([1.0, -0.5])

    def test_series_slots_and_slice(self):
        s = series(np.arange(10.0))
        assert len(s) == 10
        assert s.end_hour == T0 + dt.timedelta(hours=10)
        part = s.slice(3, 6)
        assert part.start_hour == T0 + dt.timedelta(hours=3)
        assert part.values.tolist() == [3.0, 4.0, 5.0]

    def test_norm_stats_floor_and_round_trip(self):
        stats = NormStats(np.zeros(24), np.zeros(24), 5)
        assert stats.std.min() == 1e-8
        again = NormStats.from_dict(stats.to_dict())
        assert np.array_equal(again.mean, stats.mean) and np.array_equal(again.std, stats.std)

    def test_split_index_round_trip(self):
        s = SplitIndex((0, 2, 5), (1, 3), 9)
        assert SplitIndex.from_dict(s.to_dict()) == s
