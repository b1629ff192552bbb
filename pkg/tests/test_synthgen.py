import datetime as dt

import numpy as np
import pytest

from wmimpute import PipelineError, missing_fraction
from wmimpute.core import UTC, HourlySeries
from wmimpute.ingestion import hourly_aggregate
from wmimpute.preprocessing import build_day_matrix
from wmimpute.synthgen import BuildingProfile, GapMechanism, generate_building, generate_dataset, inject_gaps

MONDAY = dt.datetime(2024, 1, 8, tzinfo=UTC)


def flat_profile(**kw):
    base = dict(base_night_rate=0.0, workday_peak=60.0, peak_hours=range(9, 18), noise_std=0.0, holiday_dates=())
    base.update(kw)
    return BuildingProfile(**base)


def test_weekday_row_sums_to_peak_hours():
    truth, _ = generate_building(flat_profile(), 7, seed=0, start=MONDAY)
    rows = build_day_matrix(truth).values
    assert rows[:5].sum(axis=1).tolist() == [540.0] * 5
    assert rows[0, 9:18].tolist() == [60.0] * 9 and rows[0, :9].sum() == 0.0


def test_zero_weekend_factor_empties_weekends():
    truth, _ = generate_building(flat_profile(weekend_factor=0.0, base_night_rate=3.0), 14, seed=0, start=MONDAY)
    rows = build_day_matrix(truth).values
    assert (rows[[5, 6, 12, 13]] == 0).all() and (rows[[0, 1, 2, 3, 4]] > 0).all()


def test_holidays_are_damped():
    profile = flat_profile(weekend_factor=0.5, holiday_dates={(1, 10)})
    rows = build_day_matrix(generate_building(profile, 3, seed=0, start=MONDAY)[0]).values
    assert rows[2].sum() == 270.0 and rows[1].sum() == 540.0


def test_day_level_scales_whole_days():
    truth, _ = generate_building(flat_profile(base_night_rate=100.0, workday_peak=600.0, day_level_std=0.3), 20, seed=3, start=MONDAY)
    rows = build_day_matrix(truth).values[:5]
    ratio = rows[:, 12] / rows[:, 0]
    assert np.allclose(ratio, 6.0, atol=0.2)  # shape kept up to whole-liter rounding
    assert np.ptp(rows[:, 12]) > 100


def test_zero_day_level_keeps_default_stream():
    a, _ = generate_building(BuildingProfile(), 30, seed=9)
    b, _ = generate_building(BuildingProfile(day_level_std=0.0), 30, seed=9)
    assert np.array_equal(a.values, b.values)


def test_negative_day_level_rejected():
    with pytest.raises(PipelineError) as exc:
        BuildingProfile(day_level_std=-0.1)
    assert exc.value.code == "bad-profile"


@pytest.mark.parametrize("per_hour", [1, 3])
def test_aggregation_inverts_generator(per_hour):
    truth, readings = generate_building(BuildingProfile(), 30, seed=4, readings_per_hour=per_hour)
    assert len(readings) == 30 * 24 * per_hour + 1
    again = hourly_aggregate(readings)
    assert again.start_hour == truth.start_hour
    assert np.array_equal(again.values, truth.values)


def test_generator_is_deterministic_and_non_negative():
    a, ra = generate_building(BuildingProfile(), 20, seed=9)
    b, rb = generate_building(BuildingProfile(), 20, seed=9)
    assert np.array_equal(a.values, b.values) and ra == rb
    assert (a.values >= 0).all() and np.array_equal(a.values, np.round(a.values))
    c, _ = generate_building(BuildingProfile(), 20, seed=10)
    assert not np.array_equal(a.values, c.values)


def test_dataset_jitter_scales_buildings():
    ds = generate_dataset(4, 30, seed=1, scale_jitter=0.3)
    assert sorted(ds) == ["B00", "B01", "B02", "B03"]
    means = [ds[b][0].values.mean() for b in sorted(ds)]
    assert len(set(np.round(means, 6))) == 4


class TestGaps:
    series = HourlySeries("b", MONDAY, np.ones(10_000))

    def test_rate_zero_is_identity(self):
        assert inject_gaps(self.series, GapMechanism("random-point", 0.0)) is self.series

    @pytest.mark.parametrize("kind", ["random-point", "burst", "whole-day"])
    def test_quarter_rate(self, kind):
        out = inject_gaps(self.series, GapMechanism(kind, 0.25, seed=3))
        assert 0.24 <= missing_fraction(out) <= 0.26

    def test_whole_day_blocks(self):
        out = inject_gaps(self.series, GapMechanism("whole-day", 0.3, seed=1))
        grid = np.isnan(out.values[: 416 * 24].reshape(-1, 24))
        assert set(grid.sum(axis=1).tolist()) <= {0, 24}
        assert not np.isnan(out.values[416 * 24:]).any()

    def test_burst_runs_are_contiguous(self):
        out = inject_gaps(self.series, GapMechanism("burst", 0.1, burst_len=(10, 10), seed=2))
        gaps = np.isnan(out.values).astype(int)
        edges = np.diff(np.concatenate([[0], gaps, [0]]))
        runs = np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)
        # bursts may merge or be trimmed to hit the rate exactly, never fragment below the trim
        assert runs.sum() == 1000 and (runs >= 1).all() and np.median(runs) >= 10

    def test_existing_gaps_count_toward_rate(self):
        values = np.ones(1000)
        values[:100] = np.nan
        out = inject_gaps(HourlySeries("b", MONDAY, values), GapMechanism("random-point", 0.25, seed=0))
        assert missing_fraction(out) == 0.25 and np.isnan(out.values[:100]).all()

    def test_burst_on_short_series_cannot_satisfy(self):
        short = HourlySeries("b", MONDAY, np.ones(5))
        with pytest.raises(PipelineError) as err:
            inject_gaps(short, GapMechanism("burst", 1.0, burst_len=(6, 12)))
        assert err.value.code == "cannot-satisfy-rate"

    def test_deterministic(self):
        mech = GapMechanism("burst", 0.2, seed=11)
        assert np.array_equal(np.isnan(inject_gaps(self.series, mech).values),
                              np.isnan(inject_gaps(self.series, mech).values))
