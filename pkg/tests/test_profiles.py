import numpy as np
import pytest
from datetime import date

from citypulse.ingest import ActivityType, CityConfig
from citypulse.profiles import (
    BINS_PER_WEEK,
    ResampledSeries,
    local_calendar,
    normalize,
    resample,
    residuals,
    typical_week,
    weekly_totals,
)
from citypulse.spatial import RegionSeries

CALLS = ActivityType.CALLS


def utc_config(weeks=2, start=date(2013, 4, 1)) -> CityConfig:
    return CityConfig(
        city_id="test",
        bbox=(0.0, 0.0, 0.018, 0.018),
        cell_size_m=1000.0,
        period_start=start,
        period_end=date.fromordinal(start.toordinal() + 7 * weeks),
        timezone="UTC",
    )


def make_series(values, presence=None, region="0:0") -> RegionSeries:
    values = np.asarray(values, dtype=np.int64)
    stacked = np.zeros((5, len(values)), dtype=np.int64)
    stacked[CALLS.value] = values
    if presence is None:
        presence = np.ones(len(values), dtype=bool)
    return RegionSeries(region, stacked, np.asarray(presence, dtype=bool))


def tile_weeks(week_values, n_weeks):
    return np.tile(np.asarray(week_values, dtype=np.int64), n_weeks)


class TestLocalCalendar:
    def test_utc_monday_start_bins_are_sequential(self):
        cal = local_calendar(utc_config(weeks=1))
        assert cal.bins[0] == 0
        assert cal.bins[95] == 95
        assert cal.bins[96] == 96  # Tuesday 00:00
        assert cal.bins[-1] == BINS_PER_WEEK - 1
        assert cal.week_ids == ("2013-W14",)
        assert not cal.anomalous.any()

    def test_local_offset_shifts_bins(self):
        cfg = CityConfig("lon", (51.3, -0.5, 51.7, 0.3), 500.0,
                         date(2013, 4, 1), date(2013, 4, 8), "Europe/London")
        cal = local_calendar(cfg)
        # 2013-04-01T00:00Z is 01:00 BST on Monday
        assert cal.bins[0] == 4

    def test_fall_back_week_marks_anomalous_slots(self):
        cfg = CityConfig("lon", (51.3, -0.5, 51.7, 0.3), 500.0,
                         date(2013, 10, 21), date(2013, 10, 28), "Europe/London")
        cal = local_calendar(cfg)
        # clocks go back 02:00->01:00 on Sunday Oct 27: the 01:00-02:00
        # local slots receive two windows each
        assert cal.week_ids == ("2013-W43",)
        assert (cal.occ_count == 2).sum() == 4
        assert cal.anomalous.sum() == 8
        # the first local hour of Monday precedes the UTC period start
        assert (cal.occ_count == 0).sum() == 4
        assert int(cal.occ_count.sum()) == cfg.n_windows

    def test_spring_forward_week_has_gap_bins(self):
        cfg = CityConfig("lon", (51.3, -0.5, 51.7, 0.3), 500.0,
                         date(2013, 3, 25), date(2013, 4, 1), "Europe/London")
        cal = local_calendar(cfg)
        # clocks jump 01:00->02:00 on Sunday Mar 31: those local slots never occur,
        # and the last local hour of the week spills past the UTC period end
        sunday_1am = 6 * 96 + 4
        assert (cal.occurrence[0, sunday_1am:sunday_1am + 4] == -1).all()
        assert not cal.anomalous.any()

    def test_occurrence_indexes_are_consistent(self):
        cal = local_calendar(utc_config(weeks=2))
        for k in range(cal.n_weeks):
            for b in range(0, BINS_PER_WEEK, 97):
                w = cal.occurrence[k, b]
                if w >= 0:
                    assert cal.bins[w] == b
                    assert cal.week_index[w] == k


class TestTypicalWeek:
    def test_single_week_returns_that_week(self):
        cfg = utc_config(weeks=1)
        week = np.arange(BINS_PER_WEEK) % 50
        profile = typical_week(make_series(week), CALLS, cfg)
        assert np.array_equal(profile.values, week.astype(float))
        assert (profile.support == 1).all()
        assert not profile.empty

    def test_two_weeks_average(self):
        cfg = utc_config(weeks=2)
        week = 1 + np.arange(BINS_PER_WEEK) % 7
        series = make_series(np.concatenate([week, 3 * week]))
        profile = typical_week(series, CALLS, cfg)
        assert np.allclose(profile.values, 2.0 * week)
        assert (profile.support == 2).all()

    def test_missing_bin_in_one_week_uses_remaining_week(self):
        cfg = utc_config(weeks=2)
        week = np.full(BINS_PER_WEEK, 10)
        presence = np.ones(2 * BINS_PER_WEEK, dtype=bool)
        presence[BINS_PER_WEEK + 33] = False  # bin 33 absent in week 2
        series = make_series(tile_weeks(week, 2), presence)
        profile = typical_week(series, CALLS, cfg)
        assert profile.values[33] == 10
        assert profile.support[33] == 1
        assert profile.support[34] == 2

    def test_matches_naive_per_bin_mean_on_sparse_fixture(self):
        cfg = utc_config(weeks=3)
        rng = np.random.default_rng(42)
        values = rng.integers(0, 1000, size=cfg.n_windows)
        presence = rng.random(cfg.n_windows) < 0.7
        series = make_series(values, presence)
        profile = typical_week(series, CALLS, cfg)
        # independent derivation: UTC + Monday-aligned start means
        # bin(w) = w mod 672, week(w) = w div 672
        for b in range(BINS_PER_WEEK):
            samples = [values[k * BINS_PER_WEEK + b] for k in range(3)
                       if presence[k * BINS_PER_WEEK + b]]
            if samples:
                assert profile.values[b] == pytest.approx(np.mean(samples), rel=1e-12)
                assert profile.support[b] == len(samples)
            else:
                assert profile.values[b] == 0 and profile.support[b] == 0

    def test_exclude_weeks_drops_their_samples(self):
        cfg = utc_config(weeks=2)
        week = np.full(BINS_PER_WEEK, 4)
        series = make_series(np.concatenate([week, 10 * week]))
        cal = local_calendar(cfg)
        profile = typical_week(series, CALLS, cfg, exclude_weeks={cal.week_ids[1]})
        assert (profile.values == 4).all()
        assert (profile.support == 1).all()

    def test_excluding_unknown_week_is_noop(self):
        cfg = utc_config(weeks=1)
        series = make_series(np.ones(cfg.n_windows))
        profile = typical_week(series, CALLS, cfg, exclude_weeks={"1999-W01"})
        assert (profile.support == 1).all()

    def test_all_absent_gives_empty_profile(self):
        cfg = utc_config(weeks=1)
        series = make_series(np.zeros(cfg.n_windows), np.zeros(cfg.n_windows, dtype=bool))
        profile = typical_week(series, CALLS, cfg)
        assert profile.empty
        assert (profile.support == 0).all() and (profile.values == 0).all()

    def test_tiled_profile_is_fixed_point(self):
        cfg = utc_config(weeks=4)
        week = np.abs(np.sin(np.arange(BINS_PER_WEEK) / 20.0) * 100).astype(np.int64)
        profile = typical_week(make_series(tile_weeks(week, 4)), CALLS, cfg)
        assert np.array_equal(profile.values, week.astype(float))

    def test_dst_anomalous_slots_excluded(self):
        cfg = CityConfig("lon", (51.3, -0.5, 51.7, 0.3), 500.0,
                         date(2013, 10, 21), date(2013, 11, 4), "Europe/London")
        cal = local_calendar(cfg)
        values = np.ones(cfg.n_windows, dtype=np.int64)
        # poison the duplicated fall-back windows; they must not contribute
        values[cal.anomalous] = 10**6
        profile = typical_week(make_series(values), CALLS, cfg)
        assert profile.values.max() == 1.0
        dup_bins = np.nonzero((cal.occ_count == 2).any(axis=0))[0]
        # those bins still have support from the non-anomalous week
        assert (profile.support[dup_bins] >= 1).all()

    def test_garbage_at_absent_windows_changes_nothing(self):
        cfg = utc_config(weeks=2)
        rng = np.random.default_rng(3)
        values = rng.integers(0, 100, size=cfg.n_windows)
        presence = rng.random(cfg.n_windows) < 0.5
        clean = make_series(np.where(presence, values, 0), presence)
        dirty = make_series(np.where(presence, values, 10**9), presence)
        p_clean = typical_week(clean, CALLS, cfg)
        p_dirty = typical_week(dirty, CALLS, cfg)
        assert np.array_equal(p_clean.values, p_dirty.values)
        assert np.array_equal(p_clean.support, p_dirty.support)


class TestNormalize:
    def test_constant_profile_becomes_uniform(self):
        cfg = utc_config(weeks=1)
        profile = typical_week(make_series(np.full(cfg.n_windows, 5)), CALLS, cfg)
        norm = normalize(profile)
        assert norm.normalized
        assert np.allclose(norm.values, 1.0 / BINS_PER_WEEK)
        assert abs(norm.values.sum() - 1.0) < 1e-9

    def test_scale_invariance(self):
        cfg = utc_config(weeks=1)
        week = 1 + np.arange(BINS_PER_WEEK) % 13
        a = normalize(typical_week(make_series(week), CALLS, cfg))
        b = normalize(typical_week(make_series(week * 37), CALLS, cfg))
        assert np.allclose(a.values, b.values, atol=1e-12)

    def test_all_zero_profile_flags_empty(self):
        cfg = utc_config(weeks=1)
        profile = typical_week(make_series(np.zeros(cfg.n_windows)), CALLS, cfg)
        norm = normalize(profile)
        assert norm.empty
        assert (norm.values == 0).all()

    def test_idempotent(self):
        cfg = utc_config(weeks=1)
        week = 1 + np.arange(BINS_PER_WEEK) % 5
        once = normalize(typical_week(make_series(week), CALLS, cfg))
        twice = normalize(once)
        assert np.array_equal(once.values, twice.values)

    def test_json_roundtrip(self):
        from citypulse.profiles import WeeklyProfile

        cfg = utc_config(weeks=1)
        profile = normalize(typical_week(make_series(np.arange(cfg.n_windows) % 9 + 1),
                                         CALLS, cfg))
        back = WeeklyProfile.from_json_dict(profile.to_json_dict())
        assert np.array_equal(back.values, profile.values)
        assert np.array_equal(back.support, profile.support)
        assert back.normalized == profile.normalized
        assert back.empty == profile.empty
        assert back.activity is CALLS


class TestResiduals:
    def test_self_consistent_series_has_zero_residuals(self):
        cfg = utc_config(weeks=3)
        week = 5 + np.arange(BINS_PER_WEEK) % 11
        series = make_series(tile_weeks(week, 3))
        profile = typical_week(series, CALLS, cfg)
        res = residuals(series, CALLS, profile, cfg)
        assert np.nanmax(np.abs(res.values)) == 0.0
        assert np.isnan(res.sigma).sum() == 0
        assert (res.sigma == 0).all()

    def test_single_week_zero_residuals_undefined_sigma(self):
        cfg = utc_config(weeks=1)
        series = make_series(np.arange(cfg.n_windows) % 30)
        profile = typical_week(series, CALLS, cfg)
        res = residuals(series, CALLS, profile, cfg)
        assert np.nanmax(np.abs(res.values)) == 0.0
        assert np.isnan(res.sigma).all()

    def test_two_weeks_hand_computed_sigma(self):
        cfg = utc_config(weeks=2)
        series = make_series(np.concatenate([np.full(BINS_PER_WEEK, 1),
                                             np.full(BINS_PER_WEEK, 3)]))
        profile = typical_week(series, CALLS, cfg)
        res = residuals(series, CALLS, profile, cfg)
        assert np.allclose(res.values[:BINS_PER_WEEK], -1.0)
        assert np.allclose(res.values[BINS_PER_WEEK:], 1.0)
        assert np.allclose(res.sigma, np.sqrt(2.0))

    def test_absent_windows_are_nan_and_noncontributing(self):
        cfg = utc_config(weeks=2)
        presence = np.ones(cfg.n_windows, dtype=bool)
        presence[100:110] = False
        series = make_series(np.ones(cfg.n_windows), presence)
        profile = typical_week(series, CALLS, cfg)
        res = residuals(series, CALLS, profile, cfg)
        assert np.isnan(res.values[100:110]).all()
        assert not res.contributing[100:110].any()

    def test_per_bin_residual_mean_is_zero(self):
        cfg = utc_config(weeks=4)
        rng = np.random.default_rng(9)
        values = rng.integers(0, 10**6, size=cfg.n_windows)
        presence = rng.random(cfg.n_windows) < 0.8
        series = make_series(values, presence)
        profile = typical_week(series, CALLS, cfg)
        res = residuals(series, CALLS, profile, cfg)
        cal = local_calendar(cfg)
        for b in range(0, BINS_PER_WEEK, 31):
            mask = res.contributing & (cal.bins == b)
            if mask.any() and profile.values[b] > 0:
                mean = res.values[mask].mean()
                assert abs(mean) <= 1e-6 * profile.values[b]

    def test_rejects_normalized_profile(self):
        cfg = utc_config(weeks=1)
        series = make_series(np.ones(cfg.n_windows))
        norm = normalize(typical_week(series, CALLS, cfg))
        with pytest.raises(ValueError, match="raw"):
            residuals(series, CALLS, norm, cfg)


class TestResample:
    def test_hourly_sums_quadruples(self):
        cfg = utc_config(weeks=1)
        values = np.zeros(cfg.n_windows, dtype=np.int64)
        values[:4] = [1, 2, 3, 4]
        out = resample(make_series(values), CALLS, "hour", cfg)
        assert out.values[0] == 10
        assert out.step_seconds == 3600
        assert len(out.values) == cfg.n_windows // 4

    def test_15min_is_identity(self):
        cfg = utc_config(weeks=1)
        values = np.arange(cfg.n_windows)
        out = resample(make_series(values), CALLS, "15min", cfg)
        assert np.array_equal(out.values, values)

    def test_seven_day_span_conserves_total(self):
        cfg = utc_config(weeks=1)
        rng = np.random.default_rng(10)
        values = rng.integers(0, 100, size=cfg.n_windows)
        out = resample(make_series(values), CALLS, "day", cfg)
        assert len(out.values) == 7
        assert out.values.sum() == values.sum()
        assert out.keys == tuple(f"2013-04-0{d}" for d in range(1, 8))
        # each day bin equals direct summation of its 96 windows
        for d in range(7):
            assert out.values[d] == values[d * 96:(d + 1) * 96].sum()

    def test_week_resolution_uses_iso_week_ids(self):
        cfg = utc_config(weeks=2)
        values = np.ones(cfg.n_windows, dtype=np.int64)
        out = resample(make_series(values), CALLS, "week", cfg)
        assert out.keys == ("2013-W14", "2013-W15")
        assert np.array_equal(out.values, [672, 672])

    def test_local_day_bins_vary_around_dst(self):
        cfg = CityConfig("lon", (51.3, -0.5, 51.7, 0.3), 500.0,
                         date(2013, 10, 21), date(2013, 10, 28), "Europe/London")
        values = np.ones(cfg.n_windows, dtype=np.int64)
        out = resample(make_series(values), CALLS, "day", cfg)
        by_key = dict(zip(out.keys, out.values.tolist()))
        assert by_key["2013-10-27"] == 100  # fall-back day has 25 local hours
        assert by_key["2013-10-22"] == 96
        assert out.values.sum() == cfg.n_windows

    def test_absent_bins_reported_absent(self):
        cfg = utc_config(weeks=1)
        presence = np.zeros(cfg.n_windows, dtype=bool)
        presence[:96] = True  # only the first day measured
        out = resample(make_series(np.ones(cfg.n_windows), presence), CALLS, "day", cfg)
        assert out.presence.tolist() == [True] + [False] * 6

    def test_unknown_resolution_rejected(self):
        cfg = utc_config(weeks=1)
        with pytest.raises(ValueError, match="resolution"):
            resample(make_series(np.ones(cfg.n_windows)), CALLS, "month", cfg)

    def test_weekly_totals_skips_absent_weeks(self):
        cfg = utc_config(weeks=2)
        presence = np.zeros(cfg.n_windows, dtype=bool)
        presence[:672] = True
        totals = weekly_totals(make_series(np.ones(cfg.n_windows), presence), CALLS, cfg)
        assert totals == {"2013-W14": 672}
