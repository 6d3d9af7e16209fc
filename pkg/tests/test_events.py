import numpy as np
import pytest
from datetime import date

from citypulse.events import EventReport, detect
from citypulse.ingest import ActivityType, CityConfig
from citypulse.profiles import BINS_PER_WEEK, ResidualSeries, residuals, typical_week
from citypulse.spatial import RegionSeries

CALLS = ActivityType.CALLS


def utc_config(weeks=2, start=date(2013, 4, 1)) -> CityConfig:
    return CityConfig("test", (0.0, 0.0, 0.018, 0.018), 1000.0, start,
                      date.fromordinal(start.toordinal() + 7 * weeks), "UTC")


def analytic_residuals(values, sigma=None, region="0:0") -> ResidualSeries:
    """Residual series with hand-chosen values and per-bin sigma."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if sigma is None:
        sigma = np.ones(BINS_PER_WEEK)
    return ResidualSeries(
        region_id=region,
        activity=CALLS,
        values=values,
        sigma=np.asarray(sigma, dtype=np.float64),
        contributing=~np.isnan(values),
        bins=(np.arange(n) % BINS_PER_WEEK).astype(np.int16),
    )


class TestDetect:
    def test_zero_residuals_give_no_events(self):
        cfg = utc_config()
        res = analytic_residuals(np.zeros(cfg.n_windows))
        assert detect(res, cfg) == []

    def test_rectangular_bump_detected_exactly(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        values[200:208] = 10.0  # 8 windows at 10 sigma
        res = analytic_residuals(values)
        (event,) = detect(res, cfg)
        assert event.start_index == 200
        assert event.end_index == 207
        assert event.duration_windows == 8
        assert event.peak_z == pytest.approx(10.0)
        assert event.mean_z == pytest.approx(10.0)
        assert event.start_window == cfg.window_start_utc(200)
        assert event.end_window == cfg.window_start_utc(207)

    def test_short_gap_merges_runs(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        values[100:103] = 6.0
        values[104:107] = 6.0  # one sub-threshold window between
        (event,) = detect(res := analytic_residuals(values), cfg, merge_gap=2)
        assert (event.start_index, event.end_index) == (100, 106)
        # without merging they are separate
        two = detect(res, cfg, merge_gap=0)
        assert [(e.start_index, e.end_index) for e in two] == [(100, 102), (104, 106)]

    def test_long_gap_keeps_runs_separate(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        values[100:103] = 6.0
        values[106:109] = 6.0  # 3 quiet windows > merge_gap of 2
        events = detect(analytic_residuals(values), cfg)
        assert [(e.start_index, e.end_index) for e in events] == [(100, 102), (106, 108)]

    def test_single_window_blip_discarded(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        values[500] = 50.0
        assert detect(analytic_residuals(values), cfg) == []

    def test_two_blips_bridged_by_gap_survive_min_duration(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        values[300] = 5.0
        values[302] = 5.0
        (event,) = detect(analytic_residuals(values), cfg)
        assert (event.start_index, event.end_index) == (300, 302)
        assert event.duration_windows == 3

    def test_shift_equivariance(self):
        cfg = utc_config()
        base = np.zeros(cfg.n_windows)
        base[400:410] = 7.0
        first = detect(analytic_residuals(base), cfg)
        for delta in (1, 13, 96):
            shifted = detect(analytic_residuals(np.roll(base, delta)), cfg)
            assert [(e.start_index - delta, e.end_index - delta) for e in shifted] == [
                (e.start_index, e.end_index) for e in first
            ]

    def test_threshold_containment(self):
        # containment holds even on noisy fixtures where nearby runs merge
        # at low thresholds and split apart at higher ones
        cfg = utc_config(weeks=4)
        rng = np.random.default_rng(77)
        values = rng.standard_normal(cfg.n_windows)
        for start in (100, 900, 1500, 2200):
            values[start : start + rng.integers(3, 15)] += rng.uniform(4, 12)
        res = analytic_residuals(values)
        by_threshold = {t: detect(res, cfg, threshold_z=t) for t in (3.0, 4.0, 5.0, 6.0)}
        thresholds = sorted(by_threshold)
        for lo, hi in zip(thresholds, thresholds[1:]):
            for event in by_threshold[hi]:
                assert any(
                    outer.start_index <= event.start_index
                    and event.end_index <= outer.end_index
                    for outer in by_threshold[lo]
                )

    def test_threshold_count_monotone_on_isolated_bumps(self):
        # count monotonicity needs bumps that cannot split or unmerge:
        # unimodal shapes far enough apart to never bridge a merge gap
        cfg = utc_config(weeks=4)
        values = np.zeros(cfg.n_windows)
        x = np.arange(-10, 11)
        for start, amp in ((200, 6.0), (600, 9.0), (1300, 14.0)):
            values[start : start + 21] += amp * np.exp(-(x / 4.0) ** 2)
        res = analytic_residuals(values)
        counts = [len(detect(res, cfg, threshold_z=t)) for t in (3, 4, 5, 8, 12, 20)]
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == 3 and counts[-1] == 0

    def test_undefined_sigma_never_triggers(self):
        cfg = utc_config()
        sigma = np.ones(BINS_PER_WEEK)
        sigma[10] = np.nan
        sigma[11] = 0.0
        values = np.zeros(cfg.n_windows)
        values[10:12] = 1000.0
        values[682:684] = 1000.0  # same bins, next week
        assert detect(analytic_residuals(values, sigma), cfg) == []

    def test_absent_windows_never_trigger(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        values[50:60] = np.nan
        assert detect(analytic_residuals(values), cfg) == []

    def test_negative_events_only_with_flag(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        values[100:110] = -6.0
        res = analytic_residuals(values)
        assert detect(res, cfg) == []
        (event,) = detect(res, cfg, include_negative=True)
        assert event.peak_z == pytest.approx(-6.0)
        assert event.mean_z == pytest.approx(-6.0)
        assert (event.start_index, event.end_index) == (100, 109)

    def test_events_sorted_and_disjoint(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        for start in (900, 100, 500):
            values[start : start + 4] = 8.0
        events = detect(analytic_residuals(values), cfg)
        starts = [e.start_index for e in events]
        assert starts == sorted(starts)
        for a, b in zip(events, events[1:]):
            assert a.end_index < b.start_index
        for e in events:
            assert e.start_index <= e.peak_index <= e.end_index

    def test_parameter_validation(self):
        cfg = utc_config()
        res = analytic_residuals(np.zeros(cfg.n_windows))
        with pytest.raises(ValueError, match="threshold_z"):
            detect(res, cfg, threshold_z=0.0)
        with pytest.raises(ValueError, match="min_duration"):
            detect(res, cfg, min_duration=0)
        with pytest.raises(ValueError, match="merge_gap"):
            detect(res, cfg, merge_gap=-1)

    def test_gaussian_noise_false_trigger_rate(self):
        n = 1_000_000
        cfg = CityConfig("noise", (0.0, 0.0, 0.018, 0.018), 1000.0,
                         date(2000, 1, 3), date(2030, 1, 3), "UTC")
        assert cfg.n_windows >= n
        rng = np.random.default_rng(123)
        values = np.zeros(cfg.n_windows)
        values[:n] = rng.standard_normal(n)
        values[n:] = np.nan
        res = analytic_residuals(values)
        sigma_w = res.sigma[res.bins]
        raw_rate = float(np.mean(res.values[:n] / sigma_w[:n] >= 4.0))
        # one-sided exceedance of N(0,1) at 4 is ~3.2e-5; bound is 3x the
        # two-sided rate
        assert raw_rate <= 3 * 6.4e-5
        # run filtering (min 2 adjacent) suppresses virtually all noise
        events = detect(res, cfg)
        assert len(events) <= 3

    def test_json_export_fields(self):
        cfg = utc_config()
        values = np.zeros(cfg.n_windows)
        values[96:104] = 9.0
        (event,) = detect(analytic_residuals(values), cfg)
        obj = event.to_json_dict()
        assert obj["region_id"] == "0:0"
        assert obj["activity"] == "CALLS"
        assert obj["start_window"] == "2013-04-02T00:00:00Z"
        assert obj["end_window"] == "2013-04-02T01:45:00Z"
        assert obj["duration_windows"] == 8


class TestEndToEnd:
    def test_planted_week_bump_detected_via_profiles(self):
        # with W weeks and a single-week rectangular bump, the bump's own
        # contribution to sigma caps z at (W-1)/sqrt(W); 26 weeks gives ~4.9
        cfg = utc_config(weeks=26)
        week = np.full(BINS_PER_WEEK, 1000, dtype=np.int64)
        values = np.tile(week, 26)
        start = 10 * BINS_PER_WEEK + 300
        values[start : start + 12] *= 10
        stacked = np.zeros((5, cfg.n_windows), dtype=np.int64)
        stacked[CALLS.value] = values
        series = RegionSeries("0:0", stacked, np.ones(cfg.n_windows, dtype=bool))
        profile = typical_week(series, CALLS, cfg)
        res = residuals(series, CALLS, profile, cfg)
        events = detect(res, cfg)
        assert len(events) == 1
        event = events[0]
        assert event.start_index == start
        assert event.end_index == start + 11
        assert event.peak_z == pytest.approx(25 / np.sqrt(26), rel=1e-6)
