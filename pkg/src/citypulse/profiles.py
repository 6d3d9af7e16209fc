"""Typical-week profiles, L1 normalization, residuals, and resampling.

All profile arithmetic happens in city-local time: bin b = weekday * 96 +
slot, weekday 0 = Monday, slot 0 = 00:00-00:15 local. Weeks are local ISO
weeks (Monday 00:00). The window axis itself stays UTC; a LocalCalendar
maps each UTC window to its local (week, bin) once per city.

DST handling: a (week, bin) that received zero windows (spring-forward
gap, or a partial week at the period edge) or two windows (fall-back
repeat) is anomalous and contributes nothing to profile means or sigmas.
Residual values still exist at every present window; the `contributing`
mask marks the subset the statistics are defined over.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from datetime import timedelta
from typing import Iterable, Sequence

import numpy as np

from .ingest import ActivityType, CityConfig, WINDOWS_PER_DAY
from .spatial import RegionSeries

BINS_PER_WEEK = 7 * WINDOWS_PER_DAY  # 672

RESOLUTIONS = ("15min", "hour", "day", "week")


def week_id(iso_year: int, iso_week: int) -> str:
    return f"{iso_year}-W{iso_week:02d}"


@dataclass(frozen=True)
class LocalCalendar:
    """Per-window local-time lookup tables for one CityConfig.

    occurrence[k, b] is the window index of local week k, bin b, or -1;
    occ_count[k, b] counts how many windows landed there (1 is normal,
    0 = gap or partial week, 2 = fall-back repeat).
    """

    config: CityConfig
    bins: np.ndarray  # (n_windows,) int16, local bin of each window
    week_index: np.ndarray  # (n_windows,) int32, into week_ids
    week_ids: tuple[str, ...]
    occurrence: np.ndarray  # (n_weeks, 672) int32
    occ_count: np.ndarray  # (n_weeks, 672) int16
    anomalous: np.ndarray  # (n_windows,) bool, occ_count != 1 at this window

    @property
    def n_weeks(self) -> int:
        return len(self.week_ids)

    def week_number(self, wid: str) -> int:
        try:
            return self.week_ids.index(wid)
        except ValueError:
            raise KeyError(f"week {wid!r} not in period") from None

    def excluded_week_mask(self, exclude_weeks: Iterable[str] | None) -> np.ndarray:
        mask = np.zeros(self.n_weeks, dtype=bool)
        for wid in exclude_weeks or ():
            try:
                mask[self.week_number(wid)] = True
            except KeyError:
                pass  # excluding a week outside the period is a no-op
        return mask


@functools.lru_cache(maxsize=32)
def local_calendar(config: CityConfig) -> LocalCalendar:
    tz = config.tzinfo
    n = config.n_windows
    bins = np.empty(n, dtype=np.int16)
    week_keys: list[tuple[int, int]] = []
    week_lookup: dict[tuple[int, int], int] = {}
    week_index = np.empty(n, dtype=np.int32)
    ts = config.start_utc
    step = timedelta(seconds=900)
    for w in range(n):
        local = ts.astimezone(tz)
        iso = local.isocalendar()
        key = (iso[0], iso[1])
        k = week_lookup.get(key)
        if k is None:
            k = len(week_keys)
            week_lookup[key] = k
            week_keys.append(key)
        week_index[w] = k
        bins[w] = (iso[2] - 1) * WINDOWS_PER_DAY + local.hour * 4 + local.minute // 15
        ts += step
    n_weeks = len(week_keys)
    occurrence = np.full((n_weeks, BINS_PER_WEEK), -1, dtype=np.int32)
    occ_count = np.zeros((n_weeks, BINS_PER_WEEK), dtype=np.int16)
    flat = week_index.astype(np.int64) * BINS_PER_WEEK + bins
    np.add.at(occ_count.reshape(-1), flat, 1)
    first = occurrence.reshape(-1)
    # reversed write keeps the first occurrence
    first[flat[::-1]] = np.arange(n - 1, -1, -1)
    anomalous = occ_count.reshape(-1)[flat] != 1
    return LocalCalendar(
        config=config,
        bins=bins,
        week_index=week_index,
        week_ids=tuple(week_id(y, wk) for y, wk in week_keys),
        occurrence=occurrence,
        occ_count=occ_count,
        anomalous=anomalous,
    )


@dataclass
class WeeklyProfile:
    """672-bin typical week for one (region, activity)."""

    region_id: str
    activity: ActivityType
    values: np.ndarray  # (672,) float64
    support: np.ndarray  # (672,) int32, contributing week count per bin
    normalized: bool
    empty: bool

    def to_json_dict(self) -> dict:
        return {
            "region_id": self.region_id,
            "activity": self.activity.name,
            "normalized": self.normalized,
            "values": self.values.tolist(),
            "support": self.support.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "WeeklyProfile":
        values = np.asarray(obj["values"], dtype=np.float64)
        support = np.asarray(obj["support"], dtype=np.int32)
        return cls(
            region_id=obj["region_id"],
            activity=ActivityType.from_name(obj["activity"]),
            values=values,
            support=support,
            normalized=bool(obj["normalized"]),
            empty=bool(support.sum() == 0 or (obj["normalized"] and values.sum() == 0)),
        )


@dataclass
class ResidualSeries:
    """Observed minus typical-week expectation, over the UTC window axis.

    values[w] is NaN where presence is clear (no measurement, residual
    undefined). sigma[b] is the per-bin sample standard deviation across
    contributing weeks (NaN where support < 2). The mean-zero property
    holds over `contributing` windows: present, non-anomalous, and not in
    an excluded week.
    """

    region_id: str
    activity: ActivityType
    values: np.ndarray  # (n_windows,) float64, NaN at absent windows
    sigma: np.ndarray  # (672,) float64, NaN where support < 2
    contributing: np.ndarray  # (n_windows,) bool
    bins: np.ndarray  # (n_windows,) int16, shared with the calendar


def _bin_samples(
    series: RegionSeries,
    activity: ActivityType,
    cal: LocalCalendar,
    exclude_weeks: Iterable[str] | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-(week, bin) observed values and their validity mask."""
    occ = cal.occurrence
    safe = np.maximum(occ, 0)
    valid = (occ >= 0) & (cal.occ_count == 1) & series.presence[safe]
    excluded = cal.excluded_week_mask(exclude_weeks)
    if excluded.any():
        valid &= ~excluded[:, None]
    samples = series.series(activity)[safe].astype(np.float64)
    return samples, valid


def typical_week(
    series: RegionSeries,
    activity: ActivityType,
    config: CityConfig,
    exclude_weeks: Iterable[str] | None = None,
) -> WeeklyProfile:
    """Raw typical week: per-bin mean over contributing week occurrences."""
    cal = local_calendar(config)
    samples, valid = _bin_samples(series, activity, cal, exclude_weeks)
    support = valid.sum(axis=0, dtype=np.int32)
    sums = np.where(valid, samples, 0.0).sum(axis=0)
    values = np.divide(sums, support, out=np.zeros(BINS_PER_WEEK), where=support > 0)
    return WeeklyProfile(
        region_id=series.region_id,
        activity=activity,
        values=values,
        support=support,
        normalized=False,
        empty=bool(support.sum() == 0),
    )


def normalize(profile: WeeklyProfile) -> WeeklyProfile:
    """L1-normalize a profile so its bins sum to 1 (pure shape).

    Idempotent; an all-zero or empty profile propagates the empty flag
    (callers must keep such regions out of clustering).
    """
    if profile.normalized:
        return profile
    total = float(profile.values.sum())
    if profile.empty or total <= 0:
        return replace(
            profile,
            values=np.zeros(BINS_PER_WEEK),
            normalized=True,
            empty=True,
        )
    return replace(profile, values=profile.values / total, normalized=True)


def residuals(
    series: RegionSeries,
    activity: ActivityType,
    profile: WeeklyProfile,
    config: CityConfig,
    exclude_weeks: Iterable[str] | None = None,
) -> ResidualSeries:
    """Observed minus expected, with per-bin sample sigma (n-1 denominator).

    `profile` must be the raw typical week of this same series, built with
    the same `exclude_weeks`; otherwise the per-bin mean-zero property is
    not guaranteed.
    """
    if profile.normalized:
        raise ValueError("residuals need the raw profile, not a normalized one")
    cal = local_calendar(config)
    samples, valid = _bin_samples(series, activity, cal, exclude_weeks)
    support = valid.sum(axis=0)
    dev = np.where(valid, samples - profile.values[None, :], 0.0)
    ssq = (dev * dev).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma = np.where(support >= 2, np.sqrt(ssq / np.maximum(support - 1, 1)), np.nan)

    observed = series.series(activity).astype(np.float64)
    values = observed - profile.values[cal.bins]
    values[~series.presence] = np.nan
    contributing = series.presence & ~cal.anomalous
    excluded = cal.excluded_week_mask(exclude_weeks)
    if excluded.any():
        contributing &= ~excluded[cal.week_index]
    return ResidualSeries(
        region_id=series.region_id,
        activity=activity,
        values=values,
        sigma=sigma,
        contributing=contributing,
        bins=cal.bins,
    )


@dataclass
class ResampledSeries:
    """A region's series summed into coarser bins.

    For 15min/hour the axis is regular from the period start (step_seconds);
    keys is None. For day/week bins follow the local calendar and keys
    holds the local ISO date / ISO week id per bin. A bin is present if at
    least one constituent window is present; values at absent bins are 0.
    """

    region_id: str
    activity: ActivityType
    resolution: str
    values: np.ndarray  # (n_bins,) int64
    presence: np.ndarray  # (n_bins,) bool
    step_seconds: int | None
    keys: tuple[str, ...] | None


def resample(
    series: RegionSeries,
    activity: ActivityType,
    resolution: str,
    config: CityConfig,
) -> ResampledSeries:
    """Sum windows into 15min (identity), hour, local day, or local week bins."""
    x = series.series(activity)
    pres = series.presence
    if resolution == "15min":
        return ResampledSeries(series.region_id, activity, resolution,
                               x.copy(), pres.copy(), 900, None)
    if resolution == "hour":
        n = len(x) // 4
        values = x.reshape(n, 4).sum(axis=1)
        presence = pres.reshape(n, 4).any(axis=1)
        return ResampledSeries(series.region_id, activity, resolution,
                               values, presence, 3600, None)
    if resolution in ("day", "week"):
        cal = local_calendar(config)
        if resolution == "week":
            group = cal.week_index
            keys = cal.week_ids
        else:
            # day index = cumulative count of local-midnight bin starts
            day_start = cal.bins % WINDOWS_PER_DAY == 0
            day_start[0] = True
            group = np.cumsum(day_start) - 1
            tz = config.tzinfo
            keys_list = []
            starts = np.nonzero(day_start)[0]
            for w in starts:
                keys_list.append(config.window_start_utc(int(w)).astimezone(tz).date().isoformat())
            keys = tuple(keys_list)
        n = int(group.max()) + 1
        values = np.bincount(group, weights=x.astype(np.float64), minlength=n)
        presence = np.bincount(group, weights=pres.astype(np.float64), minlength=n) > 0
        return ResampledSeries(series.region_id, activity, resolution,
                               np.rint(values).astype(np.int64), presence,
                               None, keys)
    raise ValueError(f"unknown resolution {resolution!r}, expected one of {RESOLUTIONS}")


def weekly_totals(series: RegionSeries, activity: ActivityType, config: CityConfig) -> dict[str, int]:
    """Convenience: local-week id -> total volume (absent weeks omitted)."""
    rs = resample(series, activity, "week", config)
    assert rs.keys is not None
    return {k: int(v) for k, v, p in zip(rs.keys, rs.values, rs.presence) if p}
