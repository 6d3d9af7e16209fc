"""Event detection: contiguous residual excursions beyond a z threshold.

z(w) = residual(w) / sigma[bin(w)]. Windows where z is undefined (absent
window, sigma undefined from support < 2, or sigma = 0) never trigger and
act as plain gap windows for run merging. Detection is one-sided positive
by default; include_negative adds drop events whose peak_z is negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .ingest import ActivityType, CityConfig
from .profiles import ResidualSeries

DEFAULT_THRESHOLD_Z = 4.0
DEFAULT_MIN_DURATION = 2
DEFAULT_MERGE_GAP = 2


@dataclass(frozen=True)
class EventReport:
    """One detected excursion; window timestamps are UTC window starts.

    end_window is the start of the last window inside the event, so the
    event spans [start_window, end_window + 15min). peak_z is signed:
    negative for drop events.
    """

    region_id: str
    activity: ActivityType
    start_window: datetime
    end_window: datetime
    peak_window: datetime
    peak_z: float
    mean_z: float
    start_index: int
    end_index: int
    peak_index: int

    @property
    def duration_windows(self) -> int:
        return self.end_index - self.start_index + 1

    def to_json_dict(self) -> dict:
        return {
            "region_id": self.region_id,
            "activity": self.activity.name,
            "start_window": _iso(self.start_window),
            "end_window": _iso(self.end_window),
            "peak_window": _iso(self.peak_window),
            "peak_z": self.peak_z,
            "mean_z": self.mean_z,
            "duration_windows": self.duration_windows,
        }


def _iso(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def _runs(trigger: np.ndarray) -> list[tuple[int, int]]:
    t = trigger.astype(np.int8)
    starts = np.flatnonzero(np.diff(np.concatenate(([0], t))) == 1)
    ends = np.flatnonzero(np.diff(np.concatenate((t, [0]))) == -1)
    return list(zip(starts.tolist(), ends.tolist()))


def _merge_runs(runs: list[tuple[int, int]], merge_gap: int) -> list[tuple[int, int]]:
    merged: list[tuple[int, int]] = []
    for start, end in runs:
        if merged and start - merged[-1][1] - 1 <= merge_gap:
            merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return merged


def detect(
    res: ResidualSeries,
    config: CityConfig,
    threshold_z: float = DEFAULT_THRESHOLD_Z,
    min_duration: int = DEFAULT_MIN_DURATION,
    merge_gap: int = DEFAULT_MERGE_GAP,
    include_negative: bool = False,
) -> list[EventReport]:
    """Find maximal super-threshold runs, bridge short gaps, drop blips.

    A run is windows with z >= threshold_z; runs separated by <= merge_gap
    non-triggering windows merge into one event; merged spans shorter than
    min_duration windows are discarded. Events per polarity are disjoint
    and sorted by start.
    """
    if threshold_z <= 0:
        raise ValueError(f"threshold_z must be positive, got {threshold_z}")
    if min_duration < 1:
        raise ValueError(f"min_duration must be >= 1, got {min_duration}")
    if merge_gap < 0:
        raise ValueError(f"merge_gap must be >= 0, got {merge_gap}")

    sigma_w = res.sigma[res.bins]
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(sigma_w > 0, res.values / sigma_w, np.nan)

    polarities = [1.0] + ([-1.0] if include_negative else [])
    events: list[EventReport] = []
    for sign in polarities:
        zs = sign * z
        trigger = np.zeros(len(zs), dtype=bool)
        defined = ~np.isnan(zs)
        trigger[defined] = zs[defined] >= threshold_z
        for start, end in _merge_runs(_runs(trigger), merge_gap):
            if end - start + 1 < min_duration:
                continue
            span = zs[start : end + 1]
            peak_off = int(np.nanargmax(span))
            events.append(
                EventReport(
                    region_id=res.region_id,
                    activity=res.activity,
                    start_window=config.window_start_utc(start),
                    end_window=config.window_start_utc(end),
                    peak_window=config.window_start_utc(start + peak_off),
                    peak_z=float(sign * span[peak_off]),
                    mean_z=float(sign * np.nanmean(span)),
                    start_index=start,
                    end_index=end,
                    peak_index=start + peak_off,
                )
            )
    events.sort(key=lambda e: (e.start_index, e.peak_z < 0))
    return events
