"""Per-cell volume and activity-mix maps over a window period.

Volume is the mean per present window (not the sum), so sparsely covered
cells compare fairly with dense ones. Ratios divide one type's volume by
the naive all-type total; counts and bytes mix units there, which is why
pairwise ratios (type A against type B only) are offered as the unit-safe
alternative.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Mapping

import numpy as np

from . import jsonio
from .ingest import ActivityType, CityConfig, WINDOW_SECONDS
from .spatial import Grid, RegionSeries, parse_cell_region_id

METRIC_VOLUME = "volume"
METRIC_RATIO = "ratio"

_WINDOW = timedelta(seconds=WINDOW_SECONDS)


@dataclass
class DensityMap:
    metric: str
    activity: ActivityType
    versus: ActivityType | None  # pairwise-ratio denominator partner
    period: tuple[datetime, datetime]  # [start, end) UTC
    n_rows: int
    n_cols: int
    values: np.ndarray  # (n_rows, n_cols) float64, NaN where absent
    coverage: np.ndarray  # (n_rows, n_cols) int64 present-window count

    def to_json_dict(self) -> dict:
        flat = self.values.reshape(-1)
        vals = jsonio.quantized_list(flat, absent=np.isnan(flat))
        out = {
            "metric": self.metric,
            "type": self.activity.name,
            "period": [_iso(self.period[0]), _iso(self.period[1])],
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "values": vals,
            "coverage": self.coverage.reshape(-1).tolist(),
        }
        if self.versus is not None:
            out["versus"] = self.versus.name
        return out


def _iso(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def window_range(
    config: CityConfig,
    period: tuple[datetime, datetime] | None,
) -> tuple[int, int]:
    """Clamp-free window index range [i0, i1) for a UTC period; None = full."""
    if period is None:
        return 0, config.n_windows
    start, end = period
    delta0 = (start - config.start_utc).total_seconds()
    delta1 = (end - config.start_utc).total_seconds()
    if delta0 % WINDOW_SECONDS or delta1 % WINDOW_SECONDS:
        raise ValueError("period bounds must align to 15-minute windows")
    i0, i1 = int(delta0) // WINDOW_SECONDS, int(delta1) // WINDOW_SECONDS
    if not (0 <= i0 < i1 <= config.n_windows):
        raise ValueError(
            f"period [{_iso(start)}, {_iso(end)}) empty or outside the city period"
        )
    return i0, i1


def _cell_sums(
    series: Mapping[str, RegionSeries],
    grid: Grid,
    i0: int,
    i1: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell present-window sums (5, rows, cols) and coverage counts."""
    sums = np.zeros((5, grid.n_rows, grid.n_cols))
    coverage = np.zeros((grid.n_rows, grid.n_cols), dtype=np.int64)
    for region_id, rs in series.items():
        cell = parse_cell_region_id(region_id)
        if cell is None:
            continue  # districts and the city aggregate are not cells
        r, c = cell
        pres = rs.presence[i0:i1]
        coverage[r, c] = int(pres.sum())
        sums[:, r, c] = (rs.values[:, i0:i1] * pres).sum(axis=1)
    return sums, coverage


def volume_map(
    series: Mapping[str, RegionSeries],
    grid: Grid,
    activity: ActivityType,
    config: CityConfig,
    period: tuple[datetime, datetime] | None = None,
) -> DensityMap:
    """Mean per-window volume of one type per cell; no measurements = absent."""
    i0, i1 = window_range(config, period)
    sums, coverage = _cell_sums(series, grid, i0, i1)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(coverage > 0, sums[activity.value] / coverage, np.nan)
    return DensityMap(METRIC_VOLUME, activity, None,
                      (config.start_utc + i0 * _WINDOW, config.start_utc + i1 * _WINDOW),
                      grid.n_rows, grid.n_cols, values, coverage)


def ratio_map(
    series: Mapping[str, RegionSeries],
    grid: Grid,
    activity: ActivityType,
    config: CityConfig,
    period: tuple[datetime, datetime] | None = None,
    versus: ActivityType | None = None,
) -> DensityMap:
    """Share of one type in the cell's total volume over the period.

    With `versus`, the denominator is just the two types' combined volume
    (unit-safe when both are counts); otherwise all five types as-is.
    Cells whose denominator is 0 are absent.
    """
    if versus is not None and versus is activity:
        raise ValueError("versus must differ from the numerator type")
    i0, i1 = window_range(config, period)
    sums, coverage = _cell_sums(series, grid, i0, i1)
    numer = sums[activity.value]
    if versus is None:
        denom = sums.sum(axis=0)
    else:
        denom = numer + sums[versus.value]
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(denom > 0, numer / denom, np.nan)
    return DensityMap(METRIC_RATIO, activity, versus,
                      (config.start_utc + i0 * _WINDOW, config.start_utc + i1 * _WINDOW),
                      grid.n_rows, grid.n_cols, values, coverage)
