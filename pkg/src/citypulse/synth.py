"""Synthetic city generator.

Plants known archetypes, a weekly growth trend, holiday damping, and
localized events into Poisson count data so every downstream stage can be
checked against ground truth. This is a test oracle, not a model of real
network traffic: overdispersion comes from a single multiplicative
log-normal factor per antenna-window, shared by all five counters.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import polars as pl

from .ingest import (
    ACTIVITY_HEADER,
    ACTIVITY_TYPES,
    ANTENNA_HEADER,
    ActivityType,
    CityConfig,
)
from .profiles import BINS_PER_WEEK, local_calendar
from .spatial import build_grid, cell_region_id, parse_cell_region_id

ARCHETYPES = ("business", "residential", "leisure", "uniform")

# mean per-window volume at antenna scale 1.0, by counter ordinal
TYPE_BASE_VOLUME = (6.0, 4.0, 2_000_000.0, 500_000.0, 30.0)

_WEEK_ID_RE = re.compile(r"^\d{4}-W\d{2}$")


@dataclass(frozen=True)
class HolidaySpec:
    week: str  # ISO week id, e.g. "2013-W52"
    damping: float  # multiplies every expectation in that local week

    def __post_init__(self) -> None:
        if not _WEEK_ID_RE.match(self.week):
            raise ValueError(f"bad week id: {self.week!r}")
        if not 0 < self.damping <= 1:
            raise ValueError("holiday damping must be in (0, 1]")


@dataclass(frozen=True)
class EventSpec:
    """A localized amplitude bump: cell id "r:c" or a (lat, lon) point."""

    location: str | tuple[float, float]
    start_window: int
    duration_windows: int
    amplitude: float
    types: tuple[ActivityType, ...] = ACTIVITY_TYPES

    def __post_init__(self) -> None:
        if isinstance(self.location, str):
            if parse_cell_region_id(self.location) is None:
                raise ValueError(f"event location not a cell id: {self.location!r}")
        else:
            lat, lon = self.location
            float(lat), float(lon)
        if self.start_window < 0 or self.duration_windows < 1:
            raise ValueError("event span must be non-empty and start at window >= 0")
        if not self.amplitude > 1:
            raise ValueError("event amplitude must exceed 1")
        if not self.types:
            raise ValueError("event must affect at least one type")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    city: CityConfig
    n_antennas: int
    mix: Mapping[str, float]  # archetype -> fraction, sums to 1
    templates: Mapping[str, np.ndarray] | None = None  # None = builtin
    volume_mu: float = 0.0  # log-normal of per-antenna scale
    volume_sigma: float = 0.5
    weekly_trend: float = 1.0  # multiplicative factor per elapsed week
    noise_sigma: float = 0.1  # per antenna-window log-normal rate noise
    holidays: tuple[HolidaySpec, ...] = ()
    events: tuple[EventSpec, ...] = ()

    def __post_init__(self) -> None:
        if self.n_antennas < 1:
            raise ValueError("scenario needs at least one antenna")
        unknown = set(self.mix) - set(ARCHETYPES)
        if unknown:
            raise ValueError(f"unknown archetypes in mix: {sorted(unknown)}")
        fracs = [float(self.mix.get(a, 0.0)) for a in ARCHETYPES]
        if min(fracs) < 0 or abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError("mix fractions must be >= 0 and sum to 1")
        if self.templates is not None:
            for arch, tmpl in self.templates.items():
                if arch not in ARCHETYPES:
                    raise ValueError(f"unknown archetype template: {arch!r}")
                t = np.asarray(tmpl, dtype=np.float64)
                if t.shape != (5, BINS_PER_WEEK):
                    raise ValueError("templates must have shape (5, 672)")
                if (t < 0).any() or t.sum() <= 0:
                    raise ValueError("templates must be non-negative with positive sum")
        if not self.weekly_trend > 0:
            raise ValueError("weekly trend factor must be positive")
        if self.noise_sigma < 0 or self.volume_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        n_windows = self.city.n_windows
        for ev in self.events:
            if ev.start_window + ev.duration_windows > n_windows:
                raise ValueError("event extends past the city period")

    def mix_fractions(self) -> np.ndarray:
        return np.array([float(self.mix.get(a, 0.0)) for a in ARCHETYPES])

    def resolved_templates(self) -> dict[str, np.ndarray]:
        if self.templates is None:
            return builtin_templates()
        out = dict(builtin_templates())
        for arch, tmpl in self.templates.items():
            out[arch] = np.asarray(tmpl, dtype=np.float64)
        return out

    def to_json_dict(self) -> dict:
        obj = {
            "seed": self.seed,
            "city": self.city.to_json_dict(),
            "n_antennas": self.n_antennas,
            "mix": {a: float(self.mix.get(a, 0.0)) for a in ARCHETYPES},
            "volume": {"mu": self.volume_mu, "sigma": self.volume_sigma},
            "weekly_trend": self.weekly_trend,
            "noise_sigma": self.noise_sigma,
            "holidays": [{"week": h.week, "damping": h.damping} for h in self.holidays],
            "events": [_event_json(e) for e in self.events],
        }
        if self.templates is not None:
            obj["templates"] = {a: np.asarray(t).tolist()
                                for a, t in self.templates.items()}
        return obj

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ScenarioSpec":
        templates = None
        if obj.get("templates") is not None:
            templates = {a: np.asarray(t, dtype=np.float64)
                         for a, t in obj["templates"].items()}
        vol = obj.get("volume", {})
        return cls(
            seed=int(obj["seed"]),
            city=CityConfig.from_json_dict(obj["city"]),
            n_antennas=int(obj["n_antennas"]),
            mix=dict(obj["mix"]),
            templates=templates,
            volume_mu=float(vol.get("mu", 0.0)),
            volume_sigma=float(vol.get("sigma", 0.5)),
            weekly_trend=float(obj.get("weekly_trend", 1.0)),
            noise_sigma=float(obj.get("noise_sigma", 0.1)),
            holidays=tuple(HolidaySpec(h["week"], float(h["damping"]))
                           for h in obj.get("holidays", [])),
            events=tuple(_event_from_json(e) for e in obj.get("events", [])),
        )


def _event_json(e: EventSpec) -> dict:
    obj: dict = {
        "start_window": e.start_window,
        "duration_windows": e.duration_windows,
        "amplitude": e.amplitude,
        "types": [t.name for t in e.types],
    }
    if isinstance(e.location, str):
        obj["cell"] = e.location
    else:
        obj["point"] = [float(e.location[0]), float(e.location[1])]
    return obj


def _event_from_json(obj: dict) -> EventSpec:
    location = obj["cell"] if "cell" in obj else (obj["point"][0], obj["point"][1])
    types = tuple(ActivityType[n] for n in obj.get("types", [])) or ACTIVITY_TYPES
    return EventSpec(location, int(obj["start_window"]),
                     int(obj["duration_windows"]), float(obj["amplitude"]), types)


def _gauss(hours: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    return np.exp(-0.5 * ((hours - mu) / sigma) ** 2)


def builtin_templates() -> dict[str, np.ndarray]:
    """Pinned 672-bin weekly shapes, one (5, 672) array per archetype.

    Per-bin hours use bin centers. Shapes, identical across counter types
    up to the per-type base volume:
      business     weekday Gaussian at 13:00 (sigma 2.5 h), weekends x 0.25
      residential  weekday Gaussian at 20:00 (sigma 2 h); weekend plateau
                   0.5 over 09:00-22:00 (low enough that the weekday
                   evening, not the weekend, is the over-represented span)
      leisure      weekend Gaussian at 14:00 (sigma 3 h), weekdays x 0.3
      uniform      constant
    Every shape is floored at 5% of its peak (nighttime base load), then
    scaled to mean 1 so TYPE_BASE_VOLUME is the mean per-window volume.
    """
    hours = (np.arange(96) + 0.5) / 4.0
    shapes: dict[str, np.ndarray] = {}

    day = np.zeros((7, 96))
    day[:5] = _gauss(hours, 13.0, 2.5)
    day[5:] = 0.25 * _gauss(hours, 13.0, 2.5)
    shapes["business"] = day.reshape(-1)

    day = np.zeros((7, 96))
    day[:5] = _gauss(hours, 20.0, 2.0)
    day[5:] = np.where((hours >= 9.0) & (hours < 22.0), 0.5, 0.0)
    shapes["residential"] = day.reshape(-1)

    day = np.zeros((7, 96))
    day[:5] = 0.3 * _gauss(hours, 14.0, 3.0)
    day[5:] = _gauss(hours, 14.0, 3.0)
    shapes["leisure"] = day.reshape(-1)

    shapes["uniform"] = np.ones(7 * 96)

    base = np.asarray(TYPE_BASE_VOLUME)
    out = {}
    for arch, shape in shapes.items():
        floored = np.maximum(shape, 0.05 * shape.max())
        floored /= floored.mean()
        out[arch] = np.outer(base, floored)
    return out


@dataclass
class ScenarioPlan:
    """Deterministic placement derived from (seed, 0): everything except
    the per-antenna count draws."""

    antenna_ids: list[str]
    lat_strs: list[str]
    lon_strs: list[str]
    lats: np.ndarray
    lons: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    cell_ids: list[str]
    cell_arch: np.ndarray  # (n_rows * n_cols,) index into ARCHETYPES
    arch_idx: np.ndarray  # per antenna
    scales: np.ndarray
    n_rows: int
    n_cols: int


def plan_scenario(spec: ScenarioSpec) -> ScenarioPlan:
    """Place antennas and plant archetypes.

    Archetypes are drawn from the mix once per grid cell and inherited by
    the cell's antennas, so the planted land-use map is defined at the
    region level the clustering stage actually sees.
    """
    master = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    grid = build_grid(spec.city)
    lat0, lon0, lat1, lon1 = spec.city.bbox
    n = spec.n_antennas
    # small margin so 6-decimal CSV rounding cannot escape the bbox
    eps = 2e-6
    lats_raw = master.uniform(lat0 + eps, lat1 - eps, n)
    lons_raw = master.uniform(lon0 + eps, lon1 - eps, n)
    # ground truth must describe the coordinates as ingest will read them
    lat_strs = [f"{x:.6f}" for x in lats_raw]
    lon_strs = [f"{x:.6f}" for x in lons_raw]
    lats = np.array([float(s) for s in lat_strs])
    lons = np.array([float(s) for s in lon_strs])
    rows, cols = grid.locate_many(lats, lons)

    n_cells = grid.n_rows * grid.n_cols
    cell_arch = master.choice(len(ARCHETYPES), size=n_cells, p=spec.mix_fractions())
    arch_idx = cell_arch[rows * grid.n_cols + cols]
    scales = master.lognormal(spec.volume_mu, spec.volume_sigma, n)

    width = max(4, len(str(n - 1)))
    ids = [f"a{i:0{width}d}" for i in range(n)]
    cells = [cell_region_id(int(r), int(c)) for r, c in zip(rows, cols)]
    return ScenarioPlan(ids, lat_strs, lon_strs, lats, lons, rows, cols, cells,
                        cell_arch, arch_idx, scales, grid.n_rows, grid.n_cols)


def _window_factor(spec: ScenarioSpec) -> np.ndarray:
    """Trend x holiday multiplier per window (local-week holiday keying)."""
    cal = local_calendar(spec.city)
    n_windows = spec.city.n_windows
    weeks_elapsed = np.arange(n_windows) // BINS_PER_WEEK
    factor = spec.weekly_trend ** weeks_elapsed.astype(np.float64)
    if spec.holidays:
        damp = {h.week: h.damping for h in spec.holidays}
        per_week = np.array([damp.get(w, 1.0) for w in cal.week_ids])
        factor = factor * per_week[cal.week_index]
    return factor


def _resolve_event_cells(spec: ScenarioSpec) -> list[tuple[str, EventSpec]]:
    grid = build_grid(spec.city)
    out = []
    for ev in spec.events:
        if isinstance(ev.location, str):
            cell = parse_cell_region_id(ev.location)
            if not (0 <= cell[0] < grid.n_rows and 0 <= cell[1] < grid.n_cols):
                raise ValueError(f"event cell outside grid: {ev.location}")
            out.append((ev.location, ev))
        else:
            cell = grid.locate(ev.location[0], ev.location[1])
            if cell is None:
                raise ValueError(f"event point outside bbox: {ev.location}")
            out.append((cell_region_id(*cell), ev))
    return out


def _timestamp_strings(config: CityConfig) -> list[str]:
    return [config.window_start_utc(i).strftime("%Y-%m-%dT%H:%M:%SZ")
            for i in range(config.n_windows)]


def _write_activity(spec: ScenarioSpec, plan: ScenarioPlan, fh,
                    chunk_antennas: int) -> None:
    cal = local_calendar(spec.city)
    n_windows = spec.city.n_windows
    factor = _window_factor(spec)
    templates = spec.resolved_templates()
    # per-archetype expectation at scale 1, already on the window axis
    base = {a: templates[a][:, cal.bins] * factor[None, :] for a in ARCHETYPES}
    events = _resolve_event_cells(spec)
    ts = _timestamp_strings(spec.city)
    counter_cols = ACTIVITY_HEADER[2:]

    fh.write((",".join(ACTIVITY_HEADER) + "\n").encode("ascii"))
    for lo in range(0, spec.n_antennas, chunk_antennas):
        hi = min(lo + chunk_antennas, spec.n_antennas)
        chunk_counts = np.empty((hi - lo, 5, n_windows), dtype=np.int64)
        for i in range(lo, hi):
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1, i]))
            arch = ARCHETYPES[plan.arch_idx[i]]
            expected = plan.scales[i] * base[arch]
            patched = False
            for cell_id, ev in events:
                if cell_id != plan.cell_ids[i]:
                    continue
                if not patched:
                    expected = expected.copy()
                    patched = True
                rows = [t.value for t in ev.types]
                sl = slice(ev.start_window, ev.start_window + ev.duration_windows)
                expected[rows, sl] *= ev.amplitude
            noise = rng.lognormal(0.0, spec.noise_sigma, n_windows)
            chunk_counts[i - lo] = rng.poisson(expected * noise[None, :])
        df = pl.DataFrame({
            "antenna_id": np.repeat(np.array(plan.antenna_ids[lo:hi], dtype=object),
                                    n_windows),
            "window_start": np.tile(np.array(ts, dtype=object), hi - lo),
            **{col: chunk_counts[:, k, :].reshape(-1)
               for k, col in enumerate(counter_cols)},
        })
        df.write_csv(fh, include_header=False)


def _antennas_csv(plan: ScenarioPlan) -> str:
    lines = [",".join(ANTENNA_HEADER)]
    lines += [f"{a},{la},{lo}" for a, la, lo in
              zip(plan.antenna_ids, plan.lat_strs, plan.lon_strs)]
    return "\n".join(lines) + "\n"


def ground_truth_record(spec: ScenarioSpec, plan: ScenarioPlan) -> dict:
    events = []
    for cell_id, ev in _resolve_event_cells(spec):
        events.append({
            "cell": cell_id,
            "start_window": ev.start_window,
            "end_window": ev.start_window + ev.duration_windows - 1,
            "duration_windows": ev.duration_windows,
            "amplitude": ev.amplitude,
            "types": [t.name for t in ev.types],
        })
    return {
        "seed": spec.seed,
        "city_id": spec.city.city_id,
        "weekly_trend": spec.weekly_trend,
        "noise_sigma": spec.noise_sigma,
        "antennas": [
            {"antenna_id": a, "lat": float(la), "lon": float(lo),
             "cell": cell, "archetype": ARCHETYPES[k]}
            for a, la, lo, cell, k in zip(
                plan.antenna_ids, plan.lat_strs, plan.lon_strs,
                plan.cell_ids, plan.arch_idx)
        ],
        "cell_archetypes": {
            cell_region_id(r, c): ARCHETYPES[plan.cell_arch[r * plan.n_cols + c]]
            for r in range(plan.n_rows) for c in range(plan.n_cols)
        },
        "events": events,
        "holidays": [{"week": h.week, "damping": h.damping} for h in spec.holidays],
    }


def generate(spec: ScenarioSpec, *, chunk_antennas: int = 64
             ) -> tuple[str, str, dict]:
    """Render the whole scenario in memory.

    Returns (antennas.csv, activity.csv, ground truth). Fine for test-size
    cities; use write_scenario for anything big.
    """
    plan = plan_scenario(spec)
    buf = io.BytesIO()
    _write_activity(spec, plan, buf, chunk_antennas)
    return (_antennas_csv(plan), buf.getvalue().decode("ascii"),
            ground_truth_record(spec, plan))


def write_scenario(spec: ScenarioSpec, out_dir, *, chunk_antennas: int = 64
                   ) -> dict:
    """Write antennas.csv, activity.csv, city.json, ground_truth.json.

    Streams activity in antenna chunks, so the default 50M-row city never
    materializes in memory. Returns the ground truth record.
    """
    import os

    from . import jsonio

    os.makedirs(out_dir, exist_ok=True)
    plan = plan_scenario(spec)
    with open(os.path.join(out_dir, "antennas.csv"), "w", encoding="ascii") as f:
        f.write(_antennas_csv(plan))
    with open(os.path.join(out_dir, "activity.csv"), "wb") as f:
        _write_activity(spec, plan, f, chunk_antennas)
    jsonio.write_json(os.path.join(out_dir, "city.json"),
                      spec.city.to_json_dict())
    truth = ground_truth_record(spec, plan)
    jsonio.write_json(os.path.join(out_dir, "ground_truth.json"), truth)
    return truth


def default_scenario() -> ScenarioSpec:
    """The 40-week, 2,000-antenna reference city used across the test suite."""
    from datetime import date

    city = CityConfig(
        city_id="synthtown",
        bbox=(51.5, -0.2, 51.5 + 4750.0 / 111_320.0, -0.2 + 0.0685754),
        cell_size_m=500.0,
        period_start=date(2013, 4, 1),
        period_end=date(2014, 1, 6),
        timezone="Europe/London",
    )
    return ScenarioSpec(
        seed=20130401,
        city=city,
        n_antennas=2000,
        mix={"business": 0.25, "residential": 0.45, "leisure": 0.15,
             "uniform": 0.15},
        weekly_trend=1.01,
        holidays=(HolidaySpec("2013-W52", 0.6),),
        events=(EventSpec("5:5", 10 * BINS_PER_WEEK + 5 * 96 + 68, 12, 10.0),),
    )
