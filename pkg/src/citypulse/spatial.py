"""Regular analysis grid, antenna-to-region assignment, and aggregation.

The grid is an equirectangular approximation evaluated at the bbox
mid-latitude: good to well under a cell size for city-scale bboxes.
Aggregation is an integer sum fold over records, so shards can be
processed in any order and merged by elementwise addition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import polars as pl

from .ingest import (
    ACTIVITY_HEADER,
    ACTIVITY_TYPES,
    ActivityParseReport,
    ActivityRecord,
    ActivityType,
    Antenna,
    CityConfig,
    IngestError,
    RowIssue,
    WINDOW_SECONDS,
    parse_activity,
)

METERS_PER_DEG_LAT = 111_320.0

# Tolerance, in cell units, for points sitting exactly on a cell edge: the
# edge belongs to the higher cell, and float rounding must not flip that.
_EDGE_SNAP = 1e-9

CITY_REGION_ID = "city"


class DuplicateRecordError(IngestError):
    """Same (antenna_id, window_start) seen more than once in one city."""


@dataclass(frozen=True)
class Grid:
    """Regular grid over a bbox; cell (0, 0) sits at (lat_min, lon_min)."""

    origin: tuple[float, float]  # (lat_min, lon_min)
    cell_size_m: float
    n_rows: int
    n_cols: int
    meters_per_deg_lat: float
    meters_per_deg_lon: float
    lat_max: float
    lon_max: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def locate(self, lat: float, lon: float) -> tuple[int, int] | None:
        """Cell index of a point, or None outside the bbox.

        Cells are half-open [edge, next_edge) except the final row/col,
        which closes at the bbox max edge so locate() is total on the
        closed bbox.
        """
        r = self._axis_index(lat - self.origin[0], self.meters_per_deg_lat, self.n_rows,
                             (self.lat_max - self.origin[0]))
        c = self._axis_index(lon - self.origin[1], self.meters_per_deg_lon, self.n_cols,
                             (self.lon_max - self.origin[1]))
        if r is None or c is None:
            return None
        return (r, c)

    def _axis_index(self, delta_deg: float, m_per_deg: float, n: int, extent_deg: float) -> int | None:
        x = delta_deg * m_per_deg / self.cell_size_m
        x_max = extent_deg * m_per_deg / self.cell_size_m
        if x < -_EDGE_SNAP or x > x_max + _EDGE_SNAP:
            return None
        return min(max(int(math.floor(x + _EDGE_SNAP)), 0), n - 1)

    def locate_many(self, lats: np.ndarray, lons: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized locate; out-of-bbox points get index -1."""
        rows = self._axis_index_many(np.asarray(lats) - self.origin[0], self.meters_per_deg_lat,
                                     self.n_rows, self.lat_max - self.origin[0])
        cols = self._axis_index_many(np.asarray(lons) - self.origin[1], self.meters_per_deg_lon,
                                     self.n_cols, self.lon_max - self.origin[1])
        oob = (rows < 0) | (cols < 0)
        rows[oob] = -1
        cols[oob] = -1
        return rows, cols

    def _axis_index_many(self, delta_deg: np.ndarray, m_per_deg: float, n: int, extent_deg: float) -> np.ndarray:
        x = delta_deg * m_per_deg / self.cell_size_m
        x_max = extent_deg * m_per_deg / self.cell_size_m
        idx = np.clip(np.floor(x + _EDGE_SNAP), 0, n - 1).astype(np.int32)
        idx[(x < -_EDGE_SNAP) | (x > x_max + _EDGE_SNAP)] = -1
        return idx

    def cell_bounds(self, row: int, col: int) -> tuple[float, float, float, float]:
        """(lat_min, lon_min, lat_max, lon_max) of one cell, clipped to the bbox."""
        dlat = self.cell_size_m / self.meters_per_deg_lat
        dlon = self.cell_size_m / self.meters_per_deg_lon
        lat0 = self.origin[0] + row * dlat
        lon0 = self.origin[1] + col * dlon
        return (lat0, lon0, min(lat0 + dlat, self.lat_max), min(lon0 + dlon, self.lon_max))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        lat0, lon0, lat1, lon1 = self.cell_bounds(row, col)
        return ((lat0 + lat1) / 2, (lon0 + lon1) / 2)


def cell_region_id(row: int, col: int) -> str:
    return f"{row}:{col}"


def parse_cell_region_id(region_id: str) -> tuple[int, int] | None:
    parts = region_id.split(":")
    if len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit():
        return (int(parts[0]), int(parts[1]))
    return None


def build_grid(config: CityConfig) -> Grid:
    lat_min, lon_min, lat_max, lon_max = config.bbox
    mid_lat = (lat_min + lat_max) / 2
    m_lat = METERS_PER_DEG_LAT
    m_lon = METERS_PER_DEG_LAT * math.cos(math.radians(mid_lat))
    ext_lat_m = (lat_max - lat_min) * m_lat
    ext_lon_m = (lon_max - lon_min) * m_lon
    if ext_lat_m <= 0 or ext_lon_m <= 0:
        raise ValueError(f"degenerate bbox {config.bbox}")
    return Grid(
        origin=(lat_min, lon_min),
        cell_size_m=config.cell_size_m,
        n_rows=math.ceil(ext_lat_m / config.cell_size_m),
        n_cols=math.ceil(ext_lon_m / config.cell_size_m),
        meters_per_deg_lat=m_lat,
        meters_per_deg_lon=m_lon,
        lat_max=lat_max,
        lon_max=lon_max,
    )


# --- districts ---------------------------------------------------------------


@dataclass(frozen=True)
class District:
    """Administrative polygon; rings[0] is the exterior, the rest are holes.

    MultiPolygon features flatten into one ring list: point-in-polygon uses
    the even-odd rule over all rings, which treats holes and disjoint parts
    correctly.
    """

    district_id: str
    name: str
    rings: tuple[np.ndarray, ...]  # each (m, 2) float64 of (lat, lon), not closed

    def __post_init__(self) -> None:
        if not self.rings:
            raise ValueError(f"district {self.district_id}: no rings")
        for ring in self.rings:
            if ring.shape[0] < 3:
                raise ValueError(f"district {self.district_id}: ring with < 3 vertices")
            if _ring_self_intersects(ring):
                raise ValueError(f"district {self.district_id}: self-intersecting ring")

    def contains(self, lat: float, lon: float) -> bool:
        return bool(self.contains_many(np.array([lat]), np.array([lon]))[0])

    def contains_many(self, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
        """Even-odd crossing test, vectorized over points."""
        inside = np.zeros(len(lats), dtype=bool)
        for ring in self.rings:
            y = ring[:, 0]
            x = ring[:, 1]
            y2 = np.roll(y, -1)
            x2 = np.roll(x, -1)
            for i in range(len(y)):
                y1i, x1i, y2i, x2i = y[i], x[i], y2[i], x2[i]
                if y1i == y2i:
                    continue  # horizontal edge never crosses a horizontal ray
                straddles = (y1i > lats) != (y2i > lats)
                with np.errstate(invalid="ignore"):
                    x_cross = x1i + (lats - y1i) * (x2i - x1i) / (y2i - y1i)
                inside ^= straddles & (lons < x_cross)
        return inside


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _ring_self_intersects(ring: np.ndarray) -> bool:
    n = ring.shape[0]
    edges = [(tuple(ring[i]), tuple(ring[(i + 1) % n])) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent around the closure
            if _segments_properly_intersect(*edges[i], *edges[j]):
                return True
    return False


def load_districts(path: str | Path) -> list[District]:
    """Read a GeoJSON FeatureCollection of Polygon/MultiPolygon districts.

    GeoJSON coordinates are (lon, lat); they are flipped to (lat, lon) here.
    """
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("type") != "FeatureCollection":
        raise IngestError(f"{path}: expected a GeoJSON FeatureCollection")
    districts: list[District] = []
    seen: set[str] = set()
    for feat in doc.get("features", []):
        props = feat.get("properties") or {}
        geom = feat.get("geometry") or {}
        district_id = str(props.get("district_id", ""))
        if not district_id:
            raise IngestError(f"{path}: feature without properties.district_id")
        if district_id == CITY_REGION_ID or parse_cell_region_id(district_id) is not None:
            raise IngestError(f"{path}: district_id {district_id!r} collides with a reserved region id")
        if district_id in seen:
            raise IngestError(f"{path}: duplicate district_id {district_id!r}")
        seen.add(district_id)
        gtype = geom.get("type")
        if gtype == "Polygon":
            polys = [geom["coordinates"]]
        elif gtype == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise IngestError(f"{path}: district {district_id}: unsupported geometry {gtype!r}")
        rings = []
        for poly in polys:
            for ring in poly:
                arr = np.asarray(ring, dtype=np.float64)[:, ::-1]  # (lon,lat) -> (lat,lon)
                if arr.shape[0] >= 2 and np.array_equal(arr[0], arr[-1]):
                    arr = arr[:-1]
                rings.append(np.ascontiguousarray(arr))
        districts.append(District(district_id, str(props.get("name", district_id)), tuple(rings)))
    return districts


# --- antenna assignment ------------------------------------------------------


@dataclass
class AssignmentTable:
    """Each antenna's grid cell and (optional) district, in antenna order."""

    antennas: list[Antenna]
    rows: np.ndarray  # (n,) int32
    cols: np.ndarray  # (n,) int32
    district_ids: list[str | None]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {a.antenna_id: i for i, a in enumerate(self.antennas)}

    def __len__(self) -> int:
        return len(self.antennas)

    def cell_of(self, antenna_id: str) -> tuple[int, int]:
        i = self.index[antenna_id]
        return (int(self.rows[i]), int(self.cols[i]))

    def district_of(self, antenna_id: str) -> str | None:
        return self.district_ids[self.index[antenna_id]]

    def cell_ids(self) -> list[str]:
        """Distinct occupied cell region ids, sorted by (row, col)."""
        pairs = sorted({(int(r), int(c)) for r, c in zip(self.rows, self.cols)})
        return [cell_region_id(r, c) for r, c in pairs]


def assign_antennas(grid: Grid, districts: list[District], antennas: list[Antenna]) -> AssignmentTable:
    """Map each antenna to exactly one grid cell and at most one district.

    Antennas must already be bbox-filtered (ingest's job); any stragglers
    outside the grid raise. Overlapping districts resolve to the first
    match in file order.
    """
    lats = np.array([a.lat for a in antennas], dtype=np.float64)
    lons = np.array([a.lon for a in antennas], dtype=np.float64)
    if len(antennas) == 0:
        return AssignmentTable([], np.zeros(0, np.int32), np.zeros(0, np.int32), [])
    rows, cols = grid.locate_many(lats, lons)
    if (rows < 0).any():
        bad = [antennas[i].antenna_id for i in np.nonzero(rows < 0)[0][:5]]
        raise ValueError(f"antennas outside grid bbox (ingest should have excluded them): {bad}")
    district_ids: list[str | None] = [None] * len(antennas)
    unassigned = np.ones(len(antennas), dtype=bool)
    for district in districts:
        if not unassigned.any():
            break
        hit = district.contains_many(lats, lons) & unassigned
        for i in np.nonzero(hit)[0]:
            district_ids[i] = district.district_id
        unassigned &= ~hit
    return AssignmentTable(list(antennas), rows, cols, district_ids)


# --- aggregation -------------------------------------------------------------


@dataclass
class RegionSeries:
    """Dense per-window activity for one region over the city window axis.

    values[t, w] is the integer sum of counter t over all member antennas'
    records in window w; 0 with presence[w] clear means "no measurement",
    not "measured zero".
    """

    region_id: str
    values: np.ndarray  # (5, n_windows) int64
    presence: np.ndarray  # (n_windows,) bool

    def series(self, activity: ActivityType) -> np.ndarray:
        return self.values[activity.value]

    @property
    def activity(self) -> dict[ActivityType, np.ndarray]:
        return {t: self.values[t.value] for t in ACTIVITY_TYPES}

    @property
    def n_windows(self) -> int:
        return self.values.shape[1]


@dataclass
class AggregateReport:
    unknown_antenna_rows: int = 0
    outside_period_rows: int = 0
    parse: ActivityParseReport = field(default_factory=ActivityParseReport)


def _new_series_map(table: AssignmentTable, config: CityConfig) -> dict[str, RegionSeries]:
    regions = table.cell_ids()
    regions += sorted({d for d in table.district_ids if d is not None})
    regions.append(CITY_REGION_ID)
    w = config.n_windows
    return {
        rid: RegionSeries(rid, np.zeros((5, w), dtype=np.int64), np.zeros(w, dtype=bool))
        for rid in regions
    }


def aggregate(
    records: Iterable[ActivityRecord],
    table: AssignmentTable,
    config: CityConfig,
    report: AggregateReport | None = None,
) -> dict[str, RegionSeries]:
    """Reference aggregation: fold records into per-region series one by one.

    Returns a mapping with one entry per occupied cell ("r:c"), per district
    with antennas, and "city". Records of unknown antennas or outside the
    period are skipped and counted in ``report``. Duplicate
    (antenna, window) pairs among in-period records of known antennas are
    fatal at the end of the fold.

    This is the semantics oracle; ``aggregate_files`` is the fast path and
    must match it exactly.
    """
    if report is None:
        report = AggregateReport()
    out = _new_series_map(table, config)
    city = out[CITY_REGION_ID]
    seen = np.zeros(len(table) * config.n_windows, dtype=bool)
    dup_examples: list[tuple[str, str]] = []
    n_dups = 0
    for rec in records:
        i = table.index.get(rec.antenna_id)
        if i is None:
            report.unknown_antenna_rows += 1
            continue
        widx = config.window_index(rec.window_start)
        if widx is None:
            report.outside_period_rows += 1
            continue
        key = i * config.n_windows + widx
        if seen[key]:
            n_dups += 1
            if len(dup_examples) < 5:
                dup_examples.append((rec.antenna_id, rec.window_start.isoformat()))
            continue
        seen[key] = True
        counters = rec.counters()
        targets = [cell_region_id(int(table.rows[i]), int(table.cols[i]))]
        if table.district_ids[i] is not None:
            targets.append(table.district_ids[i])
        for rid in targets:
            rs = out[rid]
            for t in range(5):
                rs.values[t, widx] += counters[t]
            rs.presence[widx] = True
        for t in range(5):
            city.values[t, widx] += counters[t]
        city.presence[widx] = True
    if n_dups:
        raise DuplicateRecordError(
            f"{n_dups} duplicate (antenna_id, window_start) pairs, e.g. {dup_examples}"
        )
    return out


# Fast path: polars CSV scan + numpy bincount accumulation. Validation
# semantics mirror ingest.parse_activity; falls back to the reference
# parser per file when polars cannot read a malformed file at all.

_TS_FORMATS = [
    "%Y-%m-%dT%H:%M:%SZ",
    "%Y-%m-%d %H:%M:%SZ",
    "%Y-%m-%dT%H:%M:%S+00:00",
    "%Y-%m-%d %H:%M:%S+00:00",
]

_COUNTER_COLS = ACTIVITY_HEADER[2:]


def _read_batches(path: Path, batch_rows: int) -> Iterator[pl.DataFrame]:
    lf = pl.scan_csv(
        path,
        schema_overrides={c: pl.Utf8 for c in ACTIVITY_HEADER},
        low_memory=True,
    )
    yield from lf.collect_batches(chunk_size=batch_rows)


def _validate_batch(df: pl.DataFrame, line_offset: int, report: ActivityParseReport) -> pl.DataFrame:
    """Apply row-level validation to one raw string batch.

    Returns a frame with columns: epoch_s (int64), antenna_id, and the five
    counters as int64, containing only accepted rows.
    """
    if df.columns != ACTIVITY_HEADER:
        raise IngestError(f"activity.csv: bad header {df.columns!r}, expected {ACTIVITY_HEADER!r}")
    # canonical shapes first; the multi-format / stripped retries below only
    # run when a batch actually contains nonconforming rows, so conformant
    # files never pay for the lenient paths
    df = df.with_columns(
        pl.col("window_start").str.to_datetime(_TS_FORMATS[0], strict=False,
                                               time_unit="us").alias("_ts"),
        *[pl.col(c).cast(pl.Int64, strict=False).alias(f"_i_{c}")
          for c in _COUNTER_COLS],
        pl.col("antenna_id").str.strip_chars().alias("antenna_id"),
    )
    if df["_ts"].null_count():
        ts = pl.coalesce(
            pl.col("_ts"),
            *[pl.col("window_start").str.strip_chars().str.to_datetime(
                f, strict=False, time_unit="us") for f in _TS_FORMATS]
        )
        df = df.with_columns(ts.alias("_ts"))
    retry = [c for c in _COUNTER_COLS if df[f"_i_{c}"].null_count()]
    if retry:
        df = df.with_columns(
            *[pl.coalesce(pl.col(f"_i_{c}"),
                          pl.col(c).str.strip_chars().cast(pl.Int64, strict=False)
                          ).alias(f"_i_{c}") for c in retry]
        )
    df = df.drop(_COUNTER_COLS).rename({f"_i_{c}": c for c in _COUNTER_COLS})
    epoch = (pl.col("_ts").dt.epoch(time_unit="us") // 1_000_000).alias("_epoch_s")
    df = df.with_columns(epoch)

    clean = df.select(
        ok=~pl.any_horizontal(
            pl.col("antenna_id").is_null(), pl.col("antenna_id") == "",
            pl.col("_ts").is_null(), pl.col("_epoch_s") % WINDOW_SECONDS != 0,
            *[pl.col(c).is_null() | (pl.col(c) < 0) for c in _COUNTER_COLS],
        ).any()
    ).item()
    if clean:
        report.accepted += df.height
        return df.select(["antenna_id", "_epoch_s"] + _COUNTER_COLS)

    bad_id = pl.col("antenna_id").is_null() | (pl.col("antenna_id") == "")
    bad_ts = pl.col("_ts").is_null()
    unaligned = pl.col("_epoch_s") % WINDOW_SECONDS != 0
    bad_counter = pl.any_horizontal([pl.col(c).is_null() for c in _COUNTER_COLS])
    negative = pl.any_horizontal([pl.col(c) < 0 for c in _COUNTER_COLS])

    # first matching reason wins, mirroring the reference parser's order
    reason = (
        pl.when(bad_id).then(pl.lit("empty antenna_id"))
        .when(bad_ts).then(pl.lit("unparseable UTC timestamp"))
        .when(unaligned).then(pl.lit("unaligned window"))
        .when(bad_counter).then(pl.lit("non-integer counter"))
        .when(negative).then(pl.lit("negative counter"))
        .otherwise(pl.lit(None))
        .alias("_reject")
    )
    df = df.with_row_index("_row").with_columns(reason)
    rejects = df.filter(pl.col("_reject").is_not_null()).select("_row", "_reject")
    for row_i, why in rejects.iter_rows():
        report.rejected.append(RowIssue(line_offset + int(row_i), str(why)))
    ok = df.filter(pl.col("_reject").is_null())
    report.accepted += ok.height
    return ok.select(["antenna_id", "_epoch_s"] + _COUNTER_COLS)


class _Accumulator:
    """Bincount-based integer aggregation into cell/district/city arrays.

    Float64 bincount sums stay exact below 2**53 per (region, window); city
    series are accumulated directly from rows so conservation tests compare
    two independently computed sides.
    """

    def __init__(self, table: AssignmentTable, config: CityConfig):
        self.table = table
        self.config = config
        self.w = config.n_windows
        cell_ids = table.cell_ids()
        self.cell_ids = cell_ids
        cell_lookup = {cid: i for i, cid in enumerate(cell_ids)}
        self.cell_code = np.array(
            [cell_lookup[cell_region_id(int(r), int(c))] for r, c in zip(table.rows, table.cols)],
            dtype=np.int64,
        )
        self.district_ids = sorted({d for d in table.district_ids if d is not None})
        district_lookup = {d: i for i, d in enumerate(self.district_ids)}
        self.district_code = np.array(
            [district_lookup.get(d, -1) if d is not None else -1 for d in table.district_ids],
            dtype=np.int64,
        )
        self.cells = np.zeros((5, len(cell_ids) * self.w))
        self.cells_touch = np.zeros(len(cell_ids) * self.w)
        self.districts = np.zeros((5, len(self.district_ids) * self.w))
        self.districts_touch = np.zeros(len(self.district_ids) * self.w)
        self.city = np.zeros((5, self.w))
        self.city_touch = np.zeros(self.w)
        self.seen = np.zeros(len(table) * self.w, dtype=bool)
        self.dup_examples: list[tuple[str, str]] = []
        self.n_dups = 0
        self.report = AggregateReport()

    def add(self, aidx: np.ndarray, widx: np.ndarray, counters: np.ndarray, antenna_ids=None) -> None:
        """Fold one batch: aidx/widx (n,) int64, counters (n, 5) int64."""
        key = aidx * self.w + widx
        order = np.argsort(key, kind="stable")
        sorted_key = key[order]
        dup_sorted = np.zeros(len(key), dtype=bool)
        dup_sorted[1:] = sorted_key[1:] == sorted_key[:-1]
        dup = np.zeros(len(key), dtype=bool)
        dup[order] = dup_sorted
        dup |= self.seen[key]
        if dup.any():
            self.n_dups += int(dup.sum())
            if antenna_ids is not None and len(self.dup_examples) < 5:
                for i in np.nonzero(dup)[0][: 5 - len(self.dup_examples)]:
                    ts = self.config.window_start_utc(int(widx[i])).isoformat()
                    self.dup_examples.append((str(antenna_ids[i]), ts))
            keep = ~dup
            aidx, widx, counters, key = aidx[keep], widx[keep], counters[keep], key[keep]
        self.seen[key] = True

        ckey = self.cell_code[aidx] * self.w + widx
        self.cells_touch += np.bincount(ckey, minlength=self.cells_touch.size)
        for t in range(5):
            self.cells[t] += np.bincount(ckey, weights=counters[:, t], minlength=self.cells.shape[1])
        dcode = self.district_code[aidx]
        dmask = dcode >= 0
        if dmask.any():
            dkey = dcode[dmask] * self.w + widx[dmask]
            self.districts_touch += np.bincount(dkey, minlength=self.districts_touch.size)
            for t in range(5):
                self.districts[t] += np.bincount(
                    dkey, weights=counters[dmask, t], minlength=self.districts.shape[1]
                )
        self.city_touch += np.bincount(widx, minlength=self.w)
        for t in range(5):
            self.city[t] += np.bincount(widx, weights=counters[:, t], minlength=self.w)

    def finish(self) -> dict[str, RegionSeries]:
        if self.n_dups:
            raise DuplicateRecordError(
                f"{self.n_dups} duplicate (antenna_id, window_start) pairs, e.g. {self.dup_examples}"
            )
        out: dict[str, RegionSeries] = {}
        for i, cid in enumerate(self.cell_ids):
            sl = slice(i * self.w, (i + 1) * self.w)
            out[cid] = RegionSeries(cid, np.rint(self.cells[:, sl]).astype(np.int64),
                                    self.cells_touch[sl] > 0)
        for i, did in enumerate(self.district_ids):
            sl = slice(i * self.w, (i + 1) * self.w)
            out[did] = RegionSeries(did, np.rint(self.districts[:, sl]).astype(np.int64),
                                    self.districts_touch[sl] > 0)
        out[CITY_REGION_ID] = RegionSeries(CITY_REGION_ID, np.rint(self.city).astype(np.int64),
                                           self.city_touch > 0)
        return out


def aggregate_files(
    paths: list[Path] | list[str],
    table: AssignmentTable,
    config: CityConfig,
    report: AggregateReport | None = None,
    batch_rows: int = 2_000_000,
) -> dict[str, RegionSeries]:
    """Aggregate activity CSV shards with the vectorized path.

    Semantics match :func:`aggregate` over :func:`ingest.parse_activity`
    for contract-conformant files (no blank lines, no quoted multiline
    fields, decimal counters); any file polars cannot read structurally
    (ragged lines, bad encoding) is re-parsed with the row-level
    reference parser instead.
    """
    if report is None:
        report = AggregateReport()
    acc = _Accumulator(table, config)
    ant_ids = pl.Series("antenna_id", [a.antenna_id for a in table.antennas])
    ant_idx = pl.Series("aidx", np.arange(len(table), dtype=np.int64))
    start_s = int(config.start_utc.timestamp())

    for path in paths:
        path = Path(path)
        consumed = 0
        try:
            line_no = 2  # first data line
            for raw in _read_batches(path, batch_rows):
                ok = _validate_batch(raw, line_no, report.parse)
                line_no += raw.height
                consumed += 1
                if ok.height == 0:
                    continue
                ok = ok.with_columns(
                    pl.col("antenna_id").replace_strict(ant_ids, ant_idx, default=-1,
                                                        return_dtype=pl.Int64).alias("_aidx")
                )
                aidx = ok["_aidx"].to_numpy()
                epoch = ok["_epoch_s"].to_numpy()
                widx = (epoch - start_s) // WINDOW_SECONDS
                unknown = aidx < 0
                outside = (~unknown) & ((widx < 0) | (widx >= config.n_windows))
                report.unknown_antenna_rows += int(unknown.sum())
                report.outside_period_rows += int(outside.sum())
                keep = ~(unknown | outside)
                if not keep.any():
                    continue
                counters = np.stack([ok[c].to_numpy() for c in _COUNTER_COLS], axis=1)
                acc.add(aidx[keep].astype(np.int64), widx[keep].astype(np.int64),
                        counters[keep], ok["antenna_id"].to_numpy()[keep])
        except (pl.exceptions.PolarsError, UnicodeDecodeError) as exc:
            if consumed:
                # partially accumulated; restarting the file would double count
                raise IngestError(f"{path}: unreadable past row batch {consumed}: {exc}") from exc
            # structurally unreadable for the columnar reader: recover row by row
            sub = ActivityParseReport()
            with open(path, encoding="utf-8", errors="replace", newline="") as f:
                for rec in parse_activity(f, sub):
                    i = table.index.get(rec.antenna_id)
                    if i is None:
                        report.unknown_antenna_rows += 1
                        continue
                    widx_one = config.window_index(rec.window_start)
                    if widx_one is None:
                        report.outside_period_rows += 1
                        continue
                    acc.add(np.array([i], dtype=np.int64), np.array([widx_one], dtype=np.int64),
                            np.array([rec.counters()], dtype=np.int64), [rec.antenna_id])
            report.parse.merge(sub)
    return acc.finish()
