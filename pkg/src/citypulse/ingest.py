"""Parsing and validation of antenna metadata and raw activity CSV exports.

Input contracts:

- ``antennas.csv``: header ``antenna_id,lat,lon``
- ``activity.csv`` (optionally sharded as ``activity-*.csv``): header
  ``antenna_id,window_start,calls,sms,data_down,data_up,data_requests``
  with ``window_start`` in ISO-8601 UTC on a 15-minute boundary
- ``city.json``: city id, bounding box, cell size, analysis period, timezone

Timestamps are stored in UTC throughout; conversion to city-local time only
happens when weekly profiles are computed.
"""

from __future__ import annotations

import csv
import enum
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator
from zoneinfo import ZoneInfo

WINDOW_SECONDS = 900
WINDOWS_PER_DAY = 96

ANTENNA_HEADER = ["antenna_id", "lat", "lon"]
ACTIVITY_HEADER = [
    "antenna_id",
    "window_start",
    "calls",
    "sms",
    "data_down",
    "data_up",
    "data_requests",
]


class IngestError(ValueError):
    """Fatal ingest failure (bad header, duplicate keys, invalid config)."""


class ActivityType(enum.Enum):
    """The five activity counters, in the pinned ordinal order.

    The order matters: feature vectors concatenate per-type blocks in this
    order and ratio maps sum over it.
    """

    CALLS = 0
    SMS = 1
    DATA_DOWN = 2
    DATA_UP = 3
    DATA_REQUESTS = 4

    @classmethod
    def from_name(cls, name: str) -> "ActivityType":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown activity type {name!r}") from None


ACTIVITY_TYPES: tuple[ActivityType, ...] = tuple(ActivityType)


@dataclass(frozen=True)
class Antenna:
    antenna_id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class ActivityRecord:
    """One antenna, one 15-minute window, five non-negative counters."""

    antenna_id: str
    window_start: datetime
    calls: int
    sms: int
    data_down: int
    data_up: int
    data_requests: int

    def counters(self) -> tuple[int, int, int, int, int]:
        return (self.calls, self.sms, self.data_down, self.data_up, self.data_requests)

    def to_csv_row(self) -> str:
        ts = self.window_start.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return ",".join(
            [self.antenna_id, ts] + [str(c) for c in self.counters()]
        )


@dataclass(frozen=True)
class CityConfig:
    """Analysis configuration for one city.

    ``bbox`` is (lat_min, lon_min, lat_max, lon_max) in WGS84 degrees.
    ``period`` is the half-open UTC date span [period_start, period_end).
    """

    city_id: str
    bbox: tuple[float, float, float, float]
    cell_size_m: float
    period_start: date
    period_end: date
    timezone: str

    def __post_init__(self) -> None:
        lat_min, lon_min, lat_max, lon_max = self.bbox
        if not (lat_min < lat_max and lon_min < lon_max):
            raise IngestError(f"degenerate bbox {self.bbox}")
        if not (-90 <= lat_min and lat_max <= 90 and -180 <= lon_min and lon_max <= 180):
            raise IngestError(f"bbox out of WGS84 range: {self.bbox}")
        if self.cell_size_m <= 0:
            raise IngestError(f"cell_size_m must be positive, got {self.cell_size_m}")
        if self.period_end < self.period_start + timedelta(days=7):
            raise IngestError("period must span at least one full week")
        try:
            ZoneInfo(self.timezone)
        except Exception as exc:
            raise IngestError(f"unknown timezone {self.timezone!r}") from exc

    @property
    def tzinfo(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)

    @property
    def start_utc(self) -> datetime:
        d = self.period_start
        return datetime(d.year, d.month, d.day, tzinfo=timezone.utc)

    @property
    def end_utc(self) -> datetime:
        d = self.period_end
        return datetime(d.year, d.month, d.day, tzinfo=timezone.utc)

    @property
    def n_windows(self) -> int:
        return (self.period_end - self.period_start).days * WINDOWS_PER_DAY

    def window_start_utc(self, index: int) -> datetime:
        if not 0 <= index < self.n_windows:
            raise IndexError(f"window index {index} out of range 0..{self.n_windows - 1}")
        return self.start_utc + timedelta(seconds=index * WINDOW_SECONDS)

    def window_index(self, ts: datetime) -> int | None:
        """Window index of an aligned UTC timestamp, or None outside the period."""
        delta = int((ts - self.start_utc).total_seconds())
        if delta % WINDOW_SECONDS != 0:
            raise ValueError(f"timestamp {ts.isoformat()} not on a 15-minute boundary")
        idx = delta // WINDOW_SECONDS
        return idx if 0 <= idx < self.n_windows else None

    def in_bbox(self, lat: float, lon: float) -> bool:
        lat_min, lon_min, lat_max, lon_max = self.bbox
        return lat_min <= lat <= lat_max and lon_min <= lon <= lon_max

    def to_json_dict(self) -> dict:
        return {
            "city_id": self.city_id,
            "bbox": list(self.bbox),
            "cell_size_m": self.cell_size_m,
            "period_start": self.period_start.isoformat(),
            "period_end": self.period_end.isoformat(),
            "timezone": self.timezone,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CityConfig":
        missing = {"city_id", "bbox", "cell_size_m", "period_start", "period_end", "timezone"} - set(obj)
        if missing:
            raise IngestError(f"city.json missing keys: {sorted(missing)}")
        bbox = obj["bbox"]
        if not (isinstance(bbox, (list, tuple)) and len(bbox) == 4):
            raise IngestError("city.json bbox must be a 4-element array")
        return cls(
            city_id=str(obj["city_id"]),
            bbox=tuple(float(v) for v in bbox),
            cell_size_m=float(obj["cell_size_m"]),
            period_start=date.fromisoformat(obj["period_start"]),
            period_end=date.fromisoformat(obj["period_end"]),
            timezone=str(obj["timezone"]),
        )


def load_city_config(path: str | Path) -> CityConfig:
    with open(path, encoding="utf-8") as f:
        return CityConfig.from_json_dict(json.load(f))


@dataclass(frozen=True)
class RowIssue:
    line_no: int
    reason: str


@dataclass
class AntennaParseResult:
    antennas: list[Antenna]
    rejected: list[RowIssue] = field(default_factory=list)
    excluded: list[RowIssue] = field(default_factory=list)  # valid rows outside the bbox

    @property
    def n_rows(self) -> int:
        return len(self.antennas) + len(self.rejected) + len(self.excluded)


@dataclass
class ActivityParseReport:
    """Accepted/rejected accounting for one activity parse.

    accepted + len(rejected) always equals the number of data rows seen.
    """

    accepted: int = 0
    rejected: list[RowIssue] = field(default_factory=list)

    def merge(self, other: "ActivityParseReport") -> None:
        self.accepted += other.accepted
        self.rejected.extend(other.rejected)


def _check_header(row: list[str] | None, expected: list[str], what: str) -> None:
    if row is None:
        raise IngestError(f"{what}: empty file, missing header")
    got = [c.strip().lstrip("﻿") for c in row]
    if got != expected:
        raise IngestError(f"{what}: bad header {got!r}, expected {expected!r}")


def parse_antennas(
    stream: Iterable[str] | IO[str],
    bbox: tuple[float, float, float, float] | None = None,
) -> AntennaParseResult:
    """Parse an ``antennas.csv`` stream.

    Malformed rows are rejected with their line number; rows whose
    coordinates fall outside ``bbox`` (when given) are excluded and
    reported, not silently dropped. Duplicate antenna ids are fatal.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    _check_header(header, ANTENNA_HEADER, "antennas.csv")

    result = AntennaParseResult(antennas=[])
    seen: dict[str, int] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            result.rejected.append(RowIssue(line_no, f"expected 3 fields, got {len(row)}"))
            continue
        antenna_id = row[0].strip()
        if not antenna_id:
            result.rejected.append(RowIssue(line_no, "empty antenna_id"))
            continue
        try:
            lat, lon = float(row[1]), float(row[2])
        except ValueError:
            result.rejected.append(RowIssue(line_no, f"non-numeric coordinate {row[1]!r},{row[2]!r}"))
            continue
        if not (-90 <= lat <= 90 and -180 <= lon <= 180):
            result.rejected.append(RowIssue(line_no, f"coordinate out of range ({lat}, {lon})"))
            continue
        if antenna_id in seen:
            raise IngestError(
                f"duplicate antenna_id {antenna_id!r} at line {line_no} (first at line {seen[antenna_id]})"
            )
        seen[antenna_id] = line_no
        if bbox is not None:
            lat_min, lon_min, lat_max, lon_max = bbox
            if not (lat_min <= lat <= lat_max and lon_min <= lon <= lon_max):
                result.excluded.append(RowIssue(line_no, f"{antenna_id}: outside bbox ({lat}, {lon})"))
                continue
        result.antennas.append(Antenna(antenna_id, lat, lon))
    return result


_TS_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})(?:\.0+)?(Z|\+00:00)$")


def parse_window_start(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp and check 15-minute alignment."""
    m = _TS_RE.match(text.strip())
    if m is None:
        raise ValueError(f"unparseable UTC timestamp {text!r}")
    y, mo, d, h, mi, s = (int(g) for g in m.groups()[:6])
    ts = datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc)
    if mi % 15 != 0 or s != 0:
        raise ValueError("unaligned window")
    return ts


def _parse_counter(text: str) -> int:
    # strict decimal only: int() would accept "5_0" or unicode digits
    s = text.strip()
    body = s[1:] if s[:1] in ("-", "+") else s
    if not body or not (body.isascii() and body.isdigit()):
        raise ValueError(f"not a decimal integer: {text!r}")
    return int(s)


def parse_activity(
    stream: Iterable[str] | IO[str],
    report: ActivityParseReport | None = None,
) -> Iterator[ActivityRecord]:
    """Stream-parse an ``activity.csv``, yielding records in file order.

    Memory use is constant in the file length. Rows failing validation
    (unaligned window, negative counter, malformed fields) are recorded in
    ``report`` with line numbers and skipped; they never abort the parse.
    Duplicate (antenna_id, window_start) detection is not done here -- it
    belongs to the merge step that owns the combined index (see
    ``spatial.aggregate``).
    """
    if report is None:
        report = ActivityParseReport()
    reader = csv.reader(stream)
    header = next(reader, None)
    _check_header(header, ACTIVITY_HEADER, "activity.csv")

    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 7:
            report.rejected.append(RowIssue(line_no, f"expected 7 fields, got {len(row)}"))
            continue
        antenna_id = row[0].strip()
        if not antenna_id:
            report.rejected.append(RowIssue(line_no, "empty antenna_id"))
            continue
        try:
            ts = parse_window_start(row[1])
        except ValueError as exc:
            report.rejected.append(RowIssue(line_no, str(exc)))
            continue
        try:
            counters = [_parse_counter(c) for c in row[2:7]]
        except ValueError:
            report.rejected.append(RowIssue(line_no, f"non-integer counter in {row[2:7]!r}"))
            continue
        if any(c < 0 for c in counters):
            report.rejected.append(RowIssue(line_no, f"negative counter in {row[2:7]!r}"))
            continue
        report.accepted += 1
        yield ActivityRecord(antenna_id, ts, *counters)


def parse_activity_all(
    stream: Iterable[str] | IO[str],
) -> tuple[list[ActivityRecord], ActivityParseReport]:
    """Eager variant of :func:`parse_activity` for small inputs and tests."""
    report = ActivityParseReport()
    records = list(parse_activity(stream, report))
    return records, report


def activity_shards(data_dir: str | Path) -> list[Path]:
    """Resolve ``activity.csv`` or sharded ``activity-*.csv`` in a data directory."""
    data_dir = Path(data_dir)
    single = data_dir / "activity.csv"
    shards = sorted(data_dir.glob("activity-*.csv"))
    if single.exists() and shards:
        raise IngestError(f"{data_dir}: both activity.csv and activity-*.csv shards present")
    if single.exists():
        return [single]
    if shards:
        return shards
    raise IngestError(f"{data_dir}: no activity.csv or activity-*.csv found")
