"""Build and read the persisted artifact store.

A store directory holds one subdirectory per city:

    STORE/{city}/manifest.json        inputs, config, params, digests
                 meta.json            city metadata for clients
                 regions.json         region registry with geometry
                 series/              per (region, type, resolution)
                 profiles/            per (region, type, raw|norm)
                 residuals/           per (region, type)
                 events/              per (region, type), JSON lines
                 clusters/            per k
                 density/             per metric and type (and type pair)

Building happens in two stages mirroring the CLI: ingest (aggregation into
series + registry) and compute (all derived analytics). Each stage
assembles a fresh city directory in a temp sibling and swaps it in, so a
failed build leaves either the previous state or nothing. Rebuilding from
unchanged inputs is byte-identical; store_version is derived from content.
"""

from __future__ import annotations

import hashlib
import logging
import os
import shutil
import tempfile
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import __version__, jsonio
from .clusters import ClusterModel, build_features, kmeans
from .density import ratio_map, volume_map
from .events import (
    DEFAULT_MERGE_GAP,
    DEFAULT_MIN_DURATION,
    DEFAULT_THRESHOLD_Z,
    detect,
)
from .ingest import (
    ACTIVITY_TYPES,
    ActivityType,
    CityConfig,
    IngestError,
    activity_shards,
    parse_antennas,
)
from .profiles import (
    RESOLUTIONS,
    WeeklyProfile,
    local_calendar,
    normalize,
    resample,
    residuals,
    typical_week,
)
from .spatial import (
    CITY_REGION_ID,
    AggregateReport,
    Grid,
    RegionSeries,
    aggregate_files,
    assign_antennas,
    build_grid,
    cell_region_id,
    load_districts,
    parse_cell_region_id,
)

log = logging.getLogger("citypulse.store")

DEFAULT_KS = (2, 3, 4, 5, 6, 7, 8)


class StoreError(Exception):
    """A store build or read failed validation."""


@dataclass(frozen=True)
class ComputeParams:
    threshold_z: float = DEFAULT_THRESHOLD_Z
    min_duration: int = DEFAULT_MIN_DURATION
    merge_gap: int = DEFAULT_MERGE_GAP
    ks: tuple[int, ...] = DEFAULT_KS
    types: tuple[ActivityType, ...] = ACTIVITY_TYPES  # cluster feature types
    exclude_weeks: tuple[str, ...] = ()
    seed: int = 0

    def to_json_dict(self) -> dict:
        return {
            "threshold_z": self.threshold_z,
            "min_duration": self.min_duration,
            "merge_gap": self.merge_gap,
            "ks": list(self.ks),
            "types": [t.name for t in self.types],
            "exclude_weeks": list(self.exclude_weeks),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ComputeParams":
        return cls(
            threshold_z=float(obj["threshold_z"]),
            min_duration=int(obj["min_duration"]),
            merge_gap=int(obj["merge_gap"]),
            ks=tuple(int(k) for k in obj["ks"]),
            types=tuple(ActivityType[n] for n in obj["types"]),
            exclude_weeks=tuple(obj["exclude_weeks"]),
            seed=int(obj["seed"]),
        )


def object_key(region_id: str) -> str:
    """URL-safe file-name stem for a region id ("5:5" -> "5%3A5")."""
    return urllib.parse.quote(region_id, safe="")


def _iso(ts) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _store_version(objects: Mapping[str, str]) -> int:
    digest = hashlib.sha256(jsonio.dump_bytes(dict(sorted(objects.items()))))
    return int.from_bytes(digest.digest()[:6], "big")


def _series_region_key(relpath: str) -> str | None:
    """Region key from a series file path; None for non-series paths.

    Type names contain underscores, so the suffix is matched against the
    full known (type, resolution) set instead of split on "_".
    """
    if not (relpath.startswith("series/") and relpath.endswith(".json")):
        return None
    stem = relpath[len("series/"):-len(".json")]
    for t in ACTIVITY_TYPES:
        for res in RESOLUTIONS:
            suffix = f"_{t.name}_{res}"
            if stem.endswith(suffix):
                return stem[: -len(suffix)]
    return None


def _region_sort_key(region_id: str):
    cell = parse_cell_region_id(region_id)
    if region_id == CITY_REGION_ID:
        return (0, 0, 0, "")
    if cell is not None:
        return (2, cell[0], cell[1], "")
    return (1, 0, 0, region_id)


class _CityWriter:
    """Accumulates artifact files plus their digests under one directory."""

    def __init__(self, root: Path):
        self.root = root
        self.objects: dict[str, str] = {}

    def write(self, relpath: str, data: bytes) -> None:
        path = self.root / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(data)
        self.objects[relpath] = hashlib.sha256(data).hexdigest()

    def write_json(self, relpath: str, obj) -> None:
        self.write(relpath, jsonio.dump_bytes(obj))

    def link_existing(self, src_root: Path, digests: Mapping[str, str]) -> None:
        for rel, digest in digests.items():
            dst = self.root / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            os.link(src_root / rel, dst)
            self.objects[rel] = digest


def _swap_in(tmp: Path, final: Path) -> None:
    if final.exists():
        old = final.with_name(final.name + ".old")
        if old.exists():
            shutil.rmtree(old)
        os.replace(final, old)
        os.replace(tmp, final)
        shutil.rmtree(old)
    else:
        os.replace(tmp, final)


def series_json_dict(series: RegionSeries, activity: ActivityType,
                     resolution: str, config: CityConfig) -> dict:
    """Export one region series at one resolution; absent bins are null."""
    rs = resample(series, activity, resolution, config)
    values = jsonio.int_list(rs.values, absent=~rs.presence)
    return {
        "region_id": rs.region_id,
        "type": activity.name,
        "resolution": resolution,
        "period": [_iso(config.start_utc), _iso(config.end_utc)],
        "step_seconds": rs.step_seconds,
        "keys": list(rs.keys) if rs.keys is not None else None,
        "values": values,
    }


def residuals_json_dict(res) -> dict:
    values = jsonio.quantized_list(res.values, absent=np.isnan(res.values))
    sigma = jsonio.quantized_list(res.sigma, absent=np.isnan(res.sigma))
    return {
        "region_id": res.region_id,
        "type": res.activity.name,
        "values": values,
        "sigma": sigma,
    }


def regions_json_dict(grid: Grid, districts, table, config: CityConfig,
                      occupied: Iterable[str]) -> dict:
    occupied = set(occupied)
    per_cell: dict[str, int] = {}
    per_district: dict[str, int] = {}
    for a in table.antennas:
        rid = cell_region_id(*table.cell_of(a.antenna_id))
        per_cell[rid] = per_cell.get(rid, 0) + 1
        d = table.district_of(a.antenna_id)
        if d is not None:
            per_district[d] = per_district.get(d, 0) + 1
    regions = [{"region_id": CITY_REGION_ID, "kind": "city",
                "n_antennas": len(table.antennas)}]
    for d in districts:
        if d.district_id not in occupied:
            continue
        regions.append({
            "region_id": d.district_id,
            "kind": "district",
            "name": d.name,
            "rings": [[[float(lat), float(lon)] for lat, lon in ring]
                      for ring in d.rings],
            "n_antennas": per_district.get(d.district_id, 0),
        })
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            rid = cell_region_id(r, c)
            if rid not in occupied:
                continue
            lat0, lon0, lat1, lon1 = grid.cell_bounds(r, c)
            clat, clon = grid.cell_center(r, c)
            regions.append({
                "region_id": rid, "kind": "cell", "row": r, "col": c,
                "bounds": [lat0, lon0, lat1, lon1],
                "center": [clat, clon],
                "n_antennas": per_cell.get(rid, 0),
            })
    return {"regions": regions}


def meta_json_dict(config: CityConfig, grid: Grid, n_antennas: int,
                   n_cells: int, n_districts: int) -> dict:
    cal = local_calendar(config)
    return {
        "city_id": config.city_id,
        "config": config.to_json_dict(),
        "period": [_iso(config.start_utc), _iso(config.end_utc)],
        "n_windows": config.n_windows,
        "grid": {
            "n_rows": grid.n_rows,
            "n_cols": grid.n_cols,
            "cell_size_m": grid.cell_size_m,
            "origin": [grid.origin[0], grid.origin[1]],
            "lat_max": grid.lat_max,
            "lon_max": grid.lon_max,
        },
        "types": [t.name for t in ACTIVITY_TYPES],
        "resolutions": list(RESOLUTIONS),
        "week_ids": list(cal.week_ids),
        "n_antennas": n_antennas,
        "n_regions": {"cells": n_cells, "districts": n_districts, "city": 1},
    }


@dataclass
class IngestSummary:
    city_dir: Path | None
    n_antennas: int
    n_regions: int
    activity_rows: int
    rejected_rows: int
    report: AggregateReport
    series: dict[str, RegionSeries] = field(repr=False, default_factory=dict)


def ingest_city(config: CityConfig, data_dir, store_dir, *,
                check_only: bool = False,
                batch_rows: int = 2_000_000) -> IngestSummary:
    """Aggregate one city's input files into a fresh store subdirectory.

    With check_only, runs the full validation pass (including the fatal
    duplicate-key check) but writes nothing.
    """
    data_dir = Path(data_dir)
    store_dir = Path(store_dir)
    antennas_path = data_dir / "antennas.csv"
    if not antennas_path.exists():
        raise IngestError(f"{antennas_path}: missing")
    shard_paths = activity_shards(data_dir)
    districts_path = data_dir / "districts.geojson"

    with open(antennas_path, encoding="utf-8") as f:
        ant = parse_antennas(f, config.bbox)
    for issue in ant.rejected:
        log.warning("antennas.csv line %d: %s", issue.line_no, issue.reason)
    if not ant.antennas:
        raise IngestError("no antennas inside the bbox")

    districts = []
    if districts_path.exists():
        districts = load_districts(districts_path)
    grid = build_grid(config)
    table = assign_antennas(grid, districts, ant.antennas)

    report = AggregateReport()
    series = aggregate_files([str(p) for p in shard_paths], table, config,
                             report, batch_rows=batch_rows)
    for issue in report.parse.rejected[:50]:
        log.warning("activity line %d: %s", issue.line_no, issue.reason)

    summary = IngestSummary(
        city_dir=None,
        n_antennas=len(ant.antennas),
        n_regions=len(series),
        activity_rows=report.parse.accepted,
        rejected_rows=len(report.parse.rejected),
        report=report,
        series=series,
    )
    if check_only:
        return summary

    inputs = {antennas_path.name: _sha256_file(antennas_path)}
    for p in shard_paths:
        inputs[p.name] = _sha256_file(p)
    if districts:
        inputs[districts_path.name] = _sha256_file(districts_path)

    store_dir.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=store_dir, prefix=f".build-{config.city_id}-"))
    try:
        w = _CityWriter(tmp)
        for rid in sorted(series, key=_region_sort_key):
            key = object_key(rid)
            for t in ACTIVITY_TYPES:
                for res in RESOLUTIONS:
                    w.write_json(f"series/{key}_{t.name}_{res}.json",
                                 series_json_dict(series[rid], t, res, config))
        n_cells = sum(1 for rid in series if parse_cell_region_id(rid))
        n_districts = len(series) - n_cells - 1
        w.write_json("meta.json", meta_json_dict(
            config, grid, len(ant.antennas), n_cells, n_districts))
        w.write_json("regions.json", regions_json_dict(
            grid, districts, table, config, series.keys()))
        manifest = {
            "city_id": config.city_id,
            "code_version": __version__,
            "config": config.to_json_dict(),
            "inputs": inputs,
            "ingest": {
                "n_antennas": len(ant.antennas),
                "antennas_rejected": len(ant.rejected),
                "antennas_excluded": len(ant.excluded),
                "activity_rows": report.parse.accepted,
                "rows_rejected": len(report.parse.rejected),
                "unknown_antenna_rows": report.unknown_antenna_rows,
                "outside_period_rows": report.outside_period_rows,
            },
            "params": None,
            "objects": dict(sorted(w.objects.items())),
            "store_version": _store_version(w.objects),
        }
        jsonio.write_json(tmp / "manifest.json", manifest)
        _swap_in(tmp, store_dir / config.city_id)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    summary.city_dir = store_dir / config.city_id
    return summary


def _load_series(city_dir: Path, manifest: dict) -> dict[str, RegionSeries]:
    """Reconstruct region series from the stored 15min exports."""
    config = CityConfig.from_json_dict(manifest["config"])
    n = config.n_windows
    out: dict[str, RegionSeries] = {}
    region_ids = sorted(
        {key for rel in manifest["objects"]
         if (key := _series_region_key(rel)) is not None})
    for key in region_ids:
        rid = urllib.parse.unquote(key)
        values = np.zeros((5, n), dtype=np.int64)
        presence = np.zeros(n, dtype=bool)
        for t in ACTIVITY_TYPES:
            obj = jsonio.load_path(city_dir / f"series/{key}_{t.name}_15min.json")
            col = obj["values"]
            for w, v in enumerate(col):
                if v is not None:
                    values[t.value, w] = v
                    presence[w] = True
        out[rid] = RegionSeries(region_id=rid, values=values, presence=presence)
    return out


def compute_city(store_dir, city_id: str,
                 params: ComputeParams | None = None,
                 series: dict[str, RegionSeries] | None = None) -> Path:
    """Derive and persist all analytics for an ingested city.

    Rewrites the city directory atomically (series files are hard-linked,
    not copied). `series` skips the store read when the caller just built
    them in memory.
    """
    params = params or ComputeParams()
    store_dir = Path(store_dir)
    city_dir = store_dir / city_id
    manifest_path = city_dir / "manifest.json"
    if not manifest_path.exists():
        raise StoreError(f"{city_dir}: not an ingested city (no manifest.json)")
    manifest = jsonio.load_path(manifest_path)
    config = CityConfig.from_json_dict(manifest["config"])
    if series is None:
        series = _load_series(city_dir, manifest)

    grid = build_grid(config)
    exclude = set(params.exclude_weeks)

    tmp = Path(tempfile.mkdtemp(dir=store_dir, prefix=f".build-{city_id}-"))
    try:
        w = _CityWriter(tmp)
        keep = {rel: digest for rel, digest in manifest["objects"].items()
                if rel.startswith("series/") or rel in ("meta.json", "regions.json")}
        w.link_existing(city_dir, keep)

        norm_profiles: dict[tuple[str, ActivityType], WeeklyProfile] = {}
        for rid in sorted(series, key=_region_sort_key):
            key = object_key(rid)
            for t in ACTIVITY_TYPES:
                raw = typical_week(series[rid], t, config, exclude_weeks=exclude)
                norm = normalize(raw)
                norm_profiles[(rid, t)] = norm
                w.write_json(f"profiles/{key}_{t.name}_raw.json", raw.to_json_dict())
                w.write_json(f"profiles/{key}_{t.name}_norm.json", norm.to_json_dict())
                res = residuals(series[rid], t, raw, config, exclude_weeks=exclude)
                w.write_json(f"residuals/{key}_{t.name}.json",
                             residuals_json_dict(res))
                events = detect(res, config, threshold_z=params.threshold_z,
                                min_duration=params.min_duration,
                                merge_gap=params.merge_gap)
                lines = b"".join(jsonio.dump_bytes(e.to_json_dict()) + b"\n"
                                 for e in events)
                w.write(f"events/{key}_{t.name}.jsonl", lines)

        cell_profiles = {kv: p for kv, p in norm_profiles.items()
                         if parse_cell_region_id(kv[0]) is not None}
        vectors, skipped = build_features(cell_profiles, params.types)
        for rid in skipped:
            log.info("cluster features: skipping %s (empty profile)", rid)
        for k in params.ks:
            if not 1 <= k <= len(vectors):
                raise StoreError(
                    f"k={k} infeasible with {len(vectors)} usable cells")
            model = kmeans(vectors, k, seed=params.seed, types=params.types)
            w.write_json(f"clusters/k{k}.json", model.to_json_dict())

        for t in ACTIVITY_TYPES:
            vm = volume_map(series, grid, t, config)
            w.write_json(f"density/volume_{t.name}.json", vm.to_json_dict())
            rm = ratio_map(series, grid, t, config)
            w.write_json(f"density/ratio_{t.name}.json", rm.to_json_dict())
            for o in ACTIVITY_TYPES:
                if o is t:
                    continue
                pm = ratio_map(series, grid, t, config, versus=o)
                w.write_json(f"density/ratio_{t.name}_vs_{o.name}.json",
                             pm.to_json_dict())

        manifest = dict(manifest)
        manifest["params"] = params.to_json_dict()
        manifest["objects"] = dict(sorted(w.objects.items()))
        manifest["store_version"] = _store_version(w.objects)
        jsonio.write_json(tmp / "manifest.json", manifest)
        _swap_in(tmp, city_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return city_dir


def build_store(config: CityConfig, data_dir, store_dir,
                params: ComputeParams | None = None,
                batch_rows: int = 2_000_000) -> Path:
    """Full pipeline: ingest + compute, leaving a complete city directory."""
    summary = ingest_city(config, data_dir, store_dir, batch_rows=batch_rows)
    return compute_city(store_dir, config.city_id, params,
                        series=summary.series)


@dataclass
class CityStore:
    """Read-side handle on one built city."""

    city_dir: Path
    manifest: dict
    config: CityConfig
    store_version: int

    @classmethod
    def open(cls, city_dir) -> "CityStore":
        city_dir = Path(city_dir)
        manifest_path = city_dir / "manifest.json"
        if not manifest_path.exists():
            raise StoreError(f"{city_dir}: no manifest.json")
        manifest = jsonio.load_path(manifest_path)
        return cls(city_dir=city_dir, manifest=manifest,
                   config=CityConfig.from_json_dict(manifest["config"]),
                   store_version=int(manifest["store_version"]))

    def has_object(self, relpath: str) -> bool:
        return relpath in self.manifest["objects"]

    def read_object(self, relpath: str) -> bytes:
        if not self.has_object(relpath):
            raise KeyError(relpath)
        with open(self.city_dir / relpath, "rb") as f:
            return f.read()

    def region_ids(self) -> list[str]:
        keys = {key for rel in self.manifest["objects"]
                if (key := _series_region_key(rel)) is not None}
        return sorted((urllib.parse.unquote(k) for k in keys),
                      key=_region_sort_key)

    def cluster_ks(self) -> list[int]:
        ks = []
        for rel in self.manifest["objects"]:
            if rel.startswith("clusters/k") and rel.endswith(".json"):
                ks.append(int(rel[len("clusters/k"):-len(".json")]))
        return sorted(ks)

    def load_cluster_model(self, k: int) -> ClusterModel:
        return ClusterModel.from_json_dict(
            jsonio.loads(self.read_object(f"clusters/k{k}.json")))


def open_store(store_dir) -> dict[str, CityStore]:
    """Open every built city under a store directory."""
    store_dir = Path(store_dir)
    if not store_dir.is_dir():
        raise StoreError(f"{store_dir}: not a directory")
    cities = {}
    for child in sorted(store_dir.iterdir()):
        if child.name.startswith(".") or not child.is_dir():
            continue
        if (child / "manifest.json").exists():
            cities[child.name] = CityStore.open(child)
    if not cities:
        raise StoreError(f"{store_dir}: no built cities found")
    return cities
