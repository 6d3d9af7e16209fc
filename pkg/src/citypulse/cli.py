"""Command-line entry points.

Exit codes: 0 success, 1 validation or build failure, 2 usage error
(argparse's own convention). Log verbosity comes from CITYPULSE_LOG
(error|warn|info|debug, default warn).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .ingest import ActivityType, IngestError, load_city_config
from .store import (
    ComputeParams,
    DEFAULT_KS,
    StoreError,
    compute_city,
    ingest_city,
    open_store,
)

log = logging.getLogger("citypulse")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging() -> None:
    name = os.environ.get("CITYPULSE_LOG", "warn").lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        print(f"citypulse: ignoring CITYPULSE_LOG={name!r} "
              f"(expected one of {sorted(_LOG_LEVELS)})", file=sys.stderr)
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_types(text: str) -> tuple[ActivityType, ...]:
    out = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            out.append(ActivityType[name])
        except KeyError:
            raise ValueError(f"unknown activity type {name!r}, expected one of "
                             f"{[t.name for t in ActivityType]}")
    if not out:
        raise ValueError("no activity types given")
    return tuple(out)


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"--k expects integers, got {text!r}")
    if not ks:
        raise ValueError("--k expects at least one value")
    return ks


def _single_city(store_dir, chosen: str | None) -> str:
    cities = open_store(store_dir)
    if chosen is not None:
        if chosen not in cities:
            raise StoreError(f"city {chosen!r} not in store "
                             f"(have {sorted(cities)})")
        return chosen
    if len(cities) == 1:
        return next(iter(cities))
    raise StoreError(f"store holds several cities {sorted(cities)}; "
                     "pick one with --city")


def cmd_ingest(args) -> int:
    config = load_city_config(args.city)
    summary = ingest_city(config, args.data, args.out, check_only=args.check)
    action = "validated" if args.check else "ingested"
    print(f"{action} {config.city_id}: {summary.n_antennas} antennas, "
          f"{summary.activity_rows} rows into {summary.n_regions} regions "
          f"({summary.rejected_rows} rows rejected, "
          f"{summary.report.unknown_antenna_rows} unknown-antenna, "
          f"{summary.report.outside_period_rows} outside period)")
    return 0


def cmd_compute(args) -> int:
    params = ComputeParams(
        ks=_parse_ks(args.k),
        types=_parse_types(args.types),
        exclude_weeks=tuple(w.strip() for w in args.exclude_weeks.split(",")
                            if w.strip()) if args.exclude_weeks else (),
    )
    city_id = _single_city(args.store, args.city)
    city_dir = compute_city(args.store, city_id, params)
    print(f"computed {city_id}: ks={list(params.ks)} -> {city_dir}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    serve(args.store, port=args.port, host=args.host, static_dir=args.static)
    return 0


def cmd_synth(args) -> int:
    import json

    from .synth import ScenarioSpec, write_scenario

    with open(args.spec, encoding="utf-8") as f:
        spec = ScenarioSpec.from_json_dict(json.load(f))
    truth = write_scenario(spec, args.out)
    print(f"wrote scenario {spec.city.city_id} ({spec.n_antennas} antennas, "
          f"{spec.city.n_windows} windows, {len(truth['events'])} events) "
          f"to {args.out}")
    return 0


def cmd_export(args) -> int:
    if args.format != "json":
        raise ValueError(f"unsupported format {args.format!r} (only json)")
    city_id = _single_city(args.store, args.city)
    store = open_store(args.store)[city_id]
    if args.what == "clusters":
        rel = f"clusters/k{args.k}.json"
        if not store.has_object(rel):
            raise StoreError(f"no model for k={args.k}; "
                             f"available: {store.cluster_ks()}")
    elif args.what in ("meta", "regions", "manifest"):
        rel = f"{args.what}.json"
    else:
        raise ValueError(f"unsupported --what {args.what!r}")
    if rel == "manifest.json":
        data = (Path(store.city_dir) / rel).read_bytes()
    else:
        data = store.read_object(rel)
    sys.stdout.write(data.decode("utf-8"))
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citypulse",
        description="Grid analytics over aggregated mobile-network activity")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="aggregate input CSVs into a store")
    p.add_argument("--city", required=True, help="city.json config")
    p.add_argument("--data", required=True,
                   help="directory with antennas.csv and activity CSVs")
    p.add_argument("--out", required=True, help="store directory")
    p.add_argument("--check", action="store_true",
                   help="validate only, write nothing")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("compute", help="derive analytics for an ingested city")
    p.add_argument("--store", required=True)
    p.add_argument("--city", help="city id (default: the store's only city)")
    p.add_argument("--k", default=",".join(str(k) for k in DEFAULT_KS),
                   help="cluster counts, comma separated (default %(default)s)")
    p.add_argument("--types",
                   default=",".join(t.name for t in ActivityType),
                   help="cluster feature types (default all five)")
    p.add_argument("--exclude-weeks", default="",
                   help="ISO week ids to drop from profiles, comma separated")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("serve", help="serve a built store over HTTP")
    p.add_argument("--store", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="directory with a web UI to mount at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="generate a synthetic city")
    p.add_argument("--spec", required=True, help="scenario.json")
    p.add_argument("--out", required=True, help="output data directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("export", help="print a store artifact to stdout")
    p.add_argument("--store", required=True)
    p.add_argument("--city", help="city id (default: the store's only city)")
    p.add_argument("--what", required=True,
                   choices=["clusters", "meta", "regions", "manifest"])
    p.add_argument("--format", default="json")
    p.add_argument("--k", type=int, default=5, help="model to export")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IngestError, StoreError, ValueError, OSError) as exc:
        print(f"citypulse: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
