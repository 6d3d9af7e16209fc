"""Read-only JSON API over a built store.

Every artifact endpoint returns the stored file bytes verbatim, so served
payloads are byte-identical to the store and trivially safe under
concurrency. The one computed endpoint is cross-city cluster comparison,
which is a pure function of two stored models (the pair set is unbounded,
so it cannot be precomputed). All responses carry an X-Store-Version
header: the city's version, or a combined store version on endpoints not
scoped to one city.
"""

from __future__ import annotations

import hashlib
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import jsonio
from .clusters import compare_models
from .ingest import ActivityType
from .profiles import RESOLUTIONS
from .store import CityStore, object_key, open_store

_STATUS_CODES = {
    400: "bad_request",
    404: "not_found",
    405: "method_not_allowed",
}


def _combined_version(cities: dict[str, CityStore]) -> int:
    payload = jsonio.dump_bytes({c: s.store_version for c, s in cities.items()})
    return int.from_bytes(hashlib.sha256(payload).digest()[:6], "big")


def _parse_utc(text: str) -> datetime | None:
    try:
        ts = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ")
    except ValueError:
        return None
    return ts.replace(tzinfo=timezone.utc)


def create_app(store_dir, static_dir=None) -> FastAPI:
    """Build the service around an immutable store loaded at startup."""
    cities = open_store(store_dir)
    store_version = _combined_version(cities)
    regions_by_city = {c: set(s.region_ids()) for c, s in cities.items()}

    app = FastAPI(title="citypulse", version="1", openapi_url=None)

    def _error(status: int, code: str, message: str,
               version: int | None = None) -> Response:
        body = jsonio.dump_bytes({"error": {"code": code, "message": message}})
        return Response(content=body, status_code=status,
                        media_type="application/json",
                        headers={"X-Store-Version": str(version or store_version)})

    def _artifact(city: CityStore, relpath: str,
                  media_type: str = "application/json") -> Response:
        return Response(content=city.read_object(relpath),
                        media_type=media_type,
                        headers={"X-Store-Version": str(city.store_version)})

    def _json(city: CityStore | None, obj) -> Response:
        version = city.store_version if city else store_version
        return Response(content=jsonio.dump_bytes(obj),
                        media_type="application/json",
                        headers={"X-Store-Version": str(version)})

    def _city(name: str) -> CityStore | Response:
        city = cities.get(name)
        if city is None:
            return _error(404, "city_not_found", f"no built city {name!r}")
        return city

    def _region_check(city: CityStore, name: str, region: str) -> Response | None:
        if region not in regions_by_city[name]:
            return _error(404, "region_not_found",
                          f"city {name!r} has no region {region!r}",
                          city.store_version)
        return None

    def _type_check(city: CityStore, type_name: str | None) -> ActivityType | Response:
        if type_name is None:
            return _error(400, "missing_parameter", "query parameter 'type' is required",
                          city.store_version)
        try:
            return ActivityType[type_name]
        except KeyError:
            return _error(400, "unknown_type",
                          f"{type_name!r} is not one of "
                          f"{[t.name for t in ActivityType]}",
                          city.store_version)

    def _period_check(city: CityStore, from_: str | None,
                      to: str | None) -> Response | None:
        """The store holds full-period artifacts only; reject other ranges."""
        if from_ is None and to is None:
            return None
        cfg = city.config
        lo = _parse_utc(from_) if from_ is not None else cfg.start_utc
        hi = _parse_utc(to) if to is not None else cfg.end_utc
        if lo is None or hi is None:
            return _error(400, "bad_parameter",
                          "from/to must be UTC timestamps like 2013-04-01T00:00:00Z",
                          city.store_version)
        if (lo, hi) != (cfg.start_utc, cfg.end_utc):
            return _error(400, "unsupported_query",
                          "precomputed store serves the full period "
                          f"[{cfg.start_utc:%Y-%m-%dT%H:%M:%SZ}, "
                          f"{cfg.end_utc:%Y-%m-%dT%H:%M:%SZ}) only",
                          city.store_version)
        return None

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        code = _STATUS_CODES.get(exc.status_code, "error")
        return _error(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "bad_parameter", "invalid request parameters")

    @app.get("/api/cities")
    def list_cities():
        return _json(None, sorted(cities))

    @app.get("/api/cities/{name}/meta")
    def city_meta(name: str):
        city = _city(name)
        if isinstance(city, Response):
            return city
        return _artifact(city, "meta.json")

    @app.get("/api/cities/{name}/regions")
    def city_regions(name: str):
        city = _city(name)
        if isinstance(city, Response):
            return city
        return _artifact(city, "regions.json")

    @app.get("/api/cities/{name}/regions/{region}/series")
    def region_series(name: str, region: str, type: str | None = None,
                      res: str = "15min",
                      from_: str | None = Query(default=None, alias="from"),
                      to: str | None = None):
        city = _city(name)
        if isinstance(city, Response):
            return city
        bad = _region_check(city, name, region)
        if bad:
            return bad
        t = _type_check(city, type)
        if isinstance(t, Response):
            return t
        if res not in RESOLUTIONS:
            return _error(400, "unknown_resolution",
                          f"{res!r} is not one of {list(RESOLUTIONS)}",
                          city.store_version)
        bad = _period_check(city, from_, to)
        if bad:
            return bad
        return _artifact(city, f"series/{object_key(region)}_{t.name}_{res}.json")

    @app.get("/api/cities/{name}/regions/{region}/typicalweek")
    def region_typicalweek(name: str, region: str, type: str | None = None,
                           normalized: bool = False):
        city = _city(name)
        if isinstance(city, Response):
            return city
        bad = _region_check(city, name, region)
        if bad:
            return bad
        t = _type_check(city, type)
        if isinstance(t, Response):
            return t
        kind = "norm" if normalized else "raw"
        return _artifact(city,
                         f"profiles/{object_key(region)}_{t.name}_{kind}.json")

    @app.get("/api/cities/{name}/regions/{region}/residuals")
    def region_residuals(name: str, region: str, type: str | None = None):
        city = _city(name)
        if isinstance(city, Response):
            return city
        bad = _region_check(city, name, region)
        if bad:
            return bad
        t = _type_check(city, type)
        if isinstance(t, Response):
            return t
        return _artifact(city, f"residuals/{object_key(region)}_{t.name}.json")

    @app.get("/api/cities/{name}/regions/{region}/events")
    def region_events(name: str, region: str, type: str | None = None):
        city = _city(name)
        if isinstance(city, Response):
            return city
        bad = _region_check(city, name, region)
        if bad:
            return bad
        t = _type_check(city, type)
        if isinstance(t, Response):
            return t
        return _artifact(city, f"events/{object_key(region)}_{t.name}.jsonl",
                         media_type="application/x-ndjson")

    @app.get("/api/cities/{name}/clusters")
    def city_clusters(name: str, k: int = 5):
        city = _city(name)
        if isinstance(city, Response):
            return city
        rel = f"clusters/k{k}.json"
        if not city.has_object(rel):
            return _error(404, "cluster_model_not_found",
                          f"no model for k={k}; available: {city.cluster_ks()}",
                          city.store_version)
        return _artifact(city, rel)

    @app.get("/api/cities/{name}/clusters/{k}/compare")
    def compare_clusters(name: str, k: int, other_city: str | None = None):
        city = _city(name)
        if isinstance(city, Response):
            return city
        if other_city is None:
            return _error(400, "missing_parameter",
                          "query parameter 'other_city' is required",
                          city.store_version)
        other = cities.get(other_city)
        if other is None:
            return _error(404, "city_not_found",
                          f"no built city {other_city!r}", city.store_version)
        for c, label in ((city, name), (other, other_city)):
            if not c.has_object(f"clusters/k{k}.json"):
                return _error(404, "cluster_model_not_found",
                              f"city {label!r} has no model for k={k}",
                              city.store_version)
        a = city.load_cluster_model(k)
        b = other.load_cluster_model(k)
        try:
            cmp = compare_models(a, b)
        except ValueError as exc:
            return _error(400, "incomparable_models", str(exc),
                          city.store_version)
        return _json(city, {
            "city": name,
            "other_city": other_city,
            "k": k,
            "types": [t.name for t in a.types],
            "labels": {str(c): lab for c, lab in a.labels.items()},
            "other_labels": {str(c): lab for c, lab in b.labels.items()},
            **cmp.to_json_dict(),
        })

    @app.get("/api/cities/{name}/density")
    def city_density(name: str, metric: str | None = None,
                     type: str | None = None, versus: str | None = None,
                     from_: str | None = Query(default=None, alias="from"),
                     to: str | None = None):
        city = _city(name)
        if isinstance(city, Response):
            return city
        bad = _period_check(city, from_, to)
        if bad:
            return bad
        if metric not in ("volume", "ratio"):
            return _error(400, "unknown_metric",
                          f"{metric!r} is not one of ['volume', 'ratio']",
                          city.store_version)
        t = _type_check(city, type)
        if isinstance(t, Response):
            return t
        if versus is not None and metric != "ratio":
            return _error(400, "bad_parameter",
                          "versus applies to metric=ratio only",
                          city.store_version)
        if versus is not None:
            o = _type_check(city, versus)
            if isinstance(o, Response):
                return o
            rel = f"density/ratio_{t.name}_vs_{o.name}.json"
            if not city.has_object(rel):
                return _error(400, "bad_parameter",
                              "versus must differ from type",
                              city.store_version)
        else:
            rel = f"density/{metric}_{t.name}.json"
        return _artifact(city, rel)

    if static_dir is not None:
        static_dir = Path(static_dir)
        if not static_dir.is_dir():
            raise ValueError(f"static dir {static_dir} does not exist")
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def serve(store_dir, port: int = 8080, host: str = "127.0.0.1",
          static_dir=None) -> None:
    """Run the API with uvicorn (blocking)."""
    import uvicorn

    app = create_app(store_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
