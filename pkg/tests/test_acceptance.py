"""End-to-end gate on the default synthetic city.

Each test here is one go/no-go property of the whole pipeline at a pinned
tolerance, so a verbose run gives one pass/fail line per property. The
default city (2,000 antennas, 40 weeks) comes from the session fixture;
smaller purpose-built scenarios cover clustering recovery, the false
positive floor, and cross-city centroid matching.
"""

import dataclasses
import itertools
import json
import zoneinfo
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from fastapi.testclient import TestClient

from citypulse.clusters import (
    FeatureVector,
    adjusted_rand_index,
    build_features,
    kmeans,
    label_cluster,
)
from citypulse.events import detect
from citypulse.ingest import (
    ACTIVITY_TYPES,
    ActivityType,
    activity_shards,
    parse_antennas,
)
from citypulse.profiles import normalize, residuals, typical_week
from citypulse.server import create_app
from citypulse.spatial import aggregate_files, assign_antennas, build_grid
from citypulse.store import object_key
from citypulse.synth import ScenarioSpec, builtin_templates, default_scenario
from citypulse.synth import write_scenario


def aggregate_dir(config, data_dir):
    """Library-route aggregation of a generated scenario directory."""
    with open(data_dir / "antennas.csv", encoding="utf-8") as f:
        ants = parse_antennas(f, config.bbox)
    grid = build_grid(config)
    table = assign_antennas(grid, [], ants.antennas)
    paths = [str(p) for p in activity_shards(data_dir)]
    return aggregate_files(paths, table, config)


def shrink(city, city_id, weeks):
    end = city.period_start + timedelta(weeks=weeks)
    return dataclasses.replace(city, city_id=city_id, period_end=end)


def cluster_cells(series, config, k, seed=0):
    profiles = {}
    for rid, s in series.items():
        if ":" not in rid:
            continue
        for t in ACTIVITY_TYPES:
            profiles[(rid, t)] = normalize(typical_week(s, t, config))
    vectors, skipped = build_features(profiles, ACTIVITY_TYPES)
    assert not skipped
    return kmeans(vectors, k, seed=seed, types=ACTIVITY_TYPES)


def majority_archetype(model, truth):
    """Dominant planted archetype among each cluster's member cells."""
    out = {}
    for c in range(model.k):
        members = [r for r, ci in model.assignment.items() if ci == c]
        counts = {}
        for r in members:
            arch = truth["cell_archetypes"][r]
            counts[arch] = counts.get(arch, 0) + 1
        out[c] = max(sorted(counts), key=counts.get)
    return out


def test_conservation_suite_and_runtime(default_city_env):
    """Cell sums equal city totals exactly; ratios close to 1 within 1e-9;
    coarser resolutions conserve totals; ingest+compute finish under 60 s."""
    env = default_city_env
    series, store = env["series"], env["store"]

    cells = [r for r in series if r != "city"]
    total = np.zeros_like(series["city"].values)
    present = np.zeros_like(series["city"].presence)
    for r in cells:
        total += series[r].values
        present |= series[r].presence
    assert np.array_equal(total, series["city"].values)
    assert np.array_equal(present, series["city"].presence)

    ratio_maps = [json.loads(store.read_object(f"density/ratio_{t.name}.json"))
                  for t in ACTIVITY_TYPES]
    stacked = np.array([[v if v is not None else np.nan for v in m["values"]]
                        for m in ratio_maps])
    covered = ~np.isnan(stacked).any(axis=0)
    assert covered.any()
    np.testing.assert_allclose(stacked[:, covered].sum(axis=0), 1.0,
                               rtol=0, atol=1e-9)

    for rid in ("city", cells[0]):
        for t in (ActivityType.CALLS, ActivityType.DATA_UP):
            sums = {}
            for res in ("15min", "hour", "day", "week"):
                obj = json.loads(store.read_object(
                    f"series/{object_key(rid)}_{t.name}_{res}.json"))
                sums[res] = sum(v for v in obj["values"] if v is not None)
            assert len(set(sums.values())) == 1, (rid, t, sums)

    t = env["timings"]
    assert t["ingest"] + t["compute"] < 60.0, t


def test_typical_week_matches_naive_oracle(default_city_env):
    """Stored typical weeks match a brute-force per-bin mean (naive datetime
    loops, no shared code) within 1e-9 relative on 100 sampled pairs."""
    env = default_city_env
    config = env["spec"].city
    store, series = env["store"], env["series"]

    tz = zoneinfo.ZoneInfo(config.timezone)
    slots = []
    occupancy = {}
    ts = config.start_utc
    for _ in range(config.n_windows):
        local = ts.astimezone(tz)
        iso = local.isocalendar()
        b = (iso[2] - 1) * 96 + local.hour * 4 + local.minute // 15
        key = (iso[0], iso[1], b)
        slots.append(key)
        occupancy[key] = occupancy.get(key, 0) + 1
        ts += timedelta(minutes=15)

    rng = np.random.default_rng(20130401)
    combos = [(rid, t) for rid in store.region_ids() for t in ACTIVITY_TYPES]
    picks = rng.choice(len(combos), size=100, replace=False)
    for idx in picks:
        rid, t = combos[idx]
        values = series[rid].series(t)
        presence = series[rid].presence
        sums = [0.0] * 672
        counts = [0] * 672
        for w, key in enumerate(slots):
            if occupancy[key] == 1 and presence[w]:
                sums[key[2]] += float(values[w])
                counts[key[2]] += 1
        expected = [s / n if n else 0.0 for s, n in zip(sums, counts)]
        stored = json.loads(store.read_object(
            f"profiles/{object_key(rid)}_{t.name}_raw.json"))
        np.testing.assert_allclose(stored["values"], expected,
                                   rtol=1e-9, atol=1e-12)
        assert stored["support"] == counts


@pytest.fixture(scope="module")
def mix_city(tmp_path_factory):
    base = default_scenario()
    spec = ScenarioSpec(
        seed=20130402,
        city=shrink(base.city, "mixville", 6),
        n_antennas=400,
        mix={"business": 1 / 3, "residential": 1 / 3, "leisure": 1 / 3},
    )
    tmp = tmp_path_factory.mktemp("mixville")
    truth = write_scenario(spec, tmp)
    return spec, truth, aggregate_dir(spec.city, tmp)


def test_planted_mix_clustering_recovery(mix_city):
    """k=3 on a pure business/residential/leisure mix recovers the planted
    partition with ARI >= 0.95 and names every cluster correctly."""
    spec, truth, series = mix_city
    model = cluster_cells(series, spec.city, k=3)
    regions = sorted(model.assignment)
    got = [model.assignment[r] for r in regions]
    want = [truth["cell_archetypes"][r] for r in regions]
    ari = adjusted_rand_index(got, [sorted(set(want)).index(w) for w in want])
    assert ari >= 0.95, ari

    majority = majority_archetype(model, truth)
    assert sorted(majority.values()) == ["business", "leisure", "residential"]
    for c in range(model.k):
        assert model.labels[c] == majority[c], (c, model.labels, majority)


def test_kmeans_invariants_and_exhaustive_optimum():
    """SSE never increases across iterations; converged models satisfy the
    nearest-centroid and centroid-mean conditions within 1e-9 and are
    bit-identical across reruns; a 5-point instance hits the exhaustive
    optimum."""
    rng = np.random.default_rng(42)
    centers = rng.normal(size=(3, 6)) * 4
    vectors = [FeatureVector(f"p{i}", centers[i % 3] + rng.normal(size=6))
               for i in range(60)]

    sse = [kmeans(vectors, 3, seed=9, max_iter=i).sse for i in range(1, 14)]
    for a, b in zip(sse, sse[1:]):
        assert b <= a + 1e-12, sse

    model = kmeans(vectors, 3, seed=9)
    x = np.stack([v.x for v in vectors])
    assigned = np.array([model.assignment[v.region_id] for v in vectors])
    d2 = ((x[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    assert (d2[np.arange(len(x)), assigned] <= d2.min(axis=1) + 1e-9).all()
    for c in range(3):
        members = x[assigned == c]
        np.testing.assert_allclose(model.centroids[c], members.mean(axis=0),
                                   rtol=0, atol=1e-9)

    again = kmeans(vectors, 3, seed=9)
    assert np.array_equal(model.centroids, again.centroids)
    assert model.assignment == again.assignment
    assert model.sse == again.sse

    pts = np.array([[0.0, 0], [1, 0], [2, 0], [10, 0], [11, 0]])
    toy = [FeatureVector(f"t{i}", p) for i, p in enumerate(pts)]
    best = np.inf
    for size in range(1, 5):
        for group in itertools.combinations(range(5), size):
            a = pts[list(group)]
            b = np.delete(pts, list(group), axis=0)
            cost = ((a - a.mean(0)) ** 2).sum() + ((b - b.mean(0)) ** 2).sum()
            best = min(best, cost)
    assert kmeans(toy, 2, seed=0).sse == pytest.approx(best, abs=1e-9)


@pytest.fixture(scope="module")
def quiet_city(tmp_path_factory):
    base = default_scenario()
    spec = ScenarioSpec(
        seed=99,
        city=shrink(base.city, "quietville", 26),
        n_antennas=300,
        mix={"business": 0.25, "residential": 0.45, "leisure": 0.15,
             "uniform": 0.15},
    )
    tmp = tmp_path_factory.mktemp("quietville")
    write_scenario(spec, tmp)
    return spec, aggregate_dir(spec.city, tmp)


def test_planted_event_detection_and_false_positive_floor(
        default_city_env, quiet_city):
    """The planted 10x, 12-window event is found with span Jaccard >= 0.8
    and its peak inside the true span; an event-free, holiday-free scenario
    yields at most 1 event per 100 region-weeks at the default thresholds."""
    env = default_city_env
    config = env["spec"].city
    truth_ev = env["truth"]["events"][0]
    true_span = set(range(truth_ev["start_window"],
                          truth_ev["end_window"] + 1))

    body = env["store"].read_object(
        f"events/{object_key(truth_ev['cell'])}_CALLS.jsonl")
    best = 0.0
    peak_ok = False
    for line in body.splitlines():
        ev = json.loads(line)
        si = config.window_index(datetime.strptime(
            ev["start_window"], "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc))
        span = set(range(si, si + ev["duration_windows"]))
        jac = len(span & true_span) / len(span | true_span)
        if jac > best:
            best = jac
            pi = config.window_index(datetime.strptime(
                ev["peak_window"], "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc))
            peak_ok = pi in true_span
    assert best >= 0.8, best
    assert peak_ok

    spec, series = quiet_city
    n_events = 0
    for rid, s in series.items():
        for t in ACTIVITY_TYPES:
            profile = typical_week(s, t, spec.city)
            res = residuals(s, t, profile, spec.city)
            n_events += len(detect(res, spec.city))
    n_weeks = spec.city.n_windows // 672
    region_weeks = len(series) * n_weeks
    assert n_events <= region_weeks / 100, (n_events, region_weeks)


def test_weekly_trend_and_holiday_minimum(default_city_env):
    """Weekly city data volume fits exponential growth at 0.01/week within
    0.003, and the damped holiday week is the minimum of its +-5 weeks."""
    env = default_city_env
    series = env["series"]["city"].series(ActivityType.DATA_DOWN)
    weekly = series.reshape(-1, 672).sum(axis=1).astype(np.float64)
    assert len(weekly) == 40

    slope = np.polyfit(np.arange(40), np.log(weekly), 1)[0]
    rate = float(np.expm1(slope))
    assert abs(rate - 0.01) <= 0.003, rate

    meta = json.loads(env["store"].read_object("meta.json"))
    holiday = env["spec"].holidays[0].week
    i = meta["week_ids"].index(holiday)
    lo, hi = max(0, i - 5), min(len(weekly), i + 6)
    assert weekly[i] == weekly[lo:hi].min()
    assert np.argmin(weekly[lo:hi]) == i - lo


@pytest.fixture(scope="module")
def twin_cities(tmp_path_factory):
    base = default_scenario()
    shifted = {k: v.copy() for k, v in builtin_templates().items()}
    shifted["residential"] = np.roll(shifted["residential"], 8, axis=1)
    out = []
    for name, seed, templates in (("twin_a", 31, None),
                                  ("twin_b", 32, shifted)):
        spec = ScenarioSpec(
            seed=seed,
            city=shrink(base.city, name, 6),
            n_antennas=300,
            mix={"business": 0.5, "residential": 0.5},
            templates=templates,
        )
        tmp = tmp_path_factory.mktemp(name)
        truth = write_scenario(spec, tmp)
        out.append((spec, truth, aggregate_dir(spec.city, tmp)))
    return out


def test_shared_business_template_centroid_proximity(twin_cities):
    """Two cities sharing the business archetype but differing in the
    residential one have business centroids closer than residential ones."""
    centroids = {}
    for spec, truth, series in twin_cities:
        model = cluster_cells(series, spec.city, k=2)
        majority = majority_archetype(model, truth)
        assert sorted(majority.values()) == ["business", "residential"]
        for c, arch in majority.items():
            centroids[(spec.city.city_id, arch)] = model.centroids[c]
    d_business = np.linalg.norm(centroids[("twin_a", "business")]
                                - centroids[("twin_b", "business")])
    d_residential = np.linalg.norm(centroids[("twin_a", "residential")]
                                   - centroids[("twin_b", "residential")])
    assert d_business < d_residential, (d_business, d_residential)


def test_api_serves_artifacts_byte_identical(default_city_env):
    """Every artifact class is served byte-for-byte from the store, and
    unknown resources come back as structured JSON errors; no web UI is
    mounted or required."""
    env = default_city_env
    store = env["store"]
    city = env["spec"].city.city_id
    client = TestClient(create_app(env["store_dir"]))
    cell = next(r for r in store.region_ids() if ":" in r)
    key = object_key(cell)

    checks = [
        (f"/api/cities/{city}/meta", {}, "meta.json"),
        (f"/api/cities/{city}/regions", {}, "regions.json"),
        (f"/api/cities/{city}/regions/{cell}/series",
         {"type": "CALLS", "res": "week"}, f"series/{key}_CALLS_week.json"),
        (f"/api/cities/{city}/regions/{cell}/series",
         {"type": "DATA_UP"}, f"series/{key}_DATA_UP_15min.json"),
        (f"/api/cities/{city}/regions/{cell}/typicalweek",
         {"type": "SMS"}, f"profiles/{key}_SMS_raw.json"),
        (f"/api/cities/{city}/regions/{cell}/typicalweek",
         {"type": "SMS", "normalized": "true"}, f"profiles/{key}_SMS_norm.json"),
        (f"/api/cities/{city}/regions/{cell}/residuals",
         {"type": "DATA_REQUESTS"}, f"residuals/{key}_DATA_REQUESTS.json"),
        (f"/api/cities/{city}/regions/{cell}/events",
         {"type": "CALLS"}, f"events/{key}_CALLS.jsonl"),
        (f"/api/cities/{city}/clusters", {"k": 5}, "clusters/k5.json"),
        (f"/api/cities/{city}/density",
         {"metric": "volume", "type": "CALLS"}, "density/volume_CALLS.json"),
        (f"/api/cities/{city}/density",
         {"metric": "ratio", "type": "SMS"}, "density/ratio_SMS.json"),
        (f"/api/cities/{city}/density",
         {"metric": "ratio", "type": "CALLS", "versus": "SMS"},
         "density/ratio_CALLS_vs_SMS.json"),
    ]
    for url, params, rel in checks:
        r = client.get(url, params=params)
        assert r.status_code == 200, (url, r.content[:200])
        assert r.content == store.read_object(rel), url

    failures = [
        ("/api/cities/atlantis/meta", {}, 404),
        (f"/api/cities/{city}/regions/atl:1/series", {"type": "CALLS"}, 404),
        (f"/api/cities/{city}/regions/{cell}/series", {"type": "PIGEONS"}, 400),
        (f"/api/cities/{city}/clusters", {"k": 99}, 404),
        ("/api/not/a/thing", {}, 404),
    ]
    for url, params, status in failures:
        r = client.get(url, params=params)
        assert r.status_code == status, url
        body = r.json()
        assert set(body) == {"error"}
        assert set(body["error"]) == {"code", "message"}
