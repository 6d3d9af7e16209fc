"""Snapshot API responses from a built store into tests/fixtures/.

The UI test suite stubs fetch() with these exact bodies, so every fixture is
byte-identical to what the live server returns for the same URL.

Usage: python3 scripts/capture_fixtures.py [--store /tmp/default-store]
"""

import argparse
import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from citypulse.server import create_app

HERE = Path(__file__).resolve().parent
FIXTURE_DIR = HERE.parent / "tests" / "fixtures"

# URL -> fixture file; the stub router in tests mirrors this table
CAPTURES = [
    ("/api/cities", "cities.json"),
    ("/api/cities/synthtown/meta", "meta.json"),
    ("/api/cities/synthtown/regions", "regions.json"),
    ("/api/cities/synthtown/regions/5:5/series?type=CALLS&res=day", "series_5_5_CALLS_day.json"),
    ("/api/cities/synthtown/regions/0:0/series?type=CALLS&res=day", "series_0_0_CALLS_day.json"),
    ("/api/cities/synthtown/regions/5:5/series?type=CALLS&res=week", "series_5_5_CALLS_week.json"),
    ("/api/cities/synthtown/regions/5:5/typicalweek?type=CALLS&normalized=true",
     "typicalweek_5_5_CALLS_norm.json"),
    ("/api/cities/synthtown/regions/5:5/typicalweek?type=CALLS&normalized=false",
     "typicalweek_5_5_CALLS_raw.json"),
    ("/api/cities/synthtown/regions/0:0/typicalweek?type=CALLS&normalized=true",
     "typicalweek_0_0_CALLS_norm.json"),
    ("/api/cities/synthtown/regions/5:5/residuals?type=CALLS", "residuals_5_5_CALLS.json"),
    ("/api/cities/synthtown/regions/0:0/residuals?type=CALLS", "residuals_0_0_CALLS.json"),
    ("/api/cities/synthtown/regions/5:5/events?type=CALLS", "events_5_5_CALLS.ndjson"),
    ("/api/cities/synthtown/regions/0:0/events?type=CALLS", "events_0_0_CALLS.ndjson"),
    ("/api/cities/synthtown/clusters?k=5", "clusters_k5.json"),
    ("/api/cities/synthtown/clusters?k=3", "clusters_k3.json"),
    ("/api/cities/synthtown/clusters/5/compare?other_city=synthtown", "compare_k5_self.json"),
    ("/api/cities/synthtown/density?metric=volume&type=CALLS", "density_volume_CALLS.json"),
    ("/api/cities/synthtown/density?metric=ratio&type=SMS&versus=CALLS",
     "density_ratio_SMS_vs_CALLS.json"),
]

# captured as-is too: the UI must render these as a prompt / banner
ERROR_CAPTURES = [
    ("/api/cities/synthtown/clusters?k=17", "error_clusters_k17.json"),
    ("/api/cities/synthtown/density?metric=volume&type=CALLS"
     "&from=2013-01-07T00:00:00Z&to=2013-01-14T00:00:00Z", "error_density_subperiod.json"),
]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--store", default="/tmp/default-store")
    args = ap.parse_args()

    client = TestClient(create_app(args.store))
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    for url, name in CAPTURES:
        resp = client.get(url)
        if resp.status_code != 200:
            print(f"FAIL {url} -> {resp.status_code} {resp.text[:200]}")
            return 1
        (FIXTURE_DIR / name).write_bytes(resp.content)
        print(f"{name}: {len(resp.content)} bytes")
    for url, name in ERROR_CAPTURES:
        resp = client.get(url)
        if resp.status_code // 100 == 2:
            print(f"FAIL {url} unexpectedly succeeded")
            return 1
        body = {"status": resp.status_code, "body": resp.json()}
        (FIXTURE_DIR / name).write_text(json.dumps(body, indent=1))
        print(f"{name}: status {resp.status_code}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
