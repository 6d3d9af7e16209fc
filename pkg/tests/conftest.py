"""Shared fixtures.

The default synthetic city (2,000 antennas, 40 weeks, ~2.6 GB of CSV) backs
the acceptance tests. Generating it takes about half a minute, so the CSVs
can be reused across runs by pointing CITYPULSE_TEST_CACHE at a writable
directory; the store build itself always runs fresh because its wall time
is part of what the acceptance suite checks.
"""

import json
import os
import time
from pathlib import Path

import pytest

from citypulse.store import ComputeParams, compute_city, ingest_city, open_store
from citypulse.synth import default_scenario, write_scenario


def _default_data_dir(tmp_path_factory) -> Path:
    cache = os.environ.get("CITYPULSE_TEST_CACHE")
    if cache:
        return Path(cache) / "default-scenario"
    return tmp_path_factory.mktemp("default-scenario")


@pytest.fixture(scope="session")
def default_city_env(tmp_path_factory):
    spec = default_scenario()
    data_dir = _default_data_dir(tmp_path_factory)
    timings = {}
    if not (data_dir / "ground_truth.json").exists():
        t0 = time.perf_counter()
        write_scenario(spec, data_dir)
        timings["generate"] = time.perf_counter() - t0
    truth = json.loads((data_dir / "ground_truth.json").read_text())

    store_dir = tmp_path_factory.mktemp("default-store")
    t0 = time.perf_counter()
    summary = ingest_city(spec.city, data_dir, store_dir)
    timings["ingest"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    compute_city(store_dir, spec.city.city_id, ComputeParams(),
                 series=summary.series)
    timings["compute"] = time.perf_counter() - t0

    return {
        "spec": spec,
        "truth": truth,
        "data_dir": data_dir,
        "store_dir": store_dir,
        "store": open_store(store_dir)[spec.city.city_id],
        "series": summary.series,
        "timings": timings,
    }
