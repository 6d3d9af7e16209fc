"""
Functional clusters: carving the city by rhythm
===============================================

Clustering the normalized typical weeks groups cells by *when* they are
busy, not by how much traffic they carry. On a synthetic city with three
planted archetypes, k = 3 recovers the plan almost perfectly, and the
mass-ratio labeler names each cluster from its centroid alone.
"""

import tempfile
from datetime import date

import numpy as np

from citypulse import ActivityType, CityConfig
from citypulse.clusters import adjusted_rand_index, build_features, kmeans
from citypulse.ingest import parse_antennas
from citypulse.profiles import normalize, typical_week
from citypulse.spatial import aggregate_files, assign_antennas, build_grid
from citypulse.synth import ScenarioSpec, write_scenario

city = CityConfig(
    city_id="tripolis",
    bbox=(0.0, 0.0, 0.0202, 0.0247),  # 5 x 6 grid
    cell_size_m=500.0,
    period_start=date(2013, 4, 1),
    period_end=date(2013, 5, 13),
    timezone="UTC",
)
spec = ScenarioSpec(
    seed=9, city=city, n_antennas=150,
    mix={"business": 1 / 3, "residential": 1 / 3, "leisure": 1 / 3},
)

workdir = tempfile.mkdtemp(prefix="citypulse-demo-")
truth = write_scenario(spec, workdir)

with open(f"{workdir}/antennas.csv") as fh:
    antennas = parse_antennas(fh, bbox=city.bbox).antennas
grid = build_grid(city)
series = aggregate_files([f"{workdir}/activity.csv"],
                         assign_antennas(grid, [], antennas), city)

# feature vector per cell: normalized typical weeks of CALLS and SMS,
# concatenated -> 1344 values describing shape only
types = (ActivityType.CALLS, ActivityType.SMS)
profiles = {}
for rid, s in series.items():
    if rid == "city":
        continue
    for t in types:
        profiles[(rid, t)] = normalize(typical_week(s, t, city))

vectors, skipped = build_features(profiles, types)
model = kmeans(vectors, k=3, seed=0, types=types)
print(f"clustered {len(vectors)} cells (skipped {len(skipped)} empty), "
      f"k=3, sse={model.sse:.4f}, {model.iterations} iterations")
print(f"labels from centroid shape: {model.labels}")

planted = truth["cell_archetypes"]
cells = [v.region_id for v in vectors]
truth_idx = [sorted(set(planted.values())).index(planted[c]) for c in cells]
got = [model.assignment[c] for c in cells]
print(f"adjusted Rand index vs planted archetypes: "
      f"{adjusted_rand_index(truth_idx, got):.3f}")

# cross-tab: rows = planted archetype, cols = cluster
archs = sorted(set(planted.values()))
print("\nplanted \\ cluster " + "".join(f"{j:>6d}" for j in range(3)))
for a in archs:
    row = [sum(1 for c in cells if planted[c] == a and model.assignment[c] == j)
           for j in range(3)]
    print(f"  {a:<15s} " + "".join(f"{n:>6d}" for n in row))

print("\ncentroid mass by day-part (share of the CALLS block):")
block = model.centroids[:, :672].reshape(3, 7, 96)
for j in range(3):
    wd, we = block[j, :5], block[j, 5:]
    print(f"  cluster {j} ({model.labels[j]:<11s}) "
          f"weekday 9-18h {wd[:, 36:72].sum():.2f}  "
          f"weekday 18-24h {wd[:, 72:].sum():.2f}  "
          f"weekend {we.sum():.2f}")

print("""
Every planted archetype lands in its own cluster, and the labeler reads
business / residential / leisure straight off the centroids. The same
seed reproduces the identical model, down to the last bit.
""")
