"""Where the city is loud, and when.

A density map collapses time away: average per-window volume per grid
cell over some period. Slice the period instead of taking the whole
range and the map starts moving — at noon the business cells glow, at
ten in the evening the residential ones do.
"""

import tempfile
from datetime import date, datetime, timezone

import numpy as np

from citypulse import ActivityType, CityConfig
from citypulse.density import ratio_map, volume_map
from citypulse.ingest import parse_antennas
from citypulse.spatial import aggregate_files, assign_antennas, build_grid
from citypulse.synth import ScenarioSpec, write_scenario

SHADES = " .:-=+*#%@"


def heat(values: np.ndarray) -> list[str]:
    # absent cells print as '~'; shades scale to the map's own max
    top = np.nanmax(values) or 1.0
    rows = []
    for r in range(values.shape[0]):
        rows.append("".join(
            "~" if np.isnan(v) else SHADES[int(v / top * (len(SHADES) - 1))]
            for v in values[r]))
    return rows


city = CityConfig(
    city_id="tripolis",
    bbox=(0.0, 0.0, 0.0202, 0.0247),
    cell_size_m=500.0,
    period_start=date(2013, 4, 1),
    period_end=date(2013, 5, 13),
    timezone="UTC",
)
spec = ScenarioSpec(seed=9, city=city, n_antennas=150,
                    mix={"business": 1 / 3, "residential": 1 / 3, "leisure": 1 / 3})

workdir = tempfile.mkdtemp(prefix="citypulse-demo-")
truth = write_scenario(spec, workdir)
with open(f"{workdir}/antennas.csv") as fh:
    antennas = parse_antennas(fh, bbox=city.bbox).antennas
grid = build_grid(city)
series = aggregate_files([f"{workdir}/activity.csv"],
                         assign_antennas(grid, [], antennas), city)

# the planted layout, for reference (b=business r=residential l=leisure)
arch = truth["cell_archetypes"]
print("planted archetypes:")
for r in range(grid.n_rows):
    print("   " + "".join(arch.get(f"{r}:{c}", "~")[0] for c in range(grid.n_cols)))

noon = [(datetime(2013, 4, 10, 11, 0, tzinfo=timezone.utc),
         datetime(2013, 4, 10, 14, 0, tzinfo=timezone.utc)), "wed 11:00-14:00"]
night = [(datetime(2013, 4, 10, 19, 30, tzinfo=timezone.utc),
          datetime(2013, 4, 10, 22, 30, tzinfo=timezone.utc)), "wed 19:30-22:30"]

for period, title in (noon, night):
    m = volume_map(series, grid, ActivityType.CALLS, city, period=period)
    print(f"\nmean CALLS per window, {title}:")
    for line in heat(m.values):
        print("   " + line)

# ratio maps answer "what share of traffic is type X here"; on this
# generator every archetype uses the same per-type volume split, so the
# SMS:CALLS ratio comes out flat -- which is itself a useful check
m = ratio_map(series, grid, ActivityType.SMS, city, versus=ActivityType.CALLS)
vals = m.values[~np.isnan(m.values)]
print(f"\nSMS:CALLS pairwise ratio over the full period: "
      f"min {vals.min():.3f}, max {vals.max():.3f} (planted split is 4:6)")

print("""
Single morning-to-evening slices flip which cells carry the load, while
the ratio map stays flat because the generator gives every archetype the
same type mix.
""")
