"""Find a planted stadium night in thirty weeks of noise.

The detector never sees the ground truth. It builds each region's typical
week, takes residuals (observed minus expected per local-time bin), scales
them by the bin's own variability, and reports runs of z >= 4. A concert
that triples midweek traffic for three hours is an easy catch at cell
level and invisible citywide.
"""

import tempfile
from datetime import date
from pathlib import Path

from citypulse import ActivityType, CityConfig
from citypulse.events import detect
from citypulse.profiles import residuals, typical_week
from citypulse.spatial import aggregate_files, assign_antennas, build_grid
from citypulse.ingest import parse_antennas
from citypulse.synth import EventSpec, ScenarioSpec, write_scenario

city = CityConfig(
    city_id="concertville",
    bbox=(0.0, 0.0, 0.0202, 0.0247),  # 5 x 6 grid
    cell_size_m=500.0,
    period_start=date(2013, 1, 7),
    period_end=date(2013, 8, 5),  # 30 weeks
    timezone="UTC",
)

# wednesday of week 11, 19:00-22:00, 3.5x normal amplitude, in cell 2:3
EVENT_START = (10 * 7 + 2) * 96 + 76
event = EventSpec(location="2:3", start_window=EVENT_START,
                  duration_windows=12, amplitude=3.5,
                  types=(ActivityType.CALLS, ActivityType.SMS))
spec = ScenarioSpec(seed=77, city=city, n_antennas=60,
                    mix={"residential": 1.0}, events=(event,))

workdir = Path(tempfile.mkdtemp(prefix="citypulse-demo-"))
truth = write_scenario(spec, workdir)
print(f"generated {spec.n_antennas} antennas x 30 weeks into {workdir}")

with open(workdir / "antennas.csv") as fh:
    antennas = parse_antennas(fh, bbox=city.bbox).antennas
table = assign_antennas(build_grid(city), [], antennas)
series = aggregate_files([workdir / "activity.csv"], table, city)

for region in ("2:3", "city"):
    profile = typical_week(series[region], ActivityType.CALLS, city)
    res = residuals(series[region], ActivityType.CALLS, profile, city)
    found = detect(res, city)  # defaults: z >= 4, >= 2 windows, gap 2
    print(f"\nregion {region}: {len(found)} event(s)")
    for ev in found:
        print(f"  {ev.start_window:%Y-%m-%d %H:%M} .. {ev.end_window:%H:%M}  "
              f"peak z={ev.peak_z:.1f} at {ev.peak_window:%H:%M}, "
              f"{ev.duration_windows} windows")

planted = truth["events"][0]
print(f"\nplanted: cell {planted['cell']} windows "
      f"{planted['start_window']}..{planted['end_window']} "
      f"({planted['amplitude']}x amplitude)")
print("""
The cell containing the venue reports one event matching the planted span.
At city scale the same night is averaged over every other cell, so the
z-run detector stays quiet there, which is exactly the point of doing
detection per region.
""")
