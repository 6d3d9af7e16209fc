"""
Generate a synthetic city
=========================

Every other demo needs data, and real operator exports are not something
you can check into a repo. The synth module plants a city with known
ground truth: each grid cell gets an archetype (business, residential,
leisure or uniform), every antenna in the cell inherits it, and counts
are drawn Poisson around archetype-shaped expectations.
"""

import argparse
import json
from datetime import date
from pathlib import Path

from citypulse import CityConfig
from citypulse.synth import ScenarioSpec, write_scenario

parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[1])
parser.add_argument("--out", default="city_out", help="output directory")
args = parser.parse_args()

# A small town: 3 x 4 grid of 500 m cells, six weeks of spring 2013.
city = CityConfig(
    city_id="demoville",
    bbox=(0.0, 0.0, 0.012, 0.017),
    cell_size_m=500.0,
    period_start=date(2013, 4, 1),
    period_end=date(2013, 5, 13),
    timezone="UTC",
)
spec = ScenarioSpec(
    seed=101,
    city=city,
    n_antennas=36,
    mix={"business": 0.4, "residential": 0.4, "leisure": 0.2},
)

truth = write_scenario(spec, args.out)
out = Path(args.out)

print(f"wrote {sorted(p.name for p in out.iterdir())} to {out}/")

# antennas.csv is one line per antenna; activity.csv is one line per
# (antenna, 15-minute window) with the five counters
for name in ("antennas.csv", "activity.csv"):
    with open(out / name) as fh:
        head = [next(fh).rstrip() for _ in range(3)]
    print(f"\n{name}:")
    for line in head:
        print("  " + line)

n_rows = spec.n_antennas * city.n_windows
print(f"\n{spec.n_antennas} antennas x {city.n_windows} windows = {n_rows:,} activity rows")

# the ground truth record is what the acceptance-style checks compare against
print("\nplanted archetypes per cell:")
cells = truth["cell_archetypes"]
for r in range(3):
    print("  " + "  ".join(f"{cells.get(f'{r}:{c}', '-'):<11s}" for c in range(4)))

print("\nper-antenna truth (first two):")
for a in truth["antennas"][:2]:
    print("  " + json.dumps(a))

print(f"""
Rerunning with the same spec reproduces these files byte for byte.
Next: python demos/02_typical_weeks.py --data {args.out}
""")
