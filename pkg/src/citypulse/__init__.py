"""Spatio-temporal analytics for aggregated mobile-network activity.

The pipeline: ingest antenna CSVs, aggregate onto a grid / districts /
city regions, derive typical-week profiles and residuals, detect events,
cluster regions by profile shape, build density maps, and persist it all
into an immutable store served over a read-only JSON API.
"""

__version__ = "0.1.0"

from .ingest import (  # noqa: F401
    ACTIVITY_TYPES,
    ActivityRecord,
    ActivityType,
    Antenna,
    CityConfig,
    IngestError,
    load_city_config,
    parse_activity,
    parse_antennas,
)
from .spatial import (  # noqa: F401
    District,
    Grid,
    RegionSeries,
    aggregate,
    aggregate_files,
    assign_antennas,
    build_grid,
    cell_region_id,
    load_districts,
)
from .profiles import (  # noqa: F401
    ResidualSeries,
    WeeklyProfile,
    normalize,
    resample,
    residuals,
    typical_week,
)
from .events import EventReport, detect  # noqa: F401
from .clusters import (  # noqa: F401
    ClusterModel,
    adjusted_rand_index,
    build_features,
    compare_models,
    kmeans,
    label_cluster,
    select_k,
    silhouette,
)
from .density import DensityMap, ratio_map, volume_map  # noqa: F401
from .synth import ScenarioSpec, builtin_templates, default_scenario, generate  # noqa: F401
