"""Functional clustering of regions by normalized typical-week shape.

Feature vectors concatenate one L1-normalized 672-bin profile per selected
activity type (ordinal order), so Euclidean distance compares shapes, not
volumes. k-means uses k-means++ seeding driven by numpy's PCG64 generator
(seeded, portable) and Lloyd iterations with first-occurrence argmin tie
breaking; identical inputs and seed give bit-identical models for a given
numpy version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .ingest import ACTIVITY_TYPES, ActivityType
from .profiles import BINS_PER_WEEK, WeeklyProfile

LABEL_BUSINESS = "business"
LABEL_RESIDENTIAL = "residential"
LABEL_LEISURE = "leisure"
LABEL_OTHER = "other"

# over-representation a span needs before it names the cluster
LABEL_RATIO_THRESHOLD = 1.15

DEFAULT_K = 5
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class FeatureVector:
    region_id: str
    x: np.ndarray  # (672 * n_types,) float64


@dataclass
class ClusterModel:
    k: int
    seed: int
    types: tuple[ActivityType, ...]
    centroids: np.ndarray  # (k, d) float64
    assignment: dict[str, int]
    sse: float
    iterations: int
    labels: dict[int, str]
    region_ids: tuple[str, ...] = ()  # admission order, matches kmeans input

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "types": [t.name for t in self.types],
            "sse": self.sse,
            "labels": {str(i): lab for i, lab in sorted(self.labels.items())},
            "centroids": self.centroids.tolist(),
            "assignment": dict(sorted(self.assignment.items())),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ClusterModel":
        return cls(
            k=int(obj["k"]),
            seed=int(obj["seed"]),
            types=tuple(ActivityType.from_name(t) for t in obj["types"]),
            centroids=np.asarray(obj["centroids"], dtype=np.float64),
            assignment={r: int(c) for r, c in obj["assignment"].items()},
            sse=float(obj["sse"]),
            iterations=0,
            labels={int(i): str(lab) for i, lab in obj["labels"].items()},
            region_ids=tuple(obj["assignment"].keys()),
        )


def build_features(
    profiles: Mapping[tuple[str, ActivityType], WeeklyProfile],
    types: Sequence[ActivityType],
) -> tuple[list[FeatureVector], list[str]]:
    """Concatenate normalized profile blocks per region, in ordinal type order.

    Regions missing any requested type, or with an empty profile for one,
    are skipped and returned in the second element. Raw (unnormalized)
    profiles are a caller bug and raise.
    """
    if not types:
        raise ValueError("at least one activity type is required")
    types = tuple(sorted(set(types), key=lambda t: t.value))
    regions = sorted({r for r, _ in profiles.keys()})
    vectors: list[FeatureVector] = []
    skipped: list[str] = []
    for region in regions:
        blocks = []
        for t in types:
            p = profiles.get((region, t))
            if p is None or p.empty:
                blocks = None
                break
            if not p.normalized:
                raise ValueError(f"profile for ({region}, {t.name}) is not normalized")
            s = p.values.sum()
            if abs(s - 1.0) > 1e-9:
                raise ValueError(f"block for ({region}, {t.name}) sums to {s}, not 1")
            blocks.append(p.values)
        if blocks is None:
            skipped.append(region)
            continue
        vectors.append(FeatureVector(region, np.concatenate(blocks)))
    return vectors, skipped


def _kpp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ center indices; weighted draws via cumulative-sum inversion."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = cdist(x, x[chosen[-1:]], "sqeuclidean")[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining mass at zero distance: take the lowest unchosen index
            taken = set(chosen)
            chosen.append(next(i for i in range(n) if i not in taken))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            chosen.append(min(idx, n - 1))
        nd = cdist(x, x[chosen[-1:]], "sqeuclidean")[:, 0]
        d2 = np.minimum(d2, nd)
    return np.array(chosen)


def kmeans(
    vectors: Sequence[FeatureVector],
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    types: Sequence[ActivityType] | None = None,
    init_centroids: np.ndarray | None = None,
) -> ClusterModel:
    """Lloyd's algorithm over feature vectors, deterministic under seed.

    Runs until the assignment is stable (the invariants hold exactly then);
    tol breaks float-rounding limit cycles where SSE stops improving while
    labels still flip. Ties in nearest-centroid go to the lower cluster
    index; an emptied cluster is reseeded with the point farthest from its
    assigned centroid. init_centroids skips k-means++ seeding (warm start).
    """
    n = len(vectors)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k = {k} exceeds the {n} admitted regions")
    ids = [v.region_id for v in vectors]
    if len(set(ids)) != n:
        raise ValueError("duplicate region ids in feature vectors")
    x = np.ascontiguousarray(np.stack([v.x for v in vectors]))
    if init_centroids is not None:
        if init_centroids.shape != (k, x.shape[1]):
            raise ValueError(f"init_centroids must have shape {(k, x.shape[1])}")
        centroids = init_centroids.astype(np.float64).copy()
    else:
        rng = np.random.default_rng(seed)
        centroids = x[_kpp_init(x, k, rng)].copy()

    labels = np.full(n, -1, dtype=np.int64)
    sse = math.inf
    stalled = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = cdist(x, centroids, "sqeuclidean")
        new_labels = d2.argmin(axis=1)  # first occurrence wins ties
        reseeded = False
        for j in range(k):
            if (new_labels == j).any():
                continue
            point_d2 = d2[np.arange(n), new_labels]
            far = int(point_d2.argmax())
            if point_d2[far] <= 0:
                continue  # every point sits on a centroid; leave cluster empty
            centroids[j] = x[far]
            d2[:, j] = cdist(x, x[far : far + 1], "sqeuclidean")[:, 0]
            new_labels = d2.argmin(axis=1)
            reseeded = True
        new_sse = float(d2[np.arange(n), new_labels].sum())
        if new_sse > sse * (1 + 1e-12) + 1e-12:
            raise RuntimeError(f"SSE increased {sse} -> {new_sse} at iteration {iterations}")
        improved = sse - new_sse
        stable = (labels == new_labels).all() and not reseeded
        labels = new_labels
        sse = new_sse
        if stable:
            # the pass that proves stability is verification, not a round
            iterations = max(1, iterations - 1)
            break
        if sse > 0 and improved / max(sse, 1e-300) < tol:
            stalled += 1
            if stalled >= 3:
                break
        else:
            stalled = 0
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)

    model = ClusterModel(
        k=k,
        seed=seed,
        types=tuple(types) if types else (),
        centroids=centroids,
        assignment={rid: int(c) for rid, c in zip(ids, labels)},
        sse=sse,
        iterations=iterations,
        labels={},
        region_ids=tuple(ids),
    )
    if types:
        model.labels = {j: label_cluster(centroids[j], types) for j in range(k)}
    return model


# spans of the labeling heuristic, as bin masks over one 672 block
def _span_mask(days: range, slot_lo: int, slot_hi: int) -> np.ndarray:
    mask = np.zeros(BINS_PER_WEEK, dtype=bool)
    for d in days:
        mask[d * 96 + slot_lo : d * 96 + slot_hi] = True
    return mask

_WORK_MASK = _span_mask(range(0, 5), 36, 72)     # weekday 09:00-18:00
_EVENING_MASK = _span_mask(range(0, 5), 72, 96)  # weekday 18:00-24:00
_WEEKEND_MASK = _span_mask(range(5, 7), 36, 80)  # weekend 09:00-20:00


def label_cluster(centroid: np.ndarray, types: Sequence[ActivityType]) -> str:
    """Name a centroid by where its first type's mass is over-represented.

    Each span's mass is divided by its uniform share (span size / 672); the
    largest ratio labels the cluster if it reaches 1.15, else "other".
    """
    if not types:
        raise ValueError("at least one activity type is required")
    block = np.asarray(centroid[:BINS_PER_WEEK], dtype=np.float64)
    if len(centroid) < BINS_PER_WEEK:
        raise ValueError(f"centroid has {len(centroid)} values, expected >= {BINS_PER_WEEK}")
    s = float(block.sum())
    if abs(s - 1.0) > 1e-6:
        raise ValueError(f"centroid block sums to {s}; expected an L1-normalized block")
    ratios = [
        (float(block[_WORK_MASK].sum()) / (_WORK_MASK.sum() / BINS_PER_WEEK), LABEL_BUSINESS),
        (float(block[_EVENING_MASK].sum()) / (_EVENING_MASK.sum() / BINS_PER_WEEK), LABEL_RESIDENTIAL),
        (float(block[_WEEKEND_MASK].sum()) / (_WEEKEND_MASK.sum() / BINS_PER_WEEK), LABEL_LEISURE),
    ]
    best_ratio, best_label = max(ratios, key=lambda rl: rl[0])
    return best_label if best_ratio >= LABEL_RATIO_THRESHOLD else LABEL_OTHER


def silhouette(x: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient with Euclidean distance.

    Points in singleton clusters score 0 by convention.
    """
    n = len(x)
    if n < 2:
        raise ValueError("silhouette needs at least 2 points")
    dist = cdist(x, x, "euclidean")
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    scores = np.zeros(n)
    for i in range(n):
        own = labels[i]
        own_mask = labels == own
        n_own = own_mask.sum()
        if n_own <= 1:
            continue
        a = dist[i, own_mask].sum() / (n_own - 1)
        b = min(dist[i, labels == other].mean() for other in uniq if other != own)
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


@dataclass
class KSelectionRow:
    k: int
    sse: float
    mean_silhouette: float


def select_k(
    vectors: Sequence[FeatureVector],
    k_range: Iterable[int],
    seed: int = 0,
) -> list[KSelectionRow]:
    """Run kmeans per k and score each partition; rows sorted by k."""
    ks = sorted(set(int(k) for k in k_range))
    n = len(vectors)
    for k in ks:
        if not 2 <= k <= n - 1:
            raise ValueError(f"k = {k} outside valid range [2, {n - 1}]")
    x = np.stack([v.x for v in vectors])
    rows = []
    for k in ks:
        model = kmeans(vectors, k, seed=seed)
        labels = np.array([model.assignment[v.region_id] for v in vectors])
        rows.append(KSelectionRow(k, model.sse, silhouette(x, labels)))
    return rows


@dataclass
class ModelComparison:
    distances: np.ndarray  # (k_a, k_b) Euclidean centroid distances
    pairs: list[tuple[int, int, float]]  # greedy min-distance matching

    def to_json_dict(self) -> dict:
        return {
            "distances": [row.tolist() for row in self.distances],
            "pairs": [{"a": a, "b": b, "distance": d} for a, b, d in self.pairs],
        }


def compare_models(a: ClusterModel, b: ClusterModel) -> ModelComparison:
    """Pairwise centroid distances plus a greedy minimum-distance matching.

    Greedy: repeatedly take the globally closest unmatched (a, b) pair;
    ties resolve to the lexicographically smallest index pair.
    """
    if a.centroids.shape[1] != b.centroids.shape[1]:
        raise ValueError(
            f"feature length mismatch: {a.centroids.shape[1]} vs {b.centroids.shape[1]}"
        )
    dist = cdist(a.centroids, b.centroids, "euclidean")
    free_a = set(range(a.k))
    free_b = set(range(b.k))
    pairs: list[tuple[int, int, float]] = []
    while free_a and free_b:
        best = min(
            ((dist[i, j], i, j) for i in sorted(free_a) for j in sorted(free_b)),
            key=lambda t: (t[0], t[1], t[2]),
        )
        d, i, j = best
        pairs.append((i, j, float(d)))
        free_a.remove(i)
        free_b.remove(j)
    return ModelComparison(distances=dist, pairs=pairs)


def adjusted_rand_index(labels_a: Sequence[int], labels_b: Sequence[int]) -> float:
    """Chance-corrected partition agreement in [-1, 1]; 1 = identical."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label arrays must be 1-D and equally long")
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(v):
        return v * (v - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0 if sum_ij == expected else 0.0
    return float((sum_ij - expected) / (max_index - expected))
