"""Graph search primitives: incremental-scan distances, greedy beam search,
and the brute-force oracle.

Distances are squared Euclidean throughout. Partial sums over fused-vector
segments are monotone non-decreasing, which makes incremental abandonment
exact: a candidate abandoned at threshold tau has true distance above tau and
could never have entered the result pool.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import DimensionMismatch
from .fusion import FusionLayout

if TYPE_CHECKING:
    from .index import NavGraph


class _Abandoned:
    """Sentinel returned when an incremental scan exceeds its threshold."""

    def __repr__(self) -> str:
        return "ABANDONED"


ABANDONED = _Abandoned()

FRAMEWORKS = ("MUST", "MR", "JE")


@dataclass
class SearchParams:
    """Retrieval settings a user can change per query."""

    k: int = 10
    L: int = 100
    framework: str = "MUST"
    weight_override: np.ndarray | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.L < self.k:
            raise ValueError("beam width L must be >= k")
        if self.framework not in FRAMEWORKS:
            raise ValueError(f"framework must be one of {FRAMEWORKS}")


@dataclass
class SearchStats:
    """Work counters for one query."""

    visited: int = 0
    full_evals: int = 0
    abandoned: int = 0

    def merge(self, other: "SearchStats") -> "SearchStats":
        return SearchStats(
            visited=self.visited + other.visited,
            full_evals=self.full_evals + other.full_evals,
            abandoned=self.abandoned + other.abandoned,
        )


@dataclass
class SearchResult:
    """Ranked hits plus the work it took to find them.

    ``hits`` is ordered by (distance, id) ascending; ids are vertex ints at
    the index layer and object-id strings at the framework layer.
    """

    hits: list[tuple] = field(default_factory=list)
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def ids(self) -> list:
        return [h[0] for h in self.hits]

    @property
    def distances(self) -> list[float]:
        return [h[1] for h in self.hits]

    def as_dict(self) -> dict:
        return {
            "results": [
                {"rank": rank, "id": object_id, "distance": float(distance)}
                for rank, (object_id, distance) in enumerate(self.hits, start=1)
            ],
            "stats": {
                "visited": self.stats.visited,
                "full_evals": self.stats.full_evals,
                "abandoned": self.stats.abandoned,
            },
        }


def incremental_distance(q, o, layout: FusionLayout | None = None, threshold: float = np.inf):
    """Squared distance accumulated segment by segment, abandoning past ``threshold``.

    Returns the full distance, or :data:`ABANDONED` as soon as a partial sum
    exceeds the threshold.
    """
    q = np.asarray(q, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    if q.shape != o.shape:
        raise DimensionMismatch(f"fused shapes differ: {q.shape} vs {o.shape}")
    if layout is None:
        segments = [(0, q.shape[0])]
    else:
        if layout.total_dim != q.shape[0]:
            raise DimensionMismatch(
                f"layout covers {layout.total_dim} dims, vectors have {q.shape[0]}"
            )
        offsets = layout.offsets
        segments = [(offsets[m], offsets[m + 1]) for m in range(len(layout.dims))]

    total = 0.0
    for start, end in segments:
        diff = q[start:end] - o[start:end]
        total += float(diff @ diff)
        if total > threshold:
            return ABANDONED
    return total


def _batch_distances(vectors: np.ndarray, ids, query: np.ndarray) -> np.ndarray:
    rows = vectors[ids]
    diff = rows - query
    return np.einsum("ij,ij->i", diff, diff)


def greedy_search(
    graph: "NavGraph",
    vectors: np.ndarray,
    query,
    params: SearchParams | None = None,
    *,
    layout: FusionLayout | None = None,
    use_pruning: bool = True,
    collect_visited: bool = False,
):
    """Best-first beam search over a navigation graph.

    The pool keeps the best ``L`` candidates seen; the nearest unexpanded
    pool member is expanded until none remains closer than the pool's L-th
    best. Neighbor distances run through the incremental scan with the
    current L-th best distance as threshold (infinite until the pool fills),
    so abandoned candidates are exactly those that could not enter the pool.
    Ties break by smaller vertex id everywhere.

    With ``collect_visited`` the return value is ``(result, visited)`` where
    ``visited`` lists the expanded vertices with their distances in expansion
    order.
    """
    params = params or SearchParams()
    query = np.asarray(query, dtype=np.float64)
    n = graph.n_vertices
    if vectors.shape[0] != n:
        raise DimensionMismatch("vector count does not match graph size")
    if query.shape != (vectors.shape[1],):
        raise DimensionMismatch(
            f"query has shape {query.shape}, index dimension is {vectors.shape[1]}"
        )
    k, beam = params.k, params.L

    stats = SearchStats()
    seen = np.zeros(n, dtype=bool)
    adjacency = graph.adjacency
    entry = graph.entry

    d_entry = incremental_distance(query, vectors[entry], layout)
    stats.full_evals += 1
    seen[entry] = True

    frontier = [(d_entry, entry)]  # min-heap of unexpanded pool admits
    pool: list[tuple[float, int]] = [(-d_entry, -entry)]  # max-heap via negation
    visited: list[tuple[int, float]] = []

    while frontier:
        dist, vertex = heapq.heappop(frontier)
        if len(pool) == beam:
            worst_d, worst_id = -pool[0][0], -pool[0][1]
            if (dist, vertex) > (worst_d, worst_id):
                break
        visited.append((vertex, dist))
        stats.visited += 1

        fresh = [v for v in adjacency[vertex] if not seen[v]]
        if not fresh:
            continue
        seen[fresh] = True

        dists = _batch_distances(vectors, fresh, query)
        for neighbor, d in zip(fresh, dists):
            d = float(d)
            # Prefix sums are monotone, so a segment scan abandons iff the
            # total exceeds tau; the counters follow that semantics exactly.
            if use_pruning and len(pool) == beam and d > -pool[0][0]:
                stats.abandoned += 1
                continue
            stats.full_evals += 1
            if len(pool) < beam:
                heapq.heappush(pool, (-d, -neighbor))
                heapq.heappush(frontier, (d, neighbor))
            else:
                worst_d, worst_id = -pool[0][0], -pool[0][1]
                if (d, neighbor) < (worst_d, worst_id):
                    heapq.heapreplace(pool, (-d, -neighbor))
                    heapq.heappush(frontier, (d, neighbor))

    ranked = sorted((-nd, -nv) for nd, nv in pool)
    result = SearchResult(hits=[(v, d) for d, v in ranked[:k]], stats=stats)
    if collect_visited:
        return result, visited
    return result


def brute_force_topk(vectors: np.ndarray, query, k: int, layout: FusionLayout | None = None) -> SearchResult:
    """Exact top-k by full squared distance; ties break by smaller id."""
    vectors = np.asarray(vectors, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (vectors.shape[1],):
        raise DimensionMismatch(
            f"query has shape {query.shape}, vectors have dimension {vectors.shape[1]}"
        )
    diff = vectors - query
    dists = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((np.arange(len(dists)), dists))[:k]
    hits = [(int(i), float(dists[i])) for i in order]
    n = vectors.shape[0]
    return SearchResult(hits=hits, stats=SearchStats(visited=n, full_evals=n, abandoned=0))
