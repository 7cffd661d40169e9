"""Unified navigation-graph index: five-stage build pipeline and persistence.

The build decomposes into replaceable stages — random init, candidate
acquisition by graph search, alpha-pruned neighbor selection, reverse-edge
insertion, and entry/reachability finalization — run for a configurable
number of passes (pass 1 with alpha = 1). Everything is deterministic given
the seed: vertices are processed in id order and every tie breaks toward the
smaller vertex id.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .errors import EmptyCollection, FormatError
from .fusion import FusionLayout
from .search import SearchParams, SearchResult, greedy_search

GRAPH_MAGIC = b"MQAG"
GRAPH_VERSION = 1


@dataclass
class BuildParams:
    """Navigation-graph construction parameters."""

    R: int = 32
    L_build: int = 100
    alpha: float = 1.2
    passes: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.R < 2:
            raise ValueError("max out-degree R must be >= 2")
        if self.L_build < self.R:
            raise ValueError("build beam width L_build must be >= R")
        if self.alpha < 1.0:
            raise ValueError("pruning slack alpha must be >= 1")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")


@dataclass
class NavGraph:
    """Bounded-degree directed proximity graph with a designated entry vertex."""

    adjacency: list[list[int]]
    entry: int
    R: int
    repair_edges: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.adjacency)


@dataclass
class GraphReport:
    """Outcome of :func:`validate_graph`."""

    violations: list[str] = field(default_factory=list)
    over_degree: list[int] = field(default_factory=list)
    repair_edges: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def init_graph(n: int, R: int, seed: int) -> list[list[int]]:
    """Stage 1: give each vertex min(R, n-1) distinct random neighbors."""
    if n < 1:
        raise EmptyCollection("cannot build a graph over zero vertices")
    rng = np.random.default_rng(seed)
    degree = min(R, n - 1)
    adjacency: list[list[int]] = []
    for vertex in range(n):
        if degree == 0:
            adjacency.append([])
            continue
        picks = rng.choice(n - 1, size=degree, replace=False)
        adjacency.append([int(p) if p < vertex else int(p) + 1 for p in picks])
    return adjacency


def acquire_candidates(
    graph: NavGraph,
    vectors: np.ndarray,
    vertex: int,
    L_build: int,
    layout: FusionLayout | None = None,
) -> list[tuple[int, float]]:
    """Stage 2: greedy-search the current graph toward a vertex's own vector.

    Returns the expanded (visited) vertices, excluding the vertex itself,
    with their distances to it.
    """
    params = SearchParams(k=1, L=L_build)
    _, visited = greedy_search(
        graph, vectors, vectors[vertex], params, layout=layout, collect_visited=True
    )
    return [(v, d) for v, d in visited if v != vertex]


def select_neighbors(
    vertex: int,
    candidates: list[tuple[int, float]],
    alpha: float,
    R: int,
    vectors: np.ndarray,
) -> list[int]:
    """Stage 3: alpha-pruned neighbor selection (robust prune).

    Repeatedly keeps the unpruned candidate nearest to the vertex, then drops
    every remaining candidate c' that some kept c dominates:
    ``alpha * d(c, c') <= d(vertex, c')``. Squared distances; ties go to the
    smaller id.
    """
    order = sorted({(float(d), int(c)) for c, d in candidates})
    if not order:
        return []
    cand_ids = np.array([c for _, c in order], dtype=np.int64)
    cand_dists = np.array([d for d, _ in order], dtype=np.float64)
    alive = np.ones(len(order), dtype=bool)

    selected: list[int] = []
    while len(selected) < R:
        remaining = np.flatnonzero(alive)
        if remaining.size == 0:
            break
        best = remaining[0]  # order is (distance, id) ascending
        chosen = int(cand_ids[best])
        selected.append(chosen)
        alive[best] = False

        rest = np.flatnonzero(alive)
        if rest.size == 0:
            break
        diff = vectors[cand_ids[rest]] - vectors[chosen]
        d_chosen = np.einsum("ij,ij->i", diff, diff)
        alive[rest[alpha * d_chosen <= cand_dists[rest]]] = False
    return selected


def add_reverse_edges(
    graph: NavGraph,
    vertex: int,
    selected: list[int],
    alpha: float,
    vectors: np.ndarray,
) -> None:
    """Stage 4: insert c -> vertex for each selected c, re-pruning overfull lists."""
    for c in selected:
        neighbors = graph.adjacency[c]
        if vertex in neighbors:
            continue
        neighbors.append(vertex)
        if len(neighbors) > graph.R:
            diff = vectors[neighbors] - vectors[c]
            dists = np.einsum("ij,ij->i", diff, diff)
            pairs = [(int(v), float(d)) for v, d in zip(neighbors, dists)]
            graph.adjacency[c] = select_neighbors(c, pairs, alpha, graph.R, vectors)


def medoid(vectors: np.ndarray) -> int:
    """Vertex minimizing squared distance to the centroid; ties to smaller id."""
    centroid = vectors.mean(axis=0)
    diff = vectors - centroid
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def _reachable_from(adjacency: list[list[int]], start: int) -> np.ndarray:
    reached = np.zeros(len(adjacency), dtype=bool)
    reached[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if not reached[v]:
                reached[v] = True
                queue.append(v)
    return reached


def finalize_entry_and_repair(graph: NavGraph, vectors: np.ndarray) -> NavGraph:
    """Stage 5: fix the entry at the medoid and patch unreachable vertices.

    Each unreachable vertex (ascending id) gains one in-edge from its nearest
    reachable vertex; those edges may push a list past R and are counted in
    ``repair_edges``.
    """
    graph.entry = medoid(vectors)
    reached = _reachable_from(graph.adjacency, graph.entry)
    for u in range(graph.n_vertices):
        if reached[u]:
            continue
        candidates = np.flatnonzero(reached)
        diff = vectors[candidates] - vectors[u]
        dists = np.einsum("ij,ij->i", diff, diff)
        source = int(candidates[int(np.argmin(dists))])
        graph.adjacency[source].append(u)
        graph.repair_edges += 1
        # Everything below u through existing edges becomes reachable too.
        reached[u] = True
        queue = deque([u])
        while queue:
            a = queue.popleft()
            for b in graph.adjacency[a]:
                if not reached[b]:
                    reached[b] = True
                    queue.append(b)
    return graph


def build_index(
    vectors,
    params: BuildParams | None = None,
    layout: FusionLayout | None = None,
) -> NavGraph:
    """Run the five-stage pipeline over fused vectors.

    Candidate sets are widened with each vertex's current neighbors before
    pruning so later passes refine rather than forget the earlier graph.
    """
    params = params or BuildParams()
    vectors = np.ascontiguousarray(np.asarray(vectors, dtype=np.float64))
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise EmptyCollection("build_index requires a non-empty (N, D) matrix")
    n = vectors.shape[0]

    adjacency = init_graph(n, params.R, params.seed)
    graph = NavGraph(adjacency=adjacency, entry=medoid(vectors), R=params.R)

    for pass_no in range(params.passes):
        alpha = 1.0 if pass_no == 0 else params.alpha
        for vertex in range(n):
            candidates = dict(acquire_candidates(graph, vectors, vertex, params.L_build, layout))
            for v in graph.adjacency[vertex]:
                if v not in candidates:
                    diff = vectors[v] - vectors[vertex]
                    candidates[v] = float(diff @ diff)
            selected = select_neighbors(
                vertex, list(candidates.items()), alpha, params.R, vectors
            )
            graph.adjacency[vertex] = selected
            add_reverse_edges(graph, vertex, selected, alpha, vectors)

    return finalize_entry_and_repair(graph, vectors)


def validate_graph(graph: NavGraph) -> GraphReport:
    """Check every NavGraph invariant and report violations."""
    report = GraphReport(repair_edges=graph.repair_edges)
    n = graph.n_vertices
    if not (0 <= graph.entry < n):
        report.violations.append(f"entry {graph.entry} out of range for {n} vertices")
        return report
    for u, neighbors in enumerate(graph.adjacency):
        if any(v == u for v in neighbors):
            report.violations.append(f"vertex {u} has a self-loop")
        if len(set(neighbors)) != len(neighbors):
            report.violations.append(f"vertex {u} has duplicate neighbors")
        if any(not (0 <= v < n) for v in neighbors):
            report.violations.append(f"vertex {u} has an out-of-range neighbor")
        if len(neighbors) > graph.R:
            report.over_degree.append(u)
    reached = _reachable_from(graph.adjacency, graph.entry)
    unreachable = np.flatnonzero(~reached)
    if unreachable.size:
        report.violations.append(
            f"{unreachable.size} vertices unreachable from entry "
            f"(first: {int(unreachable[0])})"
        )
    return report


def save_graph(graph: NavGraph, path) -> int:
    """Binary graph format: magic, version, N, R, entry, then per-vertex
    degree + neighbor ids, all u32 little-endian. Returns bytes written."""
    parts = [
        GRAPH_MAGIC,
        struct.pack("<IIII", GRAPH_VERSION, graph.n_vertices, graph.R, graph.entry),
    ]
    for neighbors in graph.adjacency:
        parts.append(struct.pack(f"<I{len(neighbors)}I", len(neighbors), *neighbors))
    blob = b"".join(parts)
    Path(path).write_bytes(blob)
    return len(blob)


def load_graph(path) -> NavGraph:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 20 or blob[:4] != GRAPH_MAGIC:
        raise FormatError(f"{path}: bad magic, not a graph file")
    version, n, R, entry = struct.unpack_from("<IIII", blob, 4)
    if version != GRAPH_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 20
    adjacency: list[list[int]] = []
    for _ in range(n):
        if offset + 4 > len(blob):
            raise FormatError(f"{path}: truncated adjacency data")
        (degree,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + 4 * degree > len(blob):
            raise FormatError(f"{path}: truncated neighbor list")
        adjacency.append(list(struct.unpack_from(f"<{degree}I", blob, offset)))
        offset += 4 * degree
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes")
    if entry >= n:
        raise FormatError(f"{path}: entry {entry} out of range")
    return NavGraph(adjacency=adjacency, entry=entry, R=R)


class NavGraphIndex(BaseEstimator):
    """Navigation-graph nearest-neighbor index with a fit/search surface.

    Parameters mirror :class:`BuildParams`. After ``fit`` the graph is
    immutable and safe for unlimited concurrent readers.

    Attributes
    ----------
    graph_ : NavGraph
        The built navigation graph.
    vectors_ : ndarray of shape (n_samples, dim)
        The indexed fused vectors (float64).
    """

    def __init__(self, R: int = 32, L_build: int = 100, alpha: float = 1.2,
                 passes: int = 2, seed: int = 0):
        self.R = R
        self.L_build = L_build
        self.alpha = alpha
        self.passes = passes
        self.seed = seed

    def build_params(self) -> BuildParams:
        return BuildParams(R=self.R, L_build=self.L_build, alpha=self.alpha,
                           passes=self.passes, seed=self.seed)

    def fit(self, X, y=None, layout: FusionLayout | None = None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        self.vectors_ = np.ascontiguousarray(X)
        self.layout_ = layout
        self.graph_ = build_index(self.vectors_, self.build_params(), layout)
        return self

    def _check_fitted(self):
        if not hasattr(self, "graph_"):
            raise NotFittedError("NavGraphIndex is not fitted yet")

    def search(self, query, params: SearchParams | None = None, *,
               use_pruning: bool = True) -> SearchResult:
        self._check_fitted()
        return greedy_search(self.graph_, self.vectors_, query, params,
                             layout=self.layout_, use_pruning=use_pruning)

    def kneighbors(self, Q, n_neighbors: int = 10, L: int = 100):
        """Batch query surface: returns (distances, indices) arrays."""
        self._check_fitted()
        Q = check_array(Q, dtype=np.float64)
        params = SearchParams(k=n_neighbors, L=max(L, n_neighbors))
        dists, ids = [], []
        for q in Q:
            result = self.search(q, params)
            ids.append([v for v, _ in result.hits])
            dists.append([d for _, d in result.hits])
        return np.asarray(dists), np.asarray(ids)
