"""Retrieval frameworks over a shared index set.

MUST fuses the query and runs one merging-free search on the unified graph.
MR searches one graph per modality and reranks the union by the full
weighted distance. JE collapses everything into the joint-mean space and
searches a single channel there.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .encoders import joint_encode, joint_encode_matrix
from .errors import EngineError, IndexNotBuilt
from .fusion import FusionLayout, check_weights, fuse, fuse_matrix
from .index import BuildParams, NavGraphIndex
from .search import FRAMEWORKS, SearchParams, SearchResult, SearchStats


@dataclass
class RetrievalIndexes:
    """Everything the three frameworks need, built once per configuration."""

    object_ids: list[str]
    layout: FusionLayout
    weights: np.ndarray
    modality_vectors: dict[str, np.ndarray]
    unified: NavGraphIndex | None = None
    per_modality: dict[str, NavGraphIndex] = field(default_factory=dict)
    joint: NavGraphIndex | None = None

    def built_frameworks(self) -> list[str]:
        out = []
        if self.unified is not None:
            out.append("MUST")
        if self.per_modality:
            out.append("MR")
        if self.joint is not None:
            out.append("JE")
        return out


def build_retrieval_indexes(
    object_ids,
    layout: FusionLayout,
    modality_vectors: dict[str, np.ndarray],
    weights,
    params: BuildParams | None = None,
    frameworks=("MUST",),
) -> RetrievalIndexes:
    """Build the index families named in ``frameworks`` over one collection."""
    params = params or BuildParams()
    weights = check_weights(weights, len(layout.modalities))
    matrices = [np.asarray(modality_vectors[m], dtype=np.float64) for m in layout.modalities]
    indexes = RetrievalIndexes(
        object_ids=list(object_ids),
        layout=layout,
        weights=weights,
        modality_vectors={m: x for m, x in zip(layout.modalities, matrices)},
    )

    def make_index() -> NavGraphIndex:
        return NavGraphIndex(R=params.R, L_build=params.L_build, alpha=params.alpha,
                             passes=params.passes, seed=params.seed)

    if "MUST" in frameworks:
        fused = fuse_matrix(matrices, weights)
        indexes.unified = make_index().fit(fused, layout=layout)
    if "MR" in frameworks:
        for modality, matrix in zip(layout.modalities, matrices):
            indexes.per_modality[modality] = make_index().fit(matrix)
    if "JE" in frameworks:
        joint = joint_encode_matrix(matrices).astype(np.float64)
        indexes.joint = make_index().fit(joint)
    return indexes


def _ordered_segments(indexes: RetrievalIndexes, query_vectors: dict[str, np.ndarray]):
    return [np.asarray(query_vectors[m], dtype=np.float64) for m in indexes.layout.modalities]


def _to_object_hits(indexes: RetrievalIndexes, hits) -> list[tuple[str, float]]:
    named = [(indexes.object_ids[v], d) for v, d in hits]
    return sorted(named, key=lambda h: (h[1], h[0]))


def search_must(indexes: RetrievalIndexes, query_vectors: dict[str, np.ndarray],
                params: SearchParams | None = None) -> SearchResult:
    """Merging-free search: fuse the query, one pass over the unified graph.

    A weight override re-fuses the query with the override while the index
    keeps its build-time weights, which makes the result approximate whenever
    the two disagree.
    """
    params = params or SearchParams()
    if indexes.unified is None:
        raise IndexNotBuilt("unified index has not been built")
    weights = indexes.weights if params.weight_override is None else check_weights(
        params.weight_override, len(indexes.layout.modalities)
    )
    fused_query = fuse(_ordered_segments(indexes, query_vectors), weights)
    raw = indexes.unified.search(fused_query, params)
    return SearchResult(hits=_to_object_hits(indexes, raw.hits), stats=raw.stats)


def search_mr(indexes: RetrievalIndexes, query_vectors: dict[str, np.ndarray],
              params: SearchParams | None = None) -> SearchResult:
    """Multi-streamed baseline: per-modality searches, union, rerank.

    Every modality gets the full beam budget; union members are reranked by
    the exact weighted distance (each rerank counts as one full evaluation).
    """
    params = params or SearchParams()
    if not indexes.per_modality:
        raise IndexNotBuilt("per-modality indexes have not been built")
    weights = indexes.weights if params.weight_override is None else check_weights(
        params.weight_override, len(indexes.layout.modalities)
    )

    stats = SearchStats()
    union: set[int] = set()
    channel_params = SearchParams(k=params.L, L=params.L)
    for modality in indexes.layout.modalities:
        q = np.asarray(query_vectors[modality], dtype=np.float64)
        result = indexes.per_modality[modality].search(q, channel_params)
        stats = stats.merge(result.stats)
        union.update(v for v, _ in result.hits)

    members = sorted(union)
    totals = np.zeros(len(members), dtype=np.float64)
    for m, modality in enumerate(indexes.layout.modalities):
        matrix = indexes.modality_vectors[modality]
        q = np.asarray(query_vectors[modality], dtype=np.float64)
        diff = matrix[members] - q
        totals += weights[m] * np.einsum("ij,ij->i", diff, diff)
    stats.full_evals += len(members)

    hits = sorted(
        ((indexes.object_ids[v], float(d)) for v, d in zip(members, totals)),
        key=lambda h: (h[1], h[0]),
    )[:params.k]
    return SearchResult(hits=hits, stats=stats)


def search_je(indexes: RetrievalIndexes, query_vectors: dict[str, np.ndarray],
              params: SearchParams | None = None) -> SearchResult:
    """Joint-embedding baseline: one search in the collapsed joint space."""
    params = params or SearchParams()
    if indexes.joint is None:
        raise IndexNotBuilt("joint-embedding index has not been built")
    joint_query = joint_encode(_ordered_segments(indexes, query_vectors)).astype(np.float64)
    raw = indexes.joint.search(joint_query, params)
    return SearchResult(hits=_to_object_hits(indexes, raw.hits), stats=raw.stats)


_DISPATCH = {"MUST": search_must, "MR": search_mr, "JE": search_je}


def run_framework(indexes: RetrievalIndexes, framework: str,
                  query_vectors: dict[str, np.ndarray],
                  params: SearchParams | None = None) -> SearchResult:
    if framework not in _DISPATCH:
        raise ValueError(f"framework must be one of {FRAMEWORKS}")
    return _DISPATCH[framework](indexes, query_vectors, params)


@dataclass
class FrameworkOutcome:
    """One framework's result (or failure) on the shared query."""

    framework: str
    result: SearchResult | None = None
    error: str | None = None
    latency_ms: float = 0.0


def compare_frameworks(indexes: RetrievalIndexes, query_vectors: dict[str, np.ndarray],
                       params: SearchParams | None = None) -> dict[str, FrameworkOutcome]:
    """Run MUST, MR, and JE on the identical query; failures don't mask the rest."""
    outcomes: dict[str, FrameworkOutcome] = {}
    for framework in FRAMEWORKS:
        start = time.perf_counter()
        try:
            result = run_framework(indexes, framework, query_vectors, params)
            outcome = FrameworkOutcome(framework=framework, result=result)
        except EngineError as exc:
            outcome = FrameworkOutcome(framework=framework, error=str(exc))
        outcome.latency_ms = (time.perf_counter() - start) * 1000.0
        outcomes[framework] = outcome
    return outcomes
