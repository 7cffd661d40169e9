"""Interactive multi-modal query answering engine.

Ingests a multi-modal knowledge base, learns per-modality fusion weights by
contrastive learning, indexes weighted concatenated vectors in one
navigation graph, answers multi-round queries with merging-free search and
incremental-scan pruning, and composes answers through a pluggable LLM
client behind an HTTP coordinator.
"""

from .catalog import KnowledgeBase, ModalityPayload, MultiModalObject, ingest
from .coordinator import Coordinator, SystemConfig
from .encoders import EncoderSpec, QueryContext, build_registry, encode_query
from .frameworks import (
    RetrievalIndexes,
    build_retrieval_indexes,
    compare_frameworks,
    search_je,
    search_mr,
    search_must,
)
from .fusion import (
    FusionLayout,
    ModalityWeightLearner,
    TrainingTriplet,
    fuse,
    learn_weights,
    weighted_distance,
)
from .index import BuildParams, NavGraph, NavGraphIndex, build_index, validate_graph
from .search import (
    ABANDONED,
    SearchParams,
    SearchResult,
    brute_force_topk,
    greedy_search,
    incremental_distance,
)

__version__ = "0.1.0"

__all__ = [
    "ABANDONED",
    "BuildParams",
    "Coordinator",
    "EncoderSpec",
    "FusionLayout",
    "KnowledgeBase",
    "ModalityPayload",
    "ModalityWeightLearner",
    "MultiModalObject",
    "NavGraph",
    "NavGraphIndex",
    "QueryContext",
    "RetrievalIndexes",
    "SearchParams",
    "SearchResult",
    "SystemConfig",
    "TrainingTriplet",
    "brute_force_topk",
    "build_index",
    "build_registry",
    "build_retrieval_indexes",
    "compare_frameworks",
    "encode_query",
    "fuse",
    "greedy_search",
    "incremental_distance",
    "ingest",
    "learn_weights",
    "search_je",
    "search_mr",
    "search_must",
    "validate_graph",
    "weighted_distance",
]
