"""The coordinator: single mediation point between interfaces and components.

The HTTP service, the CLI, and any frontend reach the catalog, encoders,
weight learning, index construction, query execution, and answer generation
exclusively through this class. Configuration is exclusive: in-flight
queries drain first and new ones are rejected until milestones settle.
"""

from __future__ import annotations

import mimetypes
import threading
import uuid
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from . import catalog
from .encoders import (
    EncoderSpec,
    QueryContext,
    build_registry,
    encode_all,
    encode_query,
)
from .errors import (
    ConfigError,
    EngineError,
    InvalidQuery,
    NotFound,
    Reconfiguring,
    UnknownSession,
)
from .frameworks import (
    RetrievalIndexes,
    build_retrieval_indexes,
    compare_frameworks,
    run_framework,
)
from .fusion import FusionLayout, check_weights, load_triplets, uniform_weights
from .index import BuildParams
from .llm import make_llm_client
from .search import SearchParams, SearchResult

STAGES = ("data_preprocessing", "vector_representation", "index_construction")
_STATUS_RANK = {"pending": 0, "running": 1, "done": 2, "failed": 2}


class EncoderConfig(BaseModel):
    modality: str
    kind: Literal["hash-ngram", "color-hist", "passthrough-vector", "external-http"]
    dimension: int = Field(gt=0)
    endpoint: Optional[str] = None

    @model_validator(mode="after")
    def _endpoint_required(self):
        if self.kind == "external-http" and not self.endpoint:
            raise ValueError("external-http encoder requires an endpoint")
        return self


class KnowledgeBaseConfig(BaseModel):
    name: str = "default"
    manifest: Optional[str] = None
    ingest_enabled: bool = True


class WeightsConfig(BaseModel):
    mode: Literal["learned", "uniform", "manual"] = "uniform"
    values: Optional[list[float]] = None
    triplets: Optional[str] = None
    margin: float = 0.1
    learning_rate: float = 0.05
    epochs: int = Field(default=100, gt=0)

    @model_validator(mode="after")
    def _mode_inputs(self):
        if self.mode == "manual":
            if not self.values:
                raise ValueError("manual weights mode requires values")
            values = np.asarray(self.values, dtype=np.float64)
            if np.any(values < 0) or abs(float(values.sum()) - 1.0) > 1e-6:
                raise ValueError("manual weights must lie on the simplex (non-negative, sum 1)")
        if self.mode == "learned" and not self.triplets:
            raise ValueError("learned weights mode requires a triplets file")
        return self


class IndexConfig(BaseModel):
    R: int = Field(default=32, ge=2)
    L_build: int = Field(default=100, ge=2)
    alpha: float = Field(default=1.2, ge=1.0)
    passes: int = Field(default=2, ge=1)
    seed: int = 0
    frameworks: list[Literal["MUST", "MR", "JE"]] = Field(default_factory=lambda: ["MUST"])

    @model_validator(mode="after")
    def _beam_covers_degree(self):
        if self.L_build < self.R:
            raise ValueError("L_build must be >= R")
        return self

    def build_params(self) -> BuildParams:
        return BuildParams(R=self.R, L_build=self.L_build, alpha=self.alpha,
                           passes=self.passes, seed=self.seed)


class RetrievalConfig(BaseModel):
    k: int = Field(default=10, ge=1)
    L: int = Field(default=100, ge=1)
    framework: Literal["MUST", "MR", "JE"] = "MUST"

    @model_validator(mode="after")
    def _beam_covers_k(self):
        if self.L < self.k:
            raise ValueError("L must be >= k")
        return self


class LLMConfig(BaseModel):
    provider: Literal["template", "external"] = "template"
    endpoint: Optional[str] = None
    model: str = "default"
    temperature: float = Field(default=0.2, ge=0.0, le=2.0)

    @model_validator(mode="after")
    def _endpoint_required(self):
        if self.provider == "external" and not self.endpoint:
            raise ValueError("external LLM provider requires an endpoint")
        return self


class SystemConfig(BaseModel):
    """Complete system configuration, validated field by field."""

    knowledge_base: KnowledgeBaseConfig
    encoders: list[EncoderConfig] = Field(default_factory=list)
    weights: WeightsConfig = Field(default_factory=WeightsConfig)
    index: IndexConfig = Field(default_factory=IndexConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    llm: LLMConfig = Field(default_factory=LLMConfig)

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.knowledge_base.ingest_enabled:
            if not self.knowledge_base.manifest:
                raise ValueError("ingest-enabled configuration requires a manifest path")
            if not self.encoders:
                raise ValueError("ingest-enabled configuration requires at least one encoder")
        names = [e.modality for e in self.encoders]
        if len(set(names)) != len(names):
            raise ValueError("encoder modalities must be unique")
        if self.weights.mode == "manual" and self.values_length() != len(self.encoders):
            raise ValueError("manual weights must cover every configured modality")
        if self.retrieval.framework not in self.index.frameworks:
            raise ValueError(
                f"default retrieval framework {self.retrieval.framework} is not in "
                f"index.frameworks {self.index.frameworks}"
            )
        return self

    def values_length(self) -> int:
        return len(self.weights.values or [])

    def schema(self) -> list[tuple[str, int]]:
        return [(e.modality, e.dimension) for e in self.encoders]

    def encoder_specs(self) -> list[EncoderSpec]:
        return [
            EncoderSpec(id=f"{e.kind}:{e.modality}", modality=e.modality, kind=e.kind,
                        dimension=e.dimension, endpoint=e.endpoint)
            for e in self.encoders
        ]


class Milestones:
    """Per-stage status with monotone transitions and human-readable details."""

    def __init__(self):
        self.stages = {stage: "pending" for stage in STAGES}
        self.details = {stage: "" for stage in STAGES}
        self.llm_only = False

    def transition(self, stage: str, status: str, detail: str | None = None) -> None:
        current = self.stages[stage]
        if _STATUS_RANK[status] < _STATUS_RANK[current]:
            raise ValueError(f"stage {stage} cannot move {current} -> {status}")
        if current in ("done", "failed") and status != current:
            raise ValueError(f"stage {stage} already settled as {current}")
        self.stages[stage] = status
        if detail is not None:
            self.details[stage] = detail

    def snapshot(self) -> dict:
        return {
            "stages": dict(self.stages),
            "details": dict(self.details),
            "llm_only": self.llm_only,
        }


@dataclass
class Turn:
    """One completed dialogue round."""

    context: QueryContext
    result: SearchResult
    answer: str
    degraded: bool = False


@dataclass
class Session:
    """Multi-round dialogue state; history is append-only."""

    id: str
    turns: list[Turn] = field(default_factory=list)
    active_selection: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class TurnResponse:
    answer: str
    degraded: bool
    result: SearchResult
    turn_index: int


class Coordinator:
    """Owns all components and serializes configuration against queries."""

    def __init__(self):
        self._lock = threading.Lock()
        self._idle = threading.Condition(self._lock)
        self._configuring = False
        self._active_queries = 0

        self.milestones = Milestones()
        self.config: SystemConfig | None = None
        self.kb: catalog.KnowledgeBase | None = None
        self.registry = None
        self.layout: FusionLayout | None = None
        self.weights: np.ndarray | None = None
        self.indexes: RetrievalIndexes | None = None
        self.llm = None
        self.llm_only = False
        self._sessions: dict[str, Session] = {}

    # -- configuration -----------------------------------------------------

    def configure(self, config: SystemConfig) -> Milestones:
        with self._lock:
            if self._configuring:
                raise Reconfiguring()
            self._configuring = True
            while self._active_queries:
                self._idle.wait()
        try:
            return self._run_configure(config)
        finally:
            with self._lock:
                self._configuring = False

    def _run_configure(self, config: SystemConfig) -> Milestones:
        milestones = Milestones()
        self.milestones = milestones
        self.config = config
        self.llm = make_llm_client(config.llm.provider, config.llm.endpoint,
                                   config.llm.model, config.llm.temperature)

        if not config.knowledge_base.ingest_enabled:
            self.kb = None
            self.indexes = None
            self.llm_only = True
            milestones.llm_only = True
            milestones.transition("data_preprocessing", "running")
            milestones.transition(
                "data_preprocessing", "done",
                "external knowledge ingestion disabled; answering with the LLM only",
            )
            self.milestones.details["vector_representation"] = "skipped (LLM-only mode)"
            self.milestones.details["index_construction"] = "skipped (LLM-only mode)"
            return milestones
        self.llm_only = False

        # Stage: data preprocessing.
        milestones.transition("data_preprocessing", "running")
        try:
            kb = catalog.ingest(config.knowledge_base.manifest, config.schema(),
                                name=config.knowledge_base.name)
        except (EngineError, OSError) as exc:
            milestones.transition("data_preprocessing", "failed", str(exc))
            return milestones
        coverage = ", ".join(f"{m}={c}/{len(kb)}" for m, c in kb.coverage().items())
        milestones.transition("data_preprocessing", "done",
                              f"{len(kb)} objects ingested; coverage: {coverage}")

        # Stage: vector representation (encoders + modality weights).
        milestones.transition("vector_representation", "running")
        try:
            registry = build_registry(config.encoder_specs())
            encode_all(kb, registry)
            layout = FusionLayout.from_schema(kb.modalities)
            weights = self._resolve_weights(config, layout)
        except EngineError as exc:
            milestones.transition("vector_representation", "failed", str(exc))
            return milestones
        encoder_desc = ", ".join(f"{e.modality}={e.kind}({e.dimension})" for e in config.encoders)
        weight_desc = "[" + ", ".join(f"{w:.4f}" for w in weights) + "]"
        milestones.transition(
            "vector_representation", "done",
            f"encoders: {encoder_desc}; {len(kb.modalities)} modalities; "
            f"weights ({config.weights.mode}): {weight_desc}",
        )

        # Stage: index construction.
        milestones.transition("index_construction", "running")
        try:
            indexes = build_retrieval_indexes(
                [obj.id for obj in kb.objects],
                layout,
                {m: kb.modality_matrix(m) for m in kb.modality_names},
                weights,
                config.index.build_params(),
                frameworks=config.index.frameworks,
            )
        except EngineError as exc:
            milestones.transition("index_construction", "failed", str(exc))
            return milestones
        params = config.index
        milestones.transition(
            "index_construction", "done",
            f"navigation graph R={params.R} L_build={params.L_build} "
            f"alpha={params.alpha} passes={params.passes}; "
            f"frameworks: {', '.join(params.frameworks)}; "
            f"retrieval k={config.retrieval.k} L={config.retrieval.L} "
            f"default={config.retrieval.framework}; "
            f"LLM: {config.llm.provider} ({config.llm.model}, T={config.llm.temperature})",
        )

        self.kb = kb
        self.registry = registry
        self.layout = layout
        self.weights = weights
        self.indexes = indexes
        return milestones

    def _resolve_weights(self, config: SystemConfig, layout: FusionLayout) -> np.ndarray:
        n = len(layout.modalities)
        if config.weights.mode == "uniform":
            return uniform_weights(n)
        if config.weights.mode == "manual":
            return check_weights(config.weights.values, n)
        triplets = load_triplets(config.weights.triplets, layout.modalities)
        from .fusion import learn_weights

        return learn_weights(triplets, margin=config.weights.margin,
                             lr=config.weights.learning_rate,
                             epochs=config.weights.epochs)

    # -- status and sessions -------------------------------------------------

    def get_status(self) -> dict:
        snapshot = self.milestones.snapshot()
        snapshot["configured"] = self.config is not None
        return snapshot

    def open_session(self) -> str:
        session_id = uuid.uuid4().hex
        self._sessions[session_id] = Session(id=session_id)
        return session_id

    def get_session(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    # -- queries -------------------------------------------------------------

    def _begin_query(self):
        with self._lock:
            if self._configuring:
                raise Reconfiguring()
            self._active_queries += 1

    def _end_query(self):
        with self._lock:
            self._active_queries -= 1
            self._idle.notify_all()

    def _make_params(self, k=None, L=None, framework=None, weight_override=None) -> SearchParams:
        base = self.config.retrieval if self.config else RetrievalConfig()
        override = None
        if weight_override is not None:
            override = check_weights(weight_override, len(self.layout.modalities))
        return SearchParams(
            k=k if k is not None else base.k,
            L=L if L is not None else base.L,
            framework=framework if framework is not None else base.framework,
            weight_override=override,
        )

    def _build_context(self, session: Session, text, image, selected_id) -> QueryContext:
        if not (text or image is not None or selected_id):
            raise InvalidQuery("a query needs text, an image, or a selected result")
        if selected_id is not None:
            if not session.turns:
                raise NotFound(selected_id, "no prior results to select from")
            last_ids = [h[0] for h in session.turns[-1].result.hits]
            if selected_id not in last_ids:
                raise NotFound(selected_id,
                               f"selected id {selected_id!r} is not in the latest results")
        return QueryContext(text=text, image=image, selected_id=selected_id)

    def submit_query(self, session_id: str, text: str | None = None,
                     image: bytes | None = None, selected_id: str | None = None,
                     k: int | None = None, L: int | None = None,
                     framework: str | None = None,
                     weight_override=None) -> TurnResponse:
        """Run one dialogue turn: retrieve, generate, record, respond.

        The query and its results both reach the LLM; any LLM failure
        degrades to the template answer and never drops results.
        """
        if self.config is None:
            raise ConfigError("system is not configured yet")
        session = self.get_session(session_id)
        with session.lock:
            self._begin_query()
            try:
                context = self._build_context(session, text, image, selected_id)
                if self.llm_only:
                    result = SearchResult()
                else:
                    context.vectors = encode_query(self.kb, context, self.registry)
                    params = self._make_params(k, L, framework, weight_override)
                    result = run_framework(self.indexes, params.framework,
                                           context.vectors, params)

                degraded = False
                try:
                    answer = self.llm.generate(text, result)
                except EngineError:
                    answer = make_llm_client("template").generate(text, result)
                    degraded = True

                turn = Turn(context=context, result=result, answer=answer, degraded=degraded)
                session.turns.append(turn)
                session.active_selection = selected_id
                return TurnResponse(answer=answer, degraded=degraded, result=result,
                                    turn_index=len(session.turns) - 1)
            finally:
                self._end_query()

    def compare(self, text: str | None = None, image: bytes | None = None,
                selected_id: str | None = None, session_id: str | None = None,
                k: int | None = None, L: int | None = None):
        """Run all frameworks on one query without recording a turn."""
        if self.config is None:
            raise ConfigError("system is not configured yet")
        if self.llm_only or self.indexes is None:
            raise InvalidQuery("comparison requires retrieval to be configured")
        session = self.get_session(session_id) if session_id else Session(id="")
        self._begin_query()
        try:
            context = self._build_context(session, text, image, selected_id)
            context.vectors = encode_query(self.kb, context, self.registry)
            params = self._make_params(k, L, "MUST", None)
            return compare_frameworks(self.indexes, context.vectors, params)
        finally:
            self._end_query()

    # -- payload serving -------------------------------------------------------

    def get_payload(self, object_id: str, modality: str) -> tuple[bytes, str]:
        """Raw modality content for UI display, with a content type."""
        if self.kb is None:
            raise NotFound(object_id, "no knowledge base is loaded")
        obj = self.kb.get_object(object_id)
        payload = obj.payloads.get(modality)
        if payload is None:
            raise NotFound(object_id, f"object {object_id!r} has no {modality!r} payload")
        if payload.kind == "inline-text":
            return payload.text.encode("utf-8"), "text/plain; charset=utf-8"
        if payload.kind == "inline-vector":
            import json

            return json.dumps(list(payload.vector)).encode("utf-8"), "application/json"
        data = (self.kb.root / payload.path).read_bytes()
        guessed, _ = mimetypes.guess_type(payload.path)
        return data, guessed or "application/octet-stream"
