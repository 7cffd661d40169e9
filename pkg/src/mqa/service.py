"""HTTP surface of the coordinator.

Every endpoint is a thin adapter: parse the request, call one coordinator
operation, serialize the outcome. Errors come back as JSON
``{code, message, field?}`` with a status chosen per error class. When a
static directory is supplied the single-page frontend is served from it.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .coordinator import Coordinator, SystemConfig
from .errors import (
    ConfigError,
    DuplicateId,
    EncoderUnavailable,
    EngineError,
    FormatError,
    IndexNotBuilt,
    InvalidQuery,
    LLMUnavailable,
    NotFound,
    ParseError,
    Reconfiguring,
    SchemaViolation,
    UnknownSession,
)
from .frameworks import FrameworkOutcome

_STATUS_BY_ERROR = {
    NotFound: 404,
    UnknownSession: 404,
    Reconfiguring: 409,
    IndexNotBuilt: 409,
    ConfigError: 400,
    InvalidQuery: 400,
    SchemaViolation: 400,
    ParseError: 400,
    DuplicateId: 400,
    FormatError: 400,
    EncoderUnavailable: 502,
    LLMUnavailable: 502,
}


def _error_status(exc: EngineError) -> int:
    for cls, status in _STATUS_BY_ERROR.items():
        if isinstance(exc, cls):
            return status
    return 500


def _outcome_to_dict(outcome: FrameworkOutcome) -> dict:
    body: dict = {"latency_ms": outcome.latency_ms}
    if outcome.error is not None:
        body["error"] = outcome.error
    if outcome.result is not None:
        body.update(outcome.result.as_dict())
    return body


async def _query_fields(request: Request) -> dict:
    """Accept either a JSON body or multipart form with an image part."""
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        fields = {key: form[key] for key in form if key != "image"}
        upload = form.get("image")
        if upload is not None:
            fields["image"] = await upload.read()
        return fields
    body = await request.body()
    if not body:
        return {}
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise InvalidQuery(f"request body is not valid JSON: {exc}") from exc


def _opt_int(fields: dict, key: str) -> int | None:
    value = fields.get(key)
    if value in (None, ""):
        return None
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise InvalidQuery(f"field {key!r} must be an integer") from exc


def create_app(coordinator: Coordinator | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    coordinator = coordinator or Coordinator()
    app = FastAPI(title="mqa", docs_url=None, redoc_url=None)
    app.state.coordinator = coordinator

    @app.exception_handler(EngineError)
    async def engine_error_handler(_request: Request, exc: EngineError):
        body = {"code": exc.code, "message": str(exc)}
        if exc.field:
            body["field"] = exc.field
        return JSONResponse(status_code=_error_status(exc), content=body)

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(_request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(part) for part in first.get("loc", []) if part != "body")
        return JSONResponse(
            status_code=422,
            content={"code": "invalid_config", "message": first.get("msg", "invalid request"),
                     "field": field},
        )

    @app.post("/api/config")
    def post_config(config: SystemConfig):
        milestones = coordinator.configure(config)
        return milestones.snapshot()

    @app.get("/api/status")
    def get_status():
        return coordinator.get_status()

    @app.post("/api/session")
    def post_session():
        return {"session_id": coordinator.open_session()}

    @app.post("/api/query")
    async def post_query(request: Request):
        fields = await _query_fields(request)
        session_id = fields.get("session_id")
        if not session_id:
            raise InvalidQuery("field 'session_id' is required")
        response = coordinator.submit_query(
            str(session_id),
            text=fields.get("text") or None,
            image=fields.get("image"),
            selected_id=fields.get("selected_id") or None,
            k=_opt_int(fields, "k"),
            L=_opt_int(fields, "L"),
            framework=fields.get("framework") or None,
        )
        body = {"session_id": session_id, "turn": response.turn_index,
                "answer": response.answer, "degraded": response.degraded}
        body.update(response.result.as_dict())
        return body

    @app.post("/api/compare")
    async def post_compare(request: Request):
        fields = await _query_fields(request)
        outcomes = coordinator.compare(
            text=fields.get("text") or None,
            image=fields.get("image"),
            selected_id=fields.get("selected_id") or None,
            session_id=fields.get("session_id") or None,
            k=_opt_int(fields, "k"),
            L=_opt_int(fields, "L"),
        )
        return {"frameworks": {name: _outcome_to_dict(out) for name, out in outcomes.items()}}

    @app.get("/api/objects/{object_id}/payload/{modality}")
    def get_payload(object_id: str, modality: str):
        data, content_type = coordinator.get_payload(object_id, modality)
        return Response(content=data, media_type=content_type)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="frontend")

    return app
