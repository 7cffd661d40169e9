"""Exception types shared across the engine.

Every error carries a stable ``code`` string so the HTTP layer and the CLI
can report machine-readable failures without inspecting exception classes.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""

    code = "engine_error"

    def __init__(self, message: str = "", *, field: str | None = None):
        super().__init__(message or self.__class__.__name__)
        self.field = field


class DuplicateId(EngineError):
    code = "duplicate_id"

    def __init__(self, object_id: str):
        super().__init__(f"duplicate object id: {object_id!r}")
        self.object_id = object_id


class SchemaViolation(EngineError):
    code = "schema_violation"


class ParseError(EngineError):
    code = "parse_error"

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class FormatError(EngineError):
    code = "format_error"


class NotFound(EngineError):
    code = "not_found"

    def __init__(self, object_id: str, message: str = ""):
        super().__init__(message or f"object not found: {object_id!r}")
        self.object_id = object_id


class DimensionMismatch(EngineError):
    code = "dimension_mismatch"


class UnknownEncoder(EngineError):
    code = "unknown_encoder"


class EncoderUnavailable(EngineError):
    code = "encoder_unavailable"


class DecodeError(EngineError):
    code = "decode_error"


class EmptyTrainingSet(EngineError):
    code = "empty_training_set"


class EmptyCollection(EngineError):
    code = "empty_collection"


class IndexNotBuilt(EngineError):
    code = "index_not_built"


class LLMUnavailable(EngineError):
    code = "llm_unavailable"


class UnknownSession(EngineError):
    code = "unknown_session"

    def __init__(self, session_id: str):
        super().__init__(f"unknown session: {session_id!r}")
        self.session_id = session_id


class Reconfiguring(EngineError):
    code = "reconfiguring"

    def __init__(self):
        super().__init__("system is reconfiguring; retry once milestones settle")


class InvalidQuery(EngineError):
    code = "invalid_query"


class ConfigError(EngineError):
    code = "invalid_config"
