"""Per-modality encoders behind a registry.

The built-in encoders are deterministic stand-ins for real embedding models:
identical input bytes always produce identical float vectors, so every test
in the suite can assert exact values. Real models plug in through the
external HTTP encoder without touching the rest of the engine.
"""

from __future__ import annotations

import io
import re
import threading
from dataclasses import dataclass, field

import httpx
import numpy as np

from .catalog import KnowledgeBase, ModalityPayload, MultiModalObject
from .errors import (
    DecodeError,
    DimensionMismatch,
    EncoderUnavailable,
    NotFound,
    UnknownEncoder,
)

ENCODER_KINDS = ("hash-ngram", "color-hist", "passthrough-vector", "external-http", "joint-mean")

# Modality-name conventions for wiring free-form query inputs: the query's
# text goes to the modality named "text", uploads and prior-result selections
# go to the modality named "image". Other modalities take explicit vectors.
TEXT_MODALITY = "text"
IMAGE_MODALITY = "image"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def encode_text_hash_ngram(text: str, dimension: int) -> np.ndarray:
    """Signed feature-hashing text encoder.

    Features are whole lowercase tokens plus character trigrams of each
    token; each feature lands in bucket ``fnv1a64(feature) % dimension`` with
    sign taken from hash bit 63. Output is L2-normalized unless all-zero.
    """
    if dimension <= 0:
        raise ValueError("dimension must be positive")
    acc = np.zeros(dimension, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        features = [token]
        features.extend(token[i:i + 3] for i in range(len(token) - 2))
        for feature in features:
            h = fnv1a64(feature.encode("utf-8"))
            sign = 1.0 if h < (1 << 63) else -1.0
            acc[h % dimension] += sign
    norm = float(np.linalg.norm(acc))
    if norm > 0.0:
        acc /= norm
    return acc.astype(np.float32)


def encode_vector_passthrough(values, dimension: int) -> np.ndarray:
    """Hand the caller's vector through unchanged (as float32)."""
    vec = np.asarray(values, dtype=np.float32)
    if vec.shape != (dimension,):
        raise DimensionMismatch(
            f"passthrough expects dimension {dimension}, got shape {vec.shape}"
        )
    return vec


def decode_image(data: bytes) -> np.ndarray:
    """Decode image bytes to an (H, W, 3) uint8 RGB raster."""
    try:
        from PIL import Image

        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc


def encode_image_hist(image, dimension: int = 48) -> np.ndarray:
    """16-bin-per-channel RGB color histogram, L2-normalized (48 dims)."""
    if dimension != 48:
        raise DimensionMismatch("color-hist produces exactly 48 dimensions")
    raster = np.asarray(image)
    if raster.ndim != 3 or raster.shape[2] != 3 or raster.dtype != np.uint8:
        raise DecodeError(f"expected (H, W, 3) uint8 RGB raster, got {raster.shape} {raster.dtype}")
    bins = []
    for channel in range(3):
        values = raster[:, :, channel].reshape(-1) // 16
        bins.append(np.bincount(values, minlength=16).astype(np.float64))
    hist = np.concatenate(bins)
    norm = float(np.linalg.norm(hist))
    if norm > 0.0:
        hist /= norm
    return hist.astype(np.float32)


def joint_encode(vectors) -> np.ndarray:
    """Element-wise mean after zero-padding every vector to the widest modality.

    This deliberately collapses modality-specific structure; it exists as the
    single-channel joint-embedding baseline, not as a good encoder.
    """
    arrays = [np.asarray(v, dtype=np.float64) for v in vectors]
    if not arrays:
        raise ValueError("joint_encode requires at least one modality vector")
    width = max(a.shape[0] for a in arrays)
    padded = np.zeros((len(arrays), width), dtype=np.float64)
    for row, a in enumerate(arrays):
        padded[row, :a.shape[0]] = a
    return padded.mean(axis=0).astype(np.float32)


def joint_encode_matrix(matrices) -> np.ndarray:
    """Row-wise :func:`joint_encode` over per-modality matrices (N, d_m)."""
    arrays = [np.asarray(x, dtype=np.float64) for x in matrices]
    n = arrays[0].shape[0]
    width = max(a.shape[1] for a in arrays)
    acc = np.zeros((n, width), dtype=np.float64)
    for a in arrays:
        acc[:, :a.shape[1]] += a
    return (acc / len(arrays)).astype(np.float32)


@dataclass(frozen=True)
class EncoderSpec:
    """Configuration of one per-modality encoder."""

    id: str
    modality: str
    kind: str
    dimension: int
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise UnknownEncoder(f"unknown encoder kind: {self.kind!r}")
        if self.dimension <= 0:
            raise ValueError("encoder dimension must be positive")
        if self.kind == "external-http" and not self.endpoint:
            raise ValueError("external-http encoder requires an endpoint")


class ExternalEncoderClient:
    """Client for the external encoder protocol.

    POST ``{endpoint}/encode`` with ``{"modality": name, "payload": ...}``;
    the service answers ``{"vector": [...]}``. In-flight requests are bounded
    and every call times out.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, max_inflight: int = 8):
        self.endpoint = endpoint.rstrip("/")
        self._semaphore = threading.BoundedSemaphore(max_inflight)
        self._client = httpx.Client(timeout=timeout)

    def encode(self, modality: str, payload) -> np.ndarray:
        with self._semaphore:
            try:
                response = self._client.post(
                    f"{self.endpoint}/encode",
                    json={"modality": modality, "payload": payload},
                )
            except httpx.HTTPError as exc:
                raise EncoderUnavailable(f"external encoder unreachable: {exc}") from exc
        if response.status_code != 200:
            raise EncoderUnavailable(
                f"external encoder returned HTTP {response.status_code}"
            )
        try:
            vector = response.json()["vector"]
        except Exception as exc:
            raise EncoderUnavailable(f"malformed encoder response: {exc}") from exc
        return np.asarray(vector, dtype=np.float32)


class Encoder:
    """One configured per-modality encoder bound to a knowledge-base root."""

    def __init__(self, spec: EncoderSpec, client: ExternalEncoderClient | None = None):
        self.spec = spec
        if spec.kind == "external-http":
            self.client = client or ExternalEncoderClient(spec.endpoint)
        else:
            self.client = None

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    def encode_text(self, text: str) -> np.ndarray:
        if self.spec.kind == "hash-ngram":
            return encode_text_hash_ngram(text, self.dimension)
        if self.spec.kind == "external-http":
            return self._external(text)
        raise UnknownEncoder(f"{self.spec.kind!r} encoder cannot encode text")

    def encode_image_bytes(self, data: bytes) -> np.ndarray:
        if self.spec.kind == "color-hist":
            return encode_image_hist(decode_image(data), self.dimension)
        if self.spec.kind == "external-http":
            return self._external(data.hex())
        raise UnknownEncoder(f"{self.spec.kind!r} encoder cannot encode image bytes")

    def encode_payload(self, payload: ModalityPayload, root) -> np.ndarray:
        if payload.kind == "inline-vector":
            return encode_vector_passthrough(payload.vector, self.dimension)
        if payload.kind == "inline-text":
            return self.encode_text(payload.text)
        data = (root / payload.path).read_bytes()
        if self.spec.kind == "hash-ngram":
            return self.encode_text(data.decode("utf-8"))
        return self.encode_image_bytes(data)

    def _external(self, payload) -> np.ndarray:
        vec = self.client.encode(self.spec.modality, payload)
        if vec.shape != (self.dimension,):
            raise EncoderUnavailable(
                f"external encoder returned {vec.shape}, expected ({self.dimension},)"
            )
        return vec


def build_registry(specs) -> dict[str, Encoder]:
    """Map modality name to its configured encoder."""
    registry: dict[str, Encoder] = {}
    for spec in specs:
        if spec.kind == "joint-mean":
            continue  # derived channel, not a per-modality encoder
        registry[spec.modality] = Encoder(spec)
    return registry


@dataclass
class QueryContext:
    """One round's query inputs and their encoded per-modality vectors.

    ``selected_id`` points at a prior result whose stored image vector is
    reused verbatim; ``vectors`` may be pre-filled for synthetic workloads.
    """

    text: str | None = None
    image: bytes | None = None
    selected_id: str | None = None
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def has_input(self) -> bool:
        return bool(self.text or self.image or self.selected_id or self.vectors)


def _zero(dim: int) -> np.ndarray:
    return np.zeros(dim, dtype=np.float32)


def encode_object(kb: KnowledgeBase, obj: MultiModalObject, registry: dict[str, Encoder]) -> dict[str, np.ndarray]:
    """One vector per schema modality; missing payloads become zero vectors."""
    vectors: dict[str, np.ndarray] = {}
    for modality, dim in kb.modalities:
        if modality not in registry:
            raise UnknownEncoder(f"no encoder registered for modality {modality!r}")
        payload = obj.payloads.get(modality)
        if payload is None:
            vectors[modality] = _zero(dim)
        else:
            vectors[modality] = registry[modality].encode_payload(payload, kb.root)
    return vectors


def encode_all(kb: KnowledgeBase, registry: dict[str, Encoder]) -> None:
    """Encode every object in place."""
    for obj in kb.objects:
        obj.vectors = encode_object(kb, obj, registry)


def encode_query(kb: KnowledgeBase, context: QueryContext, registry: dict[str, Encoder]) -> dict[str, np.ndarray]:
    """Encode a query context into one vector per schema modality.

    A selected prior result contributes its stored image vector unchanged
    (no re-encoding), pre-filled vectors win over raw inputs, and modalities
    with no input encode to the zero vector.
    """
    vectors: dict[str, np.ndarray] = {}
    for modality, dim in kb.modalities:
        if modality in context.vectors:
            vec = np.asarray(context.vectors[modality], dtype=np.float32)
            if vec.shape != (dim,):
                raise DimensionMismatch(
                    f"query vector for {modality!r} has shape {vec.shape}, expected ({dim},)"
                )
            vectors[modality] = vec
            continue
        if modality == IMAGE_MODALITY and context.selected_id is not None:
            selected = kb.get_object(context.selected_id)
            if selected.vectors is None or modality not in selected.vectors:
                raise NotFound(context.selected_id, f"selected object {context.selected_id!r} has no stored vector")
            vectors[modality] = selected.vectors[modality]
            continue
        if modality not in registry:
            raise UnknownEncoder(f"no encoder registered for modality {modality!r}")
        if modality == TEXT_MODALITY and context.text:
            vectors[modality] = registry[modality].encode_text(context.text)
        elif modality == IMAGE_MODALITY and context.image is not None:
            vectors[modality] = registry[modality].encode_image_bytes(context.image)
        else:
            vectors[modality] = _zero(dim)
    return vectors
