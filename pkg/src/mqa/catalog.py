"""Knowledge-base ingestion and bit-exact persistence of vectors and weights.

A knowledge base is an immutable, ordered collection of multi-modal objects.
Position in the manifest is the internal vertex id, so arrays (not maps) can
carry vectors and adjacency through the hot paths.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicateId, FormatError, NotFound, ParseError, SchemaViolation

VECTORS_MAGIC = b"MQAV"
VECTORS_VERSION = 1

PAYLOAD_KINDS = ("inline-text", "inline-vector", "file-path")


@dataclass(frozen=True)
class ModalityPayload:
    """Raw content for one modality of one object. Exactly one field is set."""

    kind: str
    text: str | None = None
    vector: tuple[float, ...] | None = None
    path: str | None = None

    def __post_init__(self):
        if self.kind not in PAYLOAD_KINDS:
            raise ValueError(f"unknown payload kind: {self.kind!r}")
        populated = [
            name
            for name, value in (("text", self.text), ("vector", self.vector), ("path", self.path))
            if value is not None
        ]
        expected = {"inline-text": "text", "inline-vector": "vector", "file-path": "path"}[self.kind]
        if populated != [expected]:
            raise ValueError(f"payload kind {self.kind!r} requires exactly the {expected!r} field")

    @classmethod
    def inline_text(cls, text: str) -> "ModalityPayload":
        return cls(kind="inline-text", text=text)

    @classmethod
    def inline_vector(cls, values) -> "ModalityPayload":
        return cls(kind="inline-vector", vector=tuple(float(v) for v in values))

    @classmethod
    def file_path(cls, path: str) -> "ModalityPayload":
        return cls(kind="file-path", path=path)

    @classmethod
    def from_json(cls, obj: dict) -> "ModalityPayload":
        if not isinstance(obj, dict) or len(obj) != 1:
            raise ValueError("payload must be an object with exactly one of inline/path/vector")
        key, value = next(iter(obj.items()))
        if key == "inline":
            return cls.inline_text(str(value))
        if key == "path":
            return cls.file_path(str(value))
        if key == "vector":
            return cls.inline_vector(value)
        raise ValueError(f"unknown payload key: {key!r}")

    def to_json(self) -> dict:
        if self.kind == "inline-text":
            return {"inline": self.text}
        if self.kind == "file-path":
            return {"path": self.path}
        return {"vector": list(self.vector)}


@dataclass
class MultiModalObject:
    """One knowledge-base entry: unique id, per-modality payloads, vectors."""

    id: str
    payloads: dict[str, ModalityPayload]
    vectors: dict[str, np.ndarray] | None = None


@dataclass
class KnowledgeBase:
    """Immutable object collection with a fixed modality schema.

    ``modalities`` order is the schema order used everywhere downstream;
    object position is the internal vertex id.
    """

    name: str
    modalities: list[tuple[str, int]]
    objects: list[MultiModalObject]
    ingest_enabled: bool = True
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        self._index = {}
        for position, obj in enumerate(self.objects):
            if obj.id in self._index:
                raise DuplicateId(obj.id)
            self._index[obj.id] = position

    def __len__(self) -> int:
        return len(self.objects)

    @property
    def modality_names(self) -> list[str]:
        return [name for name, _ in self.modalities]

    def dimension(self, modality: str) -> int:
        for name, dim in self.modalities:
            if name == modality:
                return dim
        raise SchemaViolation(f"unknown modality: {modality!r}")

    def vertex_id(self, object_id: str) -> int:
        if object_id not in self._index:
            raise NotFound(object_id)
        return self._index[object_id]

    def get_object(self, object_id: str) -> MultiModalObject:
        return self.objects[self.vertex_id(object_id)]

    def coverage(self) -> dict[str, int]:
        """Number of objects carrying a payload, per modality."""
        counts = {name: 0 for name, _ in self.modalities}
        for obj in self.objects:
            for modality in obj.payloads:
                counts[modality] += 1
        return counts

    def modality_matrix(self, modality: str) -> np.ndarray:
        """All objects' vectors for one modality as an (N, d) float64 matrix."""
        dim = self.dimension(modality)
        out = np.zeros((len(self.objects), dim), dtype=np.float64)
        for position, obj in enumerate(self.objects):
            if obj.vectors is None:
                raise ValueError(f"object {obj.id!r} has not been encoded")
            out[position] = obj.vectors[modality]
        return out


def get_object(kb: KnowledgeBase, object_id: str) -> MultiModalObject:
    return kb.get_object(object_id)


def ingest(manifest_path, schema, name: str = "", ingest_enabled: bool = True) -> KnowledgeBase:
    """Read a JSON-lines manifest into a :class:`KnowledgeBase`.

    Each line is ``{"id": ..., "modalities": {name: {"inline"|"path"|"vector": ...}}}``.
    Objects keep manifest order; vectors are left unset. Referenced files must
    resolve relative to the manifest directory.
    """
    manifest_path = Path(manifest_path)
    schema = [(str(n), int(d)) for n, d in schema]
    known = {n: d for n, d in schema}
    root = manifest_path.parent

    objects: list[MultiModalObject] = []
    seen: set[str] = set()
    with manifest_path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict) or "id" not in record:
                raise ParseError(line_no, "record must be an object with an 'id' field")
            object_id = str(record["id"])
            if not object_id:
                raise ParseError(line_no, "object id must be non-empty")
            if object_id in seen:
                raise DuplicateId(object_id)
            seen.add(object_id)

            payloads: dict[str, ModalityPayload] = {}
            for modality, raw in (record.get("modalities") or {}).items():
                if modality not in known:
                    raise SchemaViolation(
                        f"line {line_no}: modality {modality!r} not in schema"
                    )
                try:
                    payload = ModalityPayload.from_json(raw)
                except ValueError as exc:
                    raise ParseError(line_no, str(exc)) from exc
                if payload.kind == "inline-vector" and len(payload.vector) != known[modality]:
                    raise SchemaViolation(
                        f"line {line_no}: modality {modality!r} expects dimension "
                        f"{known[modality]}, got {len(payload.vector)}"
                    )
                if payload.kind == "file-path" and not (root / payload.path).is_file():
                    raise ParseError(line_no, f"referenced file not found: {payload.path}")
                payloads[modality] = payload
            objects.append(MultiModalObject(id=object_id, payloads=payloads))

    return KnowledgeBase(
        name=name or manifest_path.stem,
        modalities=schema,
        objects=objects,
        ingest_enabled=ingest_enabled,
        root=root,
    )


def _ids_sidecar(path: Path) -> Path:
    return Path(str(path) + ".ids.json")


def save_vectors(kb: KnowledgeBase, path) -> int:
    """Write all object vectors in the binary vectors format; returns byte count.

    Layout: magic "MQAV", u32 version, u32 object count, u32 modality count,
    u32 dims[...], then row-major float32 little-endian data (per object,
    modalities concatenated in schema order). Object ids go to a JSON sidecar
    whose array index is the vertex id.
    """
    path = Path(path)
    dims = [dim for _, dim in kb.modalities]
    header = VECTORS_MAGIC + struct.pack(
        "<III", VECTORS_VERSION, len(kb.objects), len(dims)
    ) + struct.pack(f"<{len(dims)}I", *dims)

    rows = np.zeros((len(kb.objects), sum(dims)), dtype="<f4")
    for position, obj in enumerate(kb.objects):
        if obj.vectors is None:
            raise ValueError(f"object {obj.id!r} has not been encoded")
        offset = 0
        for (modality, dim) in kb.modalities:
            vec = np.asarray(obj.vectors[modality], dtype="<f4")
            if vec.shape != (dim,):
                raise SchemaViolation(
                    f"object {obj.id!r} modality {modality!r} has shape {vec.shape}, "
                    f"expected ({dim},)"
                )
            rows[position, offset:offset + dim] = vec
            offset += dim

    payload = header + rows.tobytes(order="C")
    path.write_bytes(payload)
    _ids_sidecar(path).write_text(
        json.dumps([obj.id for obj in kb.objects], ensure_ascii=False), encoding="utf-8"
    )
    return len(payload)


@dataclass
class LoadedVectors:
    """Decoded contents of a vectors file."""

    ids: list[str]
    dims: list[int]
    data: np.ndarray  # (N, sum(dims)) float32

    def modality_slices(self) -> list[np.ndarray]:
        out, offset = [], 0
        for dim in self.dims:
            out.append(self.data[:, offset:offset + dim])
            offset += dim
        return out


def load_vectors(path) -> LoadedVectors:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16 or blob[:4] != VECTORS_MAGIC:
        raise FormatError(f"{path}: bad magic, not a vectors file")
    version, count, n_modalities = struct.unpack_from("<III", blob, 4)
    if version != VECTORS_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    dims_end = 16 + 4 * n_modalities
    if len(blob) < dims_end:
        raise FormatError(f"{path}: truncated header")
    dims = list(struct.unpack_from(f"<{n_modalities}I", blob, 16))
    expected = dims_end + 4 * count * sum(dims)
    if len(blob) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for {count} objects, file has {len(blob)}"
        )
    data = np.frombuffer(blob[dims_end:], dtype="<f4").reshape(count, sum(dims)).copy()

    sidecar = _ids_sidecar(path)
    if not sidecar.is_file():
        raise FormatError(f"missing id sidecar: {sidecar}")
    ids = json.loads(sidecar.read_text(encoding="utf-8"))
    if len(ids) != count:
        raise FormatError(f"{sidecar}: id table has {len(ids)} entries, header says {count}")
    return LoadedVectors(ids=[str(i) for i in ids], dims=dims, data=data)


def save_weights(path, modalities, weights) -> None:
    """Weights file: JSON ``{"modalities": [...], "weights": [...]}``."""
    payload = {
        "modalities": list(modalities),
        "weights": [float(w) for w in np.asarray(weights, dtype=np.float64)],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_weights(path) -> tuple[list[str], np.ndarray]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        modalities = [str(m) for m in payload["modalities"]]
        weights = np.asarray(payload["weights"], dtype=np.float64)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: not a weights file ({exc})") from exc
    if len(modalities) != len(weights):
        raise FormatError(f"{path}: modality and weight counts differ")
    return modalities, weights
