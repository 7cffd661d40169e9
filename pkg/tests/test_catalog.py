import json

import numpy as np
import pytest

from helpers import write_manifest
from mqa.catalog import (
    KnowledgeBase,
    ModalityPayload,
    MultiModalObject,
    get_object,
    ingest,
    load_vectors,
    load_weights,
    save_vectors,
    save_weights,
)
from mqa.errors import DuplicateId, FormatError, NotFound, ParseError, SchemaViolation

SCHEMA = [("text", 8), ("image", 4)]


class TestPayload:
    def test_exactly_one_field(self):
        with pytest.raises(ValueError):
            ModalityPayload(kind="inline-text", text="hi", path="also.png")
        with pytest.raises(ValueError):
            ModalityPayload(kind="inline-vector")

    def test_json_roundtrip(self):
        for payload in (
            ModalityPayload.inline_text("hello"),
            ModalityPayload.inline_vector([1.0, 2.0]),
            ModalityPayload.file_path("img/a.png"),
        ):
            assert ModalityPayload.from_json(payload.to_json()) == payload


class TestIngest:
    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        kb = ingest(path, SCHEMA)
        assert len(kb) == 0

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        write_manifest(path, [
            {"id": "a", "modalities": {"text": {"inline": "one"}}},
            {"id": "a", "modalities": {"text": {"inline": "two"}}},
        ])
        with pytest.raises(DuplicateId) as exc:
            ingest(path, SCHEMA)
        assert exc.value.object_id == "a"

    def test_three_records_keep_manifest_order(self, tmp_path):
        path = tmp_path / "three.jsonl"
        write_manifest(path, [
            {"id": "x", "modalities": {"text": {"inline": "first"}}},
            {"id": "y", "modalities": {"image": {"vector": [1, 2, 3, 4]}}},
            {"id": "z", "modalities": {"text": {"inline": "third"},
                                       "image": {"vector": [0, 0, 0, 1]}}},
        ])
        kb = ingest(path, SCHEMA)
        assert [o.id for o in kb.objects] == ["x", "y", "z"]
        assert kb.vertex_id("x") == 0 and kb.vertex_id("z") == 2
        assert kb.objects[1].payloads["image"].vector == (1.0, 2.0, 3.0, 4.0)
        assert kb.coverage() == {"text": 2, "image": 2}

    def test_unknown_modality(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        write_manifest(path, [{"id": "a", "modalities": {"audio": {"inline": "x"}}}])
        with pytest.raises(SchemaViolation):
            ingest(path, SCHEMA)

    def test_wrong_vector_dimension(self, tmp_path):
        path = tmp_path / "dim.jsonl"
        write_manifest(path, [{"id": "a", "modalities": {"image": {"vector": [1, 2]}}}])
        with pytest.raises(SchemaViolation):
            ingest(path, SCHEMA)

    def test_malformed_record_reports_line(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text('{"id": "a", "modalities": {}}\nnot json\n', encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            ingest(path, SCHEMA)
        assert exc.value.line == 2

    def test_missing_file_reference(self, tmp_path):
        path = tmp_path / "files.jsonl"
        write_manifest(path, [{"id": "a", "modalities": {"image": {"path": "nope.png"}}}])
        with pytest.raises(ParseError):
            ingest(path, SCHEMA)

    def test_deterministic(self, tmp_path):
        path = tmp_path / "det.jsonl"
        write_manifest(path, [
            {"id": "a", "modalities": {"text": {"inline": "alpha"}}},
            {"id": "b", "modalities": {"image": {"vector": [1, 2, 3, 4]}}},
        ])
        kb1, kb2 = ingest(path, SCHEMA), ingest(path, SCHEMA)
        assert [o.id for o in kb1.objects] == [o.id for o in kb2.objects]
        assert all(
            o1.payloads == o2.payloads for o1, o2 in zip(kb1.objects, kb2.objects)
        )


class TestGetObject:
    def test_lookup(self, tmp_path):
        path = tmp_path / "kb.jsonl"
        write_manifest(path, [
            {"id": name, "modalities": {"text": {"inline": name}}}
            for name in ("a", "b", "c")
        ])
        kb = ingest(path, SCHEMA)
        assert get_object(kb, "b").id == "b"
        found = {get_object(kb, name).id for name in ("a", "b", "c")}
        assert found == {"a", "b", "c"}
        with pytest.raises(NotFound):
            get_object(kb, "missing")


def encoded_kb(rng, count=10) -> KnowledgeBase:
    objects = []
    for i in range(count):
        obj = MultiModalObject(id=f"obj-{i}", payloads={})
        obj.vectors = {
            "text": rng.normal(size=8).astype(np.float32),
            "image": rng.normal(size=4).astype(np.float32),
        }
        objects.append(obj)
    return KnowledgeBase(name="enc", modalities=list(SCHEMA), objects=objects)


class TestVectorPersistence:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        kb = encoded_kb(rng)
        path = tmp_path / "vectors.mqav"
        written = save_vectors(kb, path)
        assert written == path.stat().st_size
        loaded = load_vectors(path)
        assert loaded.ids == [o.id for o in kb.objects]
        assert loaded.dims == [8, 4]
        slices = loaded.modality_slices()
        for i, obj in enumerate(kb.objects):
            assert slices[0][i].tobytes() == obj.vectors["text"].tobytes()
            assert slices[1][i].tobytes() == obj.vectors["image"].tobytes()

    def test_wrong_magic(self, tmp_path, rng):
        kb = encoded_kb(rng)
        path = tmp_path / "vectors.mqav"
        save_vectors(kb, path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_vectors(path)

    def test_truncated_body(self, tmp_path, rng):
        kb = encoded_kb(rng, count=5)
        path = tmp_path / "vectors.mqav"
        save_vectors(kb, path)
        blob = path.read_bytes()
        # header still declares 5 objects, body holds only 4
        path.write_bytes(blob[: len(blob) - 4 * (8 + 4)])
        with pytest.raises(FormatError):
            load_vectors(path)

    def test_unencoded_kb_rejected(self, tmp_path):
        kb = KnowledgeBase(name="raw", modalities=list(SCHEMA),
                           objects=[MultiModalObject(id="a", payloads={})])
        with pytest.raises(ValueError):
            save_vectors(kb, tmp_path / "x.mqav")


class TestWeightsPersistence:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "weights.json"
        save_weights(path, ["text", "image"], [0.75, 0.25])
        modalities, weights = load_weights(path)
        assert modalities == ["text", "image"]
        assert weights.tolist() == [0.75, 0.25]

    def test_malformed(self, tmp_path):
        path = tmp_path / "weights.json"
        path.write_text(json.dumps({"weights": [1.0]}), encoding="utf-8")
        with pytest.raises(FormatError):
            load_weights(path)
