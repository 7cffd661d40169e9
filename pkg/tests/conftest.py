import json

import numpy as np
import pytest

from helpers import write_manifest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_manifest(tmp_path):
    """Three-object knowledge base with text and a vector-valued image modality."""
    records = [
        {"id": "red-coat", "modalities": {
            "text": {"inline": "a long red winter coat"},
            "image": {"vector": [1.0, 0.0, 0.0, 0.5]}}},
        {"id": "blue-coat", "modalities": {
            "text": {"inline": "a blue rain coat with hood"},
            "image": {"vector": [0.0, 1.0, 0.0, 0.5]}}},
        {"id": "green-hat", "modalities": {
            "text": {"inline": "a small green felt hat"},
            "image": {"vector": [0.0, 0.0, 1.0, 0.5]}}},
    ]
    path = tmp_path / "toy.jsonl"
    write_manifest(path, records)
    return path


@pytest.fixture
def toy_config(toy_manifest):
    """SystemConfig payload for the toy knowledge base."""
    return {
        "knowledge_base": {"name": "toy", "manifest": str(toy_manifest)},
        "encoders": [
            {"modality": "text", "kind": "hash-ngram", "dimension": 16},
            {"modality": "image", "kind": "passthrough-vector", "dimension": 4},
        ],
        "weights": {"mode": "uniform"},
        "index": {"R": 4, "L_build": 8, "seed": 3, "frameworks": ["MUST", "MR", "JE"]},
        "retrieval": {"k": 3, "L": 8},
        "llm": {"provider": "template"},
    }


@pytest.fixture
def toy_config_file(tmp_path, toy_config):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(toy_config), encoding="utf-8")
    return path
