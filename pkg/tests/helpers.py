"""Shared test utilities: manifest writers, synthetic datasets, stub servers."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from mqa.fusion import FusionLayout


def write_manifest(path, records) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def normalize(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    norms[norms == 0] = 1.0
    return x / norms


def sq_dists(rows: np.ndarray, vec: np.ndarray) -> np.ndarray:
    diff = rows - vec
    return np.einsum("ij,ij->i", diff, diff)


class SkewDataset:
    """Two-modality collection where the true ranking needs both modalities.

    Ground truth weights modality 1 at 0.8. Each channel's top-L fills up
    with planted decoys that are near the query in that channel only, so the
    union of per-channel searches misses most of the weighted top-k; the
    second modality also carries twice the energy, which makes the joint
    element-wise mean track the wrong channel.
    """

    def __init__(self, n: int = 1500, dim: int = 16, seed: int = 11, m2_scale: float = 2.0):
        rng = np.random.default_rng(seed)
        self.dim = dim
        self.m2_scale = m2_scale
        self.weights = np.array([0.8, 0.2])
        self.layout = FusionLayout(("m1", "m2"), (dim, dim))
        self.c1 = normalize(rng.normal(size=dim))
        self.c2 = normalize(rng.normal(size=dim))

        n_a = n_b = int(n * 0.4)
        n_t = n - n_a - n_b
        a1 = normalize(self.c1 + 0.06 * rng.normal(size=(n_a, dim)))
        a2 = m2_scale * normalize(-self.c2 + 0.4 * rng.normal(size=(n_a, dim)))
        b1 = normalize(-self.c1 + 0.4 * rng.normal(size=(n_b, dim)))
        b2 = m2_scale * normalize(self.c2 + 0.06 * rng.normal(size=(n_b, dim)))
        radii1 = rng.uniform(0.35, 0.75, size=(n_t, 1))
        radii2 = rng.uniform(0.35, 0.75, size=(n_t, 1))
        t1 = normalize(self.c1 + radii1 * normalize(rng.normal(size=(n_t, dim))))
        t2 = m2_scale * normalize(self.c2 + radii2 * normalize(rng.normal(size=(n_t, dim))))

        perm = rng.permutation(n)
        self.X1 = np.vstack([a1, b1, t1])[perm]
        self.X2 = np.vstack([a2, b2, t2])[perm]
        self.ids = [f"obj-{i:04d}" for i in range(n)]
        self._rng = rng

    def sample_query(self) -> dict[str, np.ndarray]:
        q1 = normalize(self.c1 + 0.10 * self._rng.normal(size=self.dim))
        q2 = self.m2_scale * normalize(self.c2 + 0.10 * self._rng.normal(size=self.dim))
        return {"m1": q1, "m2": q2}

    def true_topk(self, query: dict[str, np.ndarray], k: int) -> list[str]:
        totals = self.weights[0] * sq_dists(self.X1, query["m1"]) \
            + self.weights[1] * sq_dists(self.X2, query["m2"])
        order = np.lexsort((np.arange(len(totals)), totals))[:k]
        return [self.ids[i] for i in order]


class StubServer:
    """Minimal localhost HTTP server recording every POST it receives."""

    def __init__(self, responder):
        self.requests: list[dict] = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("content-length") or 0)
                raw = self.rfile.read(length) if length else b"{}"
                try:
                    body = json.loads(raw)
                except json.JSONDecodeError:
                    body = {}
                stub.requests.append(
                    {"path": self.path, "body": body, "headers": dict(self.headers)}
                )
                status, payload = responder(self.path, body)
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("content-type", "application/json")
                self.send_header("content-length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_port}"

    def __enter__(self) -> "StubServer":
        self._thread.start()
        return self

    def __exit__(self, *exc_info):
        self._server.shutdown()
        self._server.server_close()
        return False


def echo_llm_responder(path, body):
    """Chat-completion stub that echoes the concatenated message contents."""
    joined = " | ".join(m["content"] for m in body.get("messages", []))
    return 200, {"choices": [{"message": {"content": joined}}]}
