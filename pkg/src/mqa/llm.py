"""Answer generation: a deterministic template renderer and an external
chat-completion client.

The external client posts the de-facto chat JSON (model, messages[],
temperature) so any compatible endpoint plugs in. The API key comes from the
``MQA_LLM_API_KEY`` environment variable and is never logged.
"""

from __future__ import annotations

import os

import httpx

from .errors import LLMUnavailable
from .search import SearchResult

API_KEY_ENV = "MQA_LLM_API_KEY"


def summarize_results(result: SearchResult) -> str:
    """Serialize ranked hits for the second LLM message."""
    lines = [
        f"{rank}. {object_id} (distance {distance:.4f})"
        for rank, (object_id, distance) in enumerate(result.hits, start=1)
    ]
    return "\n".join(lines) if lines else "(no results)"


class TemplateLLMClient:
    """Fixed deterministic rendering of the retrieved results."""

    provider = "template"

    def generate(self, query_text: str | None, result: SearchResult) -> str:
        subject = query_text if query_text else "(image query)"
        if not result.hits:
            return f"No results found for: {subject}"
        header = f"Found {len(result.hits)} results for: {subject}"
        return header + "\n" + summarize_results(result)


class ExternalLLMClient:
    """Chat-completion client for a configured external endpoint.

    Sends a two-message conversation: the user's query, then the serialized
    result summaries. Any transport or protocol failure raises
    :class:`LLMUnavailable` so the caller can degrade to the template.
    """

    provider = "external"

    def __init__(self, endpoint: str, model: str = "default",
                 temperature: float = 0.2, timeout: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self._client = httpx.Client(timeout=timeout)

    def generate(self, query_text: str | None, result: SearchResult) -> str:
        messages = [
            {"role": "user", "content": query_text or "(image query)"},
            {"role": "user", "content": "Retrieved results:\n" + summarize_results(result)},
        ]
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            response = self._client.post(
                self.endpoint,
                json={"model": self.model, "messages": messages,
                      "temperature": self.temperature},
                headers=headers,
            )
        except httpx.HTTPError as exc:
            raise LLMUnavailable(f"LLM endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise LLMUnavailable(f"LLM endpoint returned HTTP {response.status_code}")
        try:
            return str(response.json()["choices"][0]["message"]["content"])
        except Exception as exc:
            raise LLMUnavailable(f"malformed LLM response: {exc}") from exc


def make_llm_client(provider: str, endpoint: str | None = None,
                    model: str = "default", temperature: float = 0.2):
    if provider == "template":
        return TemplateLLMClient()
    if provider == "external":
        if not endpoint:
            raise ValueError("external LLM provider requires an endpoint")
        return ExternalLLMClient(endpoint, model=model, temperature=temperature)
    raise ValueError(f"unknown LLM provider: {provider!r}")
