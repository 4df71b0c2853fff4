"""OpenAI-compatible HTTP backends for chat completions and embeddings."""

from __future__ import annotations

import os
from typing import Sequence

import requests

from ..errors import NonRetryableBackendError, TransientBackendError
from .base import ChatRequest

ENV_API_KEY = "AMEMGYM_API_KEY"
ENV_BASE_URL = "AMEMGYM_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


def _raise_for_status(response: requests.Response, tag: str) -> None:
    status = response.status_code
    if status < 400:
        return
    body = response.text[:800]
    if status == 429 or status >= 500:
        raise TransientBackendError(f"HTTP {status}: {body}", tag=tag)
    raise NonRetryableBackendError(f"HTTP {status}: {body}", tag=tag)


class _HTTPClient:
    def __init__(self, model: str, base_url: str | None = None, api_key: str | None = None,
                 timeout_s: float = 120.0, session: requests.Session | None = None):
        self.model = model
        self.base_url = (base_url or os.environ.get(ENV_BASE_URL) or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def _post(self, path: str, payload: dict, tag: str) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self.session.post(f"{self.base_url}{path}", json=payload, headers=headers,
                                         timeout=self.timeout_s)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TransientBackendError(str(exc), tag=tag) from exc
        _raise_for_status(response, tag)
        try:
            return response.json()
        except ValueError as exc:
            raise TransientBackendError(f"non-JSON response body: {response.text[:200]}", tag=tag) from exc


class OpenAICompatChat(_HTTPClient):
    @property
    def descriptor(self) -> str:
        return self.model

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        data = self._post("/chat/completions", payload, request.tag)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransientBackendError(f"malformed completion payload: {str(data)[:200]}",
                                        tag=request.tag) from exc
        return content or ""


class OpenAICompatEmbedding(_HTTPClient):
    def __init__(self, model: str, dimension: int = 1536, **kwargs):
        super().__init__(model, **kwargs)
        self.dimension = dimension

    @property
    def descriptor(self) -> str:
        return self.model

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            return []
        data = self._post("/embeddings", {"model": self.model, "input": list(texts)}, "embed")
        rows = sorted(data["data"], key=lambda r: r.get("index", 0))
        vectors = [list(map(float, r["embedding"])) for r in rows]
        if vectors:
            self.dimension = len(vectors[0])
        return vectors
