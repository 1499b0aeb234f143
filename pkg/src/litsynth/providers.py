"""HTTP provider clients for embeddings, reranking, and chat completions.

Wire formats:
  embed   POST {"input": [str]}                 -> {"data": [{"embedding": [float]}]}
  rerank  POST {"query": str, "passages": [str]} -> {"scores": [float]}
  chat    POST {"model", "messages", "temperature", "max_tokens"}
                                                 -> {"choices": [{"message": {"content"}}]}
"""

from __future__ import annotations

import logging
import threading
import time
from typing import Callable, Protocol, TypeVar

import httpx

from .errors import ContractViolation, TransportError

logger = logging.getLogger(__name__)

T = TypeVar("T")

Message = dict[str, str]


class EmbeddingProvider(Protocol):
    def embed(self, texts: list[str]) -> list[list[float]]: ...


class RerankProvider(Protocol):
    def score(self, query: str, passages: list[str]) -> list[float]: ...


class ChatProvider(Protocol):
    def complete(self, messages: list[Message], temperature: float, max_tokens: int) -> str: ...


def call_with_retries(fn: Callable[[], T], retries: int = 2, backoff_s: float = 0.5) -> T:
    """Run ``fn``, retrying TransportError with exponential backoff."""
    attempt = 0
    while True:
        try:
            return fn()
        except TransportError:
            if attempt >= retries:
                raise
            delay = backoff_s * (2**attempt)
            if delay > 0:
                time.sleep(delay)
            attempt += 1
            logger.debug("retrying after transport error (attempt %d)", attempt)


class _HttpClientBase:
    """Shared httpx plumbing with an in-flight request cap."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        api_key: str | None = None,
        retries: int = 2,
        backoff_s: float = 0.5,
        max_in_flight: int = 8,
    ):
        self.endpoint = endpoint
        self.retries = retries
        self.backoff_s = backoff_s
        headers = {}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers)
        self._slots = threading.Semaphore(max_in_flight)

    def _post_json(self, payload: dict) -> dict:
        def attempt() -> dict:
            with self._slots:
                try:
                    response = self._client.post(self.endpoint, json=payload)
                except httpx.HTTPError as exc:
                    raise TransportError(f"POST {self.endpoint} failed: {exc}") from exc
            if response.status_code != 200:
                raise TransportError(f"POST {self.endpoint} -> HTTP {response.status_code}")
            try:
                return response.json()
            except ValueError as exc:
                raise TransportError(f"non-JSON response from {self.endpoint}") from exc

        return call_with_retries(attempt, self.retries, self.backoff_s)

    def close(self) -> None:
        self._client.close()


class HttpEmbeddingClient(_HttpClientBase):
    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            return []
        body = self._post_json({"input": texts})
        data = body.get("data")
        if not isinstance(data, list) or len(data) != len(texts):
            raise ContractViolation("embedding response does not align with input batch")
        return [item["embedding"] for item in data]


class HttpRerankClient(_HttpClientBase):
    def score(self, query: str, passages: list[str]) -> list[float]:
        if not passages:
            return []
        body = self._post_json({"query": query, "passages": passages})
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(passages):
            raise ContractViolation("rerank response does not align with input passages")
        return [float(s) for s in scores]


class HttpChatClient(_HttpClientBase):
    def __init__(self, endpoint: str, model: str = "default", **kwargs):
        super().__init__(endpoint, **kwargs)
        self.model = model

    def complete(self, messages: list[Message], temperature: float, max_tokens: int) -> str:
        body = self._post_json(
            {
                "model": self.model,
                "messages": messages,
                "temperature": temperature,
                "max_tokens": max_tokens,
            }
        )
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ContractViolation(f"malformed chat completion payload: {exc}") from exc
