from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence, runtime_checkable

from ..errors import (
    BackendError,
    JSONExtractionError,
    NonRetryableBackendError,
    TransientBackendError,
)
from ..model import Message

log = logging.getLogger(__name__)

REPAIR_SUFFIX = "Return only valid JSON."


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call.

    ``context`` carries structured inputs for scripted backends only; live
    backends never send it over the wire.
    """

    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = 8192
    tag: str = ""
    context: dict[str, Any] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("ChatRequest needs at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @classmethod
    def user(cls, prompt: str, tag: str, system: str | None = None, **kwargs) -> ChatRequest:
        msgs = [Message("system", system)] if system else []
        msgs.append(Message("user", prompt))
        return cls(tuple(msgs), tag=tag, **kwargs)

    @property
    def prompt(self) -> str:
        """Content of the final message."""
        return self.messages[-1].content

    def extended(self, *extra: Message) -> ChatRequest:
        return ChatRequest(self.messages + tuple(extra), self.temperature, self.max_tokens,
                           self.tag, self.context)


@runtime_checkable
class ChatBackend(Protocol):
    descriptor: str

    def complete(self, request: ChatRequest) -> str: ...


@runtime_checkable
class EmbeddingBackend(Protocol):
    descriptor: str
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


# --------------------------------------------------------------------------
# Retries


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 1.0
    max_delay: float = 30.0
    sleep: Callable[[float], None] = time.sleep

    def delay(self, attempt: int) -> float:
        return min(self.max_delay, self.base_delay * 2 ** (attempt - 1))


_RETRYABLE = (TransientBackendError, ConnectionError, TimeoutError)


def complete_with_retry(backend: ChatBackend, request: ChatRequest,
                        policy: RetryPolicy | None = None) -> str:
    policy = policy or RetryPolicy()
    if policy.max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    last: Exception | None = None
    for attempt in range(1, policy.max_attempts + 1):
        try:
            return backend.complete(request)
        except NonRetryableBackendError:
            raise
        except _RETRYABLE as exc:
            last = exc
            log.warning("%s attempt %d/%d failed: %s", request.tag or "request", attempt,
                        policy.max_attempts, exc)
            if attempt < policy.max_attempts:
                policy.sleep(policy.delay(attempt))
    raise BackendError(f"gave up after {policy.max_attempts} attempts: {last}", tag=request.tag)


# --------------------------------------------------------------------------
# JSON extraction

_FENCE = re.compile(r"```(?:json|JSON)?\s*(.*?)```", re.DOTALL)
_decoder = json.JSONDecoder()


def extract_json(completion: str) -> Any:
    """First complete JSON object or array in ``completion``.

    Accepts raw JSON, fenced blocks, and JSON embedded in prose.
    """
    text = completion.strip()
    candidates = [text] + [m.group(1).strip() for m in _FENCE.finditer(completion)]
    for candidate in candidates:
        if candidate[:1] in "{[":
            try:
                return json.loads(candidate)
            except json.JSONDecodeError:
                pass
    for i, ch in enumerate(completion):
        if ch in "{[":
            try:
                value, _ = _decoder.raw_decode(completion, i)
            except json.JSONDecodeError:
                continue
            return value
    raise JSONExtractionError("no parsable JSON in completion", raw=completion)


def ask_json(backend: ChatBackend, request: ChatRequest, policy: RetryPolicy | None = None,
             expect: type | tuple[type, ...] = dict) -> Any:
    """Complete, parse JSON, and re-ask once with a repair hint on failure."""
    raw = complete_with_retry(backend, request, policy)
    try:
        value = extract_json(raw)
        if isinstance(value, expect):
            return value
    except JSONExtractionError:
        pass
    repaired = request.extended(Message("assistant", raw or "(empty)"), Message("user", REPAIR_SUFFIX))
    raw2 = complete_with_retry(backend, repaired, policy)
    try:
        value = extract_json(raw2)
    except JSONExtractionError as exc:
        raise JSONExtractionError("no parsable JSON after repair", raw=raw2, tag=request.tag) from exc
    if not isinstance(value, expect):
        raise JSONExtractionError(f"expected {expect}, got {type(value).__name__}", raw=raw2,
                                  tag=request.tag)
    return value


def parse_choice_number(completion: str) -> int | None:
    """Leading integer of a 'return only the number' style reply."""
    try:
        value = extract_json(completion)
        if isinstance(value, dict) and len(value) == 1:
            value = next(iter(value.values()))
        if isinstance(value, list) and len(value) == 1:
            value = value[0]
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    except JSONExtractionError:
        pass
    m = re.search(r"-?\d+", completion)
    return int(m.group(0)) if m else None
