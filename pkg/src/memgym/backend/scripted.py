"""Deterministic in-process backends for tests and desk-scale runs."""

from __future__ import annotations

import fnmatch
import hashlib
import json
import random
import threading
from typing import Callable, Sequence

import numpy as np

from ..errors import BackendError
from .base import ChatRequest

Program = Callable[[ChatRequest, random.Random], str]


def request_digest(request: ChatRequest, seed: int) -> str:
    payload = {
        "seed": seed,
        "tag": request.tag,
        "messages": [[m.role, m.content] for m in request.messages],
        "context": request.context,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


class ScriptedBackend:
    """Rule-driven chat backend.

    Rules are tried in order; a matcher is a tag glob (``"gen.*"``) or a
    predicate on the request. The program receives an RNG seeded from the
    request content and ``rng_seed``, so responses never depend on call order.
    """

    def __init__(self, rules: Sequence[tuple] = (), rng_seed: int = 0, descriptor: str = "scripted"):
        self.rules: list[tuple] = list(rules)
        self.rng_seed = rng_seed
        self.descriptor = descriptor
        self._lock = threading.Lock()
        self.calls: list[str] = []

    def add_rule(self, matcher, program: Program, first: bool = False) -> None:
        if first:
            self.rules.insert(0, (matcher, program))
        else:
            self.rules.append((matcher, program))

    def _matches(self, matcher, request: ChatRequest) -> bool:
        if callable(matcher):
            return bool(matcher(request))
        return fnmatch.fnmatchcase(request.tag, matcher)

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls.append(request.tag)
        for matcher, program in self.rules:
            if self._matches(matcher, request):
                rng = random.Random(request_digest(request, self.rng_seed))
                return program(request, rng)
        raise BackendError("no scripted rule matches request", tag=request.tag)

    def count(self, pattern: str = "*") -> int:
        with self._lock:
            return sum(fnmatch.fnmatchcase(t, pattern) for t in self.calls)


class ScriptedEmbedding:
    """Seeded feature hash of character n-grams, L2-normalized."""

    def __init__(self, dimension: int = 64, seed: int = 0, ngram: int = 3):
        self.dimension = dimension
        self.seed = seed
        self.ngram = ngram
        self.descriptor = f"scripted-hash-{dimension}"
        self._lock = threading.Lock()
        self.calls = 0

    def _vector(self, text: str) -> list[float]:
        vec = np.zeros(self.dimension)
        padded = f" {text.lower()} "
        n = self.ngram
        for i in range(max(1, len(padded) - n + 1)):
            gram = padded[i:i + n]
            h = hashlib.blake2b(gram.encode("utf-8"), digest_size=8,
                                key=str(self.seed).encode()).digest()
            idx = int.from_bytes(h[:4], "little") % self.dimension
            sign = 1.0 if h[4] & 1 else -1.0
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec.tolist()

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        with self._lock:
            self.calls += 1
        return [self._vector(t) for t in texts]
