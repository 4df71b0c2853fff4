"""Memory-equipped assistants: native context, RAG, external and in-context agentic write."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..backend import prompts
from ..backend.base import ChatRequest, RetryPolicy, ask_json, complete_with_retry, extract_json
from ..backend.templates import PromptTemplate
from ..errors import BackendError, ValidationError
from ..model import Message, StateSchema
from .vector_index import VectorIndex, retrieve_topk

log = logging.getLogger(__name__)

KINDS = ("llm", "rag", "awe", "awi")

_DEFAULTS = {"llm": (1, 0, 0), "rag": (1, 4, 30), "awe": (2, 4, 30), "awi": (2, 4, 0)}


@dataclass(frozen=True)
class AgentConfig:
    kind: str
    freq: int = 2
    ns: int = 4
    topk: int = 30
    model: str = ""
    token_budget: int = 128_000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown agent kind {self.kind!r}; expected one of {KINDS}")
        if self.freq < 1:
            raise ValidationError("freq must be >= 1")
        if self.ns < 0 or self.topk < 0:
            raise ValidationError("ns and topk must be >= 0")
        if self.token_budget < 1:
            raise ValidationError("token_budget must be >= 1")

    @classmethod
    def default(cls, kind: str, **overrides) -> AgentConfig:
        if kind not in _DEFAULTS:
            raise ValidationError(f"unknown agent kind {kind!r}; expected one of {KINDS}")
        freq, ns, topk = _DEFAULTS[kind]
        values = {"freq": freq, "ns": ns, "topk": topk}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(kind=kind, **values)

    @property
    def label(self) -> str:
        if self.kind == "llm":
            return "llm"
        return f"{self.kind}-({self.freq},{self.ns},{self.topk})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "freq": self.freq, "ns": self.ns, "topk": self.topk,
                "model": self.model, "token_budget": self.token_budget}


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def format_options(options: Sequence[str]) -> str:
    """Numbered option block; the reply's number is 1-based."""
    return "\n".join(f"{i}. {text}" for i, text in enumerate(options, start=1))


def format_conversation(rounds: Sequence[tuple[str, str]]) -> str:
    return "\n".join(f"user: {u}\nassistant: {a}" for u, a in rounds)


def parse_answer(completion: str, n_options: int) -> int | None:
    """Zero-based option index from an ``{"answer": int}`` reply, or None."""
    value = None
    try:
        data = extract_json(completion)
        if isinstance(data, dict):
            value = data.get("answer")
        elif isinstance(data, int):
            value = data
    except BackendError:
        pass
    if isinstance(value, str) and value.strip().isdigit():
        value = int(value.strip())
    if not isinstance(value, int) or isinstance(value, bool):
        m = re.search(r'"answer"\s*:\s*(\d+)', completion)
        value = int(m.group(1)) if m else None
    if value is None or not 1 <= value <= n_options:
        return None
    return value - 1


@dataclass
class MemoryEvent:
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


class MemoryAgent:
    """One assistant instance with a kind-specific memory.

    Rounds are ``(user, assistant)`` pairs. Every ``freq`` rounds an update
    cycle writes the rounds older than the newest ``ns`` to long-term memory.
    """

    def __init__(self, config: AgentConfig, chat, embed=None, retry: RetryPolicy | None = None,
                 update_prompt: str | None = None, seed: int = 0):
        if config.kind in ("rag", "awe") and embed is None:
            raise ValidationError(f"{config.kind} agent needs an embedding backend")
        self.config = config
        self.chat = chat
        self.embed = embed
        self.retry = retry or RetryPolicy()
        self.seed = seed
        self.update_template = PromptTemplate(
            "awi_policy", update_prompt if update_prompt is not None else prompts.get("awi_memory_update").body)
        self.buffer: list[tuple[str, str]] = []      # rounds not yet written to long-term memory
        self.transcript: list[tuple[str, str]] = []  # every round, for the llm kind
        self.index = VectorIndex(embed.dimension) if config.kind in ("rag", "awe") else None
        self.facts: dict[str, str] = {}
        self.rounds_since_update = 0
        self.update_cycles = 0
        self.last_retrieved: tuple[str, ...] = ()
        self.events: list[MemoryEvent] = []

    @property
    def descriptor(self) -> str:
        return f"{self.config.label}@{getattr(self.chat, 'descriptor', 'chat')}"

    # ---------------------------------------------------------------- context

    def _memory_block(self, query: str) -> str | None:
        kind = self.config.kind
        if kind in ("rag", "awe"):
            hits = retrieve_topk(self.index, query, self.config.topk, self.embed)
            self.last_retrieved = tuple(text for text, _ in hits)
            if not hits:
                return None
            return prompts.render("memory_block_retrieved",
                                  memories="\n".join(f"- {t}" for t in self.last_retrieved))
        if kind == "awi":
            self.last_retrieved = tuple(f"{k}: {v}" for k, v in self.facts.items())
            if not self.facts:
                return None
            return prompts.render("memory_block_facts", facts="\n".join(self.last_retrieved))
        self.last_retrieved = ()
        return None

    def _short_term(self) -> list[tuple[str, str]]:
        if self.config.kind == "llm":
            return list(self.transcript)
        if self.config.ns == 0:
            return []
        return self.buffer[-self.config.ns:]

    def _context(self, query: str, final: str) -> list[Message]:
        head = [Message("system", prompts.get("assistant_system").body)]
        block = self._memory_block(query)
        if block is not None:
            head.append(Message("system", block))
        rounds = self._short_term()
        if self.config.kind == "llm":
            rounds = self._fit_budget(head, rounds, final)
        body: list[Message] = []
        for user, reply in rounds:
            body += [Message("user", user), Message("assistant", reply)]
        return head + body + [Message("user", final)]

    def _fit_budget(self, head: list[Message], rounds: list[tuple[str, str]], final: str):
        fixed = sum(estimate_tokens(m.content) for m in head) + estimate_tokens(final)
        sizes = [estimate_tokens(u) + estimate_tokens(a) for u, a in rounds]
        dropped = 0
        while rounds[dropped:] and fixed + sum(sizes[dropped:]) > self.config.token_budget:
            dropped += 1
        if dropped:
            self.events.append(MemoryEvent(
                "overflow", f"context over {self.config.token_budget} tokens; dropped {dropped} oldest rounds"))
            log.warning("context overflow: dropped %d oldest rounds", dropped)
        return rounds[dropped:]

    # ------------------------------------------------------------ interaction

    def respond(self, user_msg: str) -> str:
        request = ChatRequest(tuple(self._context(user_msg, user_msg)), tag="agent.respond")
        reply = complete_with_retry(self.chat, request, self.retry).strip() or "(no reply)"
        self._record_round(user_msg, reply)
        return reply

    def ingest_replay(self, messages: Sequence[Message]) -> None:
        """Feed a recorded transcript through the memory write path only."""
        pending_user = None
        for m in messages:
            if m.role == "user":
                pending_user = m.content
            elif m.role == "assistant" and pending_user is not None:
                self._record_round(pending_user, m.content)
                pending_user = None

    def _record_round(self, user_msg: str, reply: str) -> None:
        self.transcript.append((user_msg, reply))
        if self.config.kind != "llm":
            self.buffer.append((user_msg, reply))
        self.rounds_since_update += 1
        if self.rounds_since_update == self.config.freq:
            self.rounds_since_update = 0
            self.update_memory()

    # ------------------------------------------------------------ write path

    def flushable(self) -> list[tuple[str, str]]:
        return self.buffer[:max(0, len(self.buffer) - self.config.ns)]

    def update_memory(self) -> None:
        self.update_cycles += 1
        kind = self.config.kind
        if kind == "llm":
            return
        rounds = self.flushable()
        if not rounds:
            return
        try:
            if kind == "rag":
                self._write_chunks(rounds)
            elif kind == "awe":
                self._write_facts(rounds)
            else:
                self._merge_facts(rounds)
        except BackendError as exc:
            self.events.append(MemoryEvent("write-failed", str(exc)))
            log.warning("memory update failed, keeping %d rounds for the next cycle: %s", len(rounds), exc)
            return
        del self.buffer[:len(rounds)]

    def _write_chunks(self, rounds):
        chunks = [f"User: {u}\nAssistant: {a}" for u, a in rounds]
        for text, vector in zip(chunks, self.embed.embed(chunks)):
            self.index.add(text, vector)

    def _write_facts(self, rounds):
        prompt = prompts.render("awe_fact_extraction", conversation=format_conversation(rounds))
        data = ask_json(self.chat, ChatRequest.user(prompt, tag="agent.extract"), self.retry)
        facts = data.get("facts", [])
        if not isinstance(facts, list):
            facts = []
        new = []
        for fact in facts:
            if isinstance(fact, str) and fact.strip() and fact not in self.index and fact not in new:
                new.append(fact)
        if new:
            for text, vector in zip(new, self.embed.embed(new)):
                self.index.add(text, vector)

    def _merge_facts(self, rounds):
        prompt = self.update_template.render(
            current_memories=json.dumps(self.facts, indent=2, ensure_ascii=False),
            conversation=format_conversation(rounds))
        update = ask_json(self.chat, ChatRequest.user(prompt, tag="agent.awi_update"), self.retry)
        self.merge(update)

    def merge(self, update: Mapping) -> None:
        """``facts |= update`` restricted to non-empty string values."""
        for key, value in update.items():
            if isinstance(value, (list, dict)):
                value = json.dumps(value, ensure_ascii=False)
            value = str(value).strip()
            if value:
                self.facts[str(key)] = value

    # ------------------------------------------------------------ evaluation

    def evaluate(self, question: str, options: Sequence[str]) -> int | None:
        prompt = prompts.render("overall_evaluation", query=question, choices=format_options(options))
        request = ChatRequest(tuple(self._context(question, prompt)), tag="agent.evaluate")
        return parse_answer(complete_with_retry(self.chat, request, self.retry), len(options))

    def evaluate_with_truth(self, question: str, options: Sequence[str], truth: Mapping[str, str]) -> int | None:
        prompt = prompts.render("utilization_evaluation", query=question,
                                state=json.dumps(dict(truth), indent=2, ensure_ascii=False),
                                choices=format_options(options))
        # ground truth replaces memory: no retrieval and no history
        request = ChatRequest((Message("system", prompts.get("assistant_system").body), Message("user", prompt)),
                              tag="agent.evaluate_ub")
        self.last_retrieved = ()
        return parse_answer(complete_with_retry(self.chat, request, self.retry), len(options))

    def probe(self, schema: StateSchema) -> dict[str, str | None]:
        prompt = prompts.render("state_diagnosis",
                                state_schema=json.dumps(schema.as_choice_map(), indent=2, ensure_ascii=False))
        request = ChatRequest(tuple(self._context(prompt, prompt)), tag="agent.probe")
        try:
            reply = ask_json(self.chat, request, self.retry)
        except BackendError as exc:
            log.warning("state probe unparsable: %s", exc)
            reply = {}
        out: dict[str, str | None] = {}
        for name in schema.names:
            value = reply.get(name)
            out[name] = value if isinstance(value, str) and value in schema.choices(name) else None
        return out

    # ------------------------------------------------------------ inspection

    def store_digest(self) -> str:
        if self.index is not None:
            return self.index.digest()
        payload = json.dumps(self.facts if self.config.kind == "awi" else self.transcript, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def dump_memory(self) -> dict:
        kind = self.config.kind
        if kind in ("rag", "awe"):
            store = [{"id": e.id, "text": e.text} for e in self.index.entries]
        elif kind == "awi":
            store = dict(self.facts)
        else:
            store = [{"user": u, "assistant": a} for u, a in self.transcript]
        return {"kind": kind, "config": self.config.to_dict(), "update_cycles": self.update_cycles, "store": store}

    def memory_text(self) -> str:
        """Plain-text rendering of the long-term store."""
        kind = self.config.kind
        if kind in ("rag", "awe"):
            return "\n".join(self.index.texts())
        if kind == "awi":
            return "\n".join(f"{k}: {v}" for k, v in self.facts.items())
        return format_conversation(self.transcript)

    def drain_events(self) -> list[str]:
        out = [str(e) for e in self.events]
        self.events.clear()
        return out
