"""Interaction loop: sessions opened by exposure utterances, simulated follow-ups, evaluation battery."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from typing import Protocol, Sequence

from .backend import prompts
from .backend.base import ChatRequest, RetryPolicy, complete_with_retry
from .errors import CompatibilityError, SessionError, ValidationError
from .model import (
    Blueprint,
    EpisodeTrace,
    EvaluationRecord,
    ExposureUtterance,
    Message,
    PeriodTraceEntry,
    StateSchema,
    blueprint_id,
    ground_truth_variant,
    state_at,
)

log = logging.getLogger(__name__)


class AssistantHandle(Protocol):
    descriptor: str

    def respond(self, user_msg: str) -> str: ...

    def evaluate(self, question: str, options: Sequence[str]) -> int | None: ...

    def probe(self, schema: StateSchema) -> dict[str, str | None]: ...

    def evaluate_with_truth(self, question: str, options: Sequence[str], truth: dict[str, str]) -> int | None: ...

    def ingest_replay(self, messages: Sequence[Message]) -> None: ...


@dataclass(frozen=True)
class SessionScript:
    period: int
    opener: ExposureUtterance
    rounds: int

    def __post_init__(self):
        if self.rounds < 1:
            raise ValidationError("a session needs at least one round")


def _leaked_values(text: str, schema: StateSchema) -> list[str]:
    lowered = text.lower()
    return [c for v in schema.variables for c in v.choices
            if c.lower() in lowered or c.replace("_", " ").lower() in lowered]


class SimulatedUser:
    """Produces follow-up user turns for one blueprint."""

    def __init__(self, blueprint: Blueprint, backend, retry: RetryPolicy | None = None, recent_messages: int = 4):
        self.blueprint = blueprint
        self.backend = backend
        self.retry = retry or RetryPolicy()
        self.recent_messages = recent_messages
        self.leaks = 0

    def followup(self, period: int, opener: ExposureUtterance, messages: Sequence[Message]) -> str:
        bp = self.blueprint
        recent = messages[-self.recent_messages:]
        prompt = prompts.render(
            "user_followup", start_date=bp.start_date, user_profile=bp.persona.profile,
            current_date=bp.date_at(period), query=opener.query,
            context="\n".join(f"{m.role}: {m.content}" for m in recent),
            state_schema_json=json.dumps(bp.schema.as_choice_map(), indent=2, ensure_ascii=False),
            language=bp.config.language)
        text = complete_with_retry(self.backend, ChatRequest.user(prompt, tag="user.followup"), self.retry).strip()
        leaked = _leaked_values(text, bp.schema)
        if leaked:
            self.leaks += 1
            log.warning("simulated user mentioned schema values %s", leaked)
        return text or "Could you tell me more?"


def run_session(script: SessionScript, user: SimulatedUser, assistant) -> list[Message]:
    """Exactly ``2 * rounds`` alternating messages, opened by the scripted query."""
    messages: list[Message] = []
    user_msg = script.opener.query
    for round_no in range(1, script.rounds + 1):
        if round_no > 1:
            user_msg = user.followup(script.period, script.opener, messages)
        messages.append(Message("user", user_msg))
        try:
            reply = assistant.respond(user_msg)
        except Exception as exc:
            raise SessionError(f"assistant failed in round {round_no} of period {script.period}: {exc}",
                               partial=list(messages)) from exc
        messages.append(Message("assistant", reply))
    return messages


def openers(blueprint: Blueprint, t: int) -> tuple[ExposureUtterance, ...]:
    return blueprint.initial_queries if t == 0 else blueprint.periods[t - 1].update_queries


def evaluation_battery(blueprint: Blueprint, t: int, assistant) -> tuple[list[EvaluationRecord], dict]:
    """Multiple-choice pass, state probe, then the ground-truth upper-bound pass."""
    schema = blueprint.schema
    state = state_at(blueprint, t)
    pending = []
    for q in blueprint.questions:
        keys = q.options_at(t)
        texts = [q.variants[k] for k in keys]
        truth = keys.index(ground_truth_variant(q, state, schema))
        chosen = assistant.evaluate(q.text, texts)
        retrieved = tuple(getattr(assistant, "last_retrieved", ()) or ())
        pending.append((q, keys, texts, truth, chosen, retrieved))
    probe = assistant.probe(schema)
    records = []
    for q, keys, texts, truth, chosen, retrieved in pending:
        ub = assistant.evaluate_with_truth(q.text, texts, {v: state[v] for v in q.required})
        records.append(EvaluationRecord(q.id, keys, truth, chosen, ub, retrieved))
    return records, probe


def _drain(assistant) -> tuple[str, ...]:
    drain = getattr(assistant, "drain_events", None)
    return tuple(drain()) if drain else ()


def run_period(blueprint: Blueprint, t: int, assistant, user: SimulatedUser) -> PeriodTraceEntry:
    if not 0 <= t <= blueprint.n_periods:
        raise ValidationError(f"position {t} outside 0..{blueprint.n_periods}")
    hook = getattr(assistant, "on_period_start", None)
    if hook:
        hook(t)
    sessions = [run_session(SessionScript(t, opener, blueprint.config.turns_per_exposure), user, assistant)
                for opener in openers(blueprint, t)]
    records, probe = evaluation_battery(blueprint, t, assistant)
    return PeriodTraceEntry(t, blueprint.date_at(t), tuple(tuple(s) for s in sessions), tuple(records),
                            probe, _drain(assistant))


def replay_period(blueprint: Blueprint, t: int, assistant, replay: EpisodeTrace) -> PeriodTraceEntry:
    hook = getattr(assistant, "on_period_start", None)
    if hook:
        hook(t)
    sessions = replay.periods[t].sessions
    for session in sessions:
        assistant.ingest_replay(session)
    records, probe = evaluation_battery(blueprint, t, assistant)
    return PeriodTraceEntry(t, blueprint.date_at(t), sessions, tuple(records), probe, _drain(assistant))


def run_episode(blueprint: Blueprint, assistant, user: SimulatedUser | None = None, seed: int = 0,
                mode: str = "onpolicy", replay: EpisodeTrace | None = None, replay_source: str | None = None,
                agent_params: dict | None = None) -> EpisodeTrace:
    ref = blueprint_id(blueprint)
    periods = []
    if mode == "onpolicy":
        if user is None:
            raise ValidationError("on-policy episodes need a simulated user")
        for t in range(blueprint.n_positions):
            periods.append(run_period(blueprint, t, assistant, user))
    elif mode == "offpolicy":
        if replay is None:
            raise ValidationError("off-policy episodes need a replay trace")
        if replay.blueprint_ref != ref or len(replay.periods) != blueprint.n_positions:
            raise CompatibilityError(f"replay trace belongs to {replay.blueprint_ref}, not {ref}")
        for t in range(blueprint.n_positions):
            periods.append(replay_period(blueprint, t, assistant, replay))
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return EpisodeTrace(ref, assistant.descriptor, mode, seed, tuple(periods),
                        replay_source if mode == "offpolicy" else None, dict(agent_params or {}))


# --------------------------------------------------------------------------
# reference assistants


class _ReferenceAssistant:
    reply = "Thanks for sharing. Here is a simple plan you could try this week."

    def __init__(self, blueprint: Blueprint, seed: int = 0):
        self.blueprint = blueprint
        self.seed = seed
        self.t = 0
        self.last_retrieved: tuple[str, ...] = ()
        self._by_text = {q.text: q for q in blueprint.questions}

    def on_period_start(self, t: int) -> None:
        self.t = t

    def respond(self, user_msg: str) -> str:
        return self.reply

    def ingest_replay(self, messages) -> None:
        pass

    def _match(self, question: str, options: Sequence[str], state: dict[str, str]) -> int | None:
        q = self._by_text.get(question)
        if q is None or not all(v in state for v in q.required):
            return None
        answer = q.variants[ground_truth_variant(q, state, self.blueprint.schema)]
        return options.index(answer) if answer in options else None

    def evaluate_with_truth(self, question, options, truth) -> int | None:
        return self._match(question, options, dict(truth))

    def store_digest(self) -> str:
        return ""


class OracleAssistant(_ReferenceAssistant):
    """Reads the true state directly: the perfect-information ceiling."""

    descriptor = "oracle"

    def evaluate(self, question, options) -> int | None:
        return self._match(question, options, state_at(self.blueprint, self.t))

    def probe(self, schema: StateSchema) -> dict[str, str | None]:
        state = state_at(self.blueprint, self.t)
        return {v: state.get(v) for v in schema.names}


class RandomAssistant(_ReferenceAssistant):
    """Uniform guesses without memory; still answers correctly when handed the truth."""

    descriptor = "random"

    def __init__(self, blueprint: Blueprint, seed: int = 0):
        super().__init__(blueprint, seed)
        self.rng = random.Random(f"random-assistant:{seed}")

    def evaluate(self, question, options) -> int | None:
        return self.rng.randrange(len(options))

    def probe(self, schema: StateSchema) -> dict[str, str | None]:
        return {v.name: self.rng.choice(v.choices) for v in schema.variables}
