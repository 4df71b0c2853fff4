"""Feedback-driven rewriting of the in-context memory update prompt, and factual recall."""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .arena import SimulatedUser, run_episode
from .backend import prompts
from .backend.base import ChatRequest, RetryPolicy, ask_json, complete_with_retry, extract_json
from .backend.templates import escape_braces, unescape_braces
from .errors import BackendError, ValidationError
from .memory import AgentConfig, MemoryAgent
from .metrics import aggregate_report
from .model import Blueprint, EpisodeTrace, Message, ReportBundle, state_at

log = logging.getLogger(__name__)

SECTION_START = "Types of Information to Remember:"
SECTION_END = "Here are current memories recorded for the same user (mapping from"
FEEDBACK_MODES = ("none", "question_only", "complete")


def _bounds(text: str) -> tuple[int, int]:
    start = text.find(SECTION_START + "\n")
    end = text.find(SECTION_END, start + 1)
    if start < 0 or end < 0:
        raise ValidationError("policy prompt is missing its section sentinel lines")
    return start + len(SECTION_START) + 1, end


@dataclass(frozen=True)
class PolicyPrompt:
    """Template text of the update prompt; only the sentinel-delimited section evolves."""

    version: int
    full_text: str
    changes: tuple[str, ...] = ()

    def __post_init__(self):
        _bounds(self.full_text)
        object.__setattr__(self, "changes", tuple(self.changes))

    @classmethod
    def initial(cls) -> PolicyPrompt:
        return cls(0, prompts.get("awi_memory_update").body)

    @property
    def mutable_section(self) -> str:
        start, end = _bounds(self.full_text)
        return unescape_braces(self.full_text[start:end]).strip("\n")

    @property
    def exterior(self) -> tuple[str, str]:
        start, end = _bounds(self.full_text)
        return self.full_text[:start], self.full_text[end:]

    def with_section(self, new_section: str, changes: Sequence[str] = ()) -> PolicyPrompt:
        prefix, suffix = self.exterior
        body = escape_braces(new_section.strip("\n"))
        return PolicyPrompt(self.version + 1, f"{prefix}{body}\n\n{suffix}", tuple(changes))

    def bump(self, changes: Sequence[str] = ()) -> PolicyPrompt:
        return PolicyPrompt(self.version + 1, self.full_text, tuple(changes))


@dataclass
class FeedbackSummary:
    mode: str
    question_answer_history: list[dict] = field(default_factory=list)
    user_information_updates: dict[str, str] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.question_answer_history and not self.user_information_updates

    def to_dict(self) -> dict:
        if self.mode == "none":
            return {}
        out: dict = {"question_answer_history": list(self.question_answer_history)}
        if self.mode == "complete":
            out["user_information_updates"] = dict(self.user_information_updates)
        return out


def _letter(i: int | None) -> str:
    if i is None:
        return "none"
    return string.ascii_uppercase[i] if i < 26 else str(i + 1)


def _question_block(text: str, options: Sequence[str]) -> str:
    parts = [f"Question: {text};"] + [f"({_letter(i)}) {o};" for i, o in enumerate(options)]
    return "\n".join(parts)


def build_feedback(trace: EpisodeTrace, blueprint: Blueprint, mode: str,
                   positions: Sequence[int] | None = None) -> FeedbackSummary:
    """Feedback over the given positions (all by default)."""
    if mode not in FEEDBACK_MODES:
        raise ValidationError(f"unknown feedback mode {mode!r}; expected one of {FEEDBACK_MODES}")
    summary = FeedbackSummary(mode)
    if mode == "none":
        return summary
    wanted = set(range(len(trace.periods)) if positions is None else positions)
    for entry in trace.periods:
        if entry.position not in wanted:
            continue
        for record in entry.evaluations:
            q = blueprint.question(record.question_id)
            block = _question_block(q.text, [q.variants[k] for k in record.options])
            if mode == "question_only":
                summary.question_answer_history.append({"question": block})
            else:
                summary.question_answer_history.append({
                    "question": block,
                    "assistant_response": _letter(record.chosen),
                    "ground_truth": _letter(record.truth),
                    "retrieved_memories": list(record.retrieved),
                })
        if mode == "complete" and entry.position >= 1:
            summary.user_information_updates.update(blueprint.periods[entry.position - 1].updates)
    return summary


def evolve_prompt(current: PolicyPrompt, feedback: FeedbackSummary, backend,
                  retry: RetryPolicy | None = None) -> PolicyPrompt:
    """``P_{k+1}`` from ``P_k`` and the feedback; failures keep ``P_k``'s text."""
    if feedback.mode == "none" or feedback.empty:
        return current.bump()
    section = current.mutable_section
    payload = feedback.to_dict()
    request = ChatRequest(
        (Message("system", prompts.get("self_evolution_system").body),
         Message("user", prompts.render("self_evolution_user", current_memory_types_section=section,
                                               feedback_summary=json.dumps(payload, indent=2,
                                                                           ensure_ascii=False)))),
        tag="evolve.step", context={"current": section, "feedback": payload})
    try:
        data = ask_json(backend, request, retry or RetryPolicy())
        new_types = data.get("new_types")
        if not isinstance(new_types, str) or not new_types.strip():
            raise BackendError("reply has no usable new_types", tag=request.tag)
    except BackendError as exc:
        log.warning("evolution step failed, keeping the current prompt: %s", exc)
        return current.bump([f"step failed: {exc}"])
    changes = data.get("changes", [])
    changes = [str(c) for c in changes] if isinstance(changes, list) else [str(changes)]
    return current.with_section(new_types, changes)


# --------------------------------------------------------------------------
# factual recall


def recall_claims(new_states: Mapping[str, str]) -> str:
    return "\n".join(f"{i}. {var}: {value}" for i, (var, value) in enumerate(new_states.items(), start=1))


def parse_judgments(reply: str, n: int) -> list[int]:
    """1 for each claim judged "yes"; anything missing or malformed is 0."""
    try:
        data = extract_json(reply)
    except BackendError:
        data = {}
    if not isinstance(data, dict):
        data = {}
    out = []
    for i in range(1, n + 1):
        value = data.get(str(i), data.get(i))
        out.append(1 if isinstance(value, str) and value.strip().lower() == "yes" else 0)
    return out


def recall_from_judgments(judgments: Sequence[int]) -> float:
    if not judgments:
        raise ValidationError("no judgments to average")
    return sum(judgments) / len(judgments)


def factual_recall(new_states: Mapping[str, str], memory_dump: str, backend,
                   retry: RetryPolicy | None = None) -> float:
    if not new_states:
        raise ValidationError("factual recall needs at least one state")
    prompt = prompts.render("factual_consistency", document=memory_dump or "(empty)",
                            claims=recall_claims(new_states))
    try:
        reply = complete_with_retry(backend, ChatRequest.user(prompt, tag="recall.check"), retry)
    except BackendError as exc:
        log.warning("recall checker failed, scoring all claims as no: %s", exc)
        reply = ""
    return recall_from_judgments(parse_judgments(reply, len(new_states)))


def recall_targets(blueprint: Blueprint) -> dict[str, str]:
    """Final values of every variable updated during the episode (full final state if none)."""
    final = state_at(blueprint, blueprint.n_periods)
    updated = [v for v in blueprint.schema.names if any(v in p.updates for p in blueprint.periods)]
    return {v: final[v] for v in updated} if updated else final


# --------------------------------------------------------------------------
# the loop


@dataclass
class CycleResult:
    cycle: int
    prompt: PolicyPrompt            # prompt used for this cycle's episodes (P_k)
    evolved: PolicyPrompt           # P_{k+1}
    feedback: FeedbackSummary
    reports: list[ReportBundle]
    traces: list[EpisodeTrace]
    recall: list[float]
    memory_dumps: list[dict]


def run_evolution(blueprints: Sequence[Blueprint], agent_cfg: AgentConfig, cycles: int, mode: str,
                  chat, user_backend=None, evolver=None, checker=None, seed: int = 0,
                  initial: PolicyPrompt | None = None, retry: RetryPolicy | None = None,
                  on_cycle: Callable[[CycleResult], None] | None = None) -> list[CycleResult]:
    """``cycles`` rounds of episode -> feedback -> prompt rewrite."""
    if cycles < 1:
        raise ValidationError("need at least one evolution cycle")
    if agent_cfg.kind != "awi":
        raise ValidationError("prompt evolution applies to the awi agent only")
    if mode not in FEEDBACK_MODES:
        raise ValidationError(f"unknown feedback mode {mode!r}")
    user_backend = user_backend or chat
    evolver = evolver or chat
    checker = checker or chat
    prompt = initial or PolicyPrompt.initial()
    results = []
    for k in range(cycles):
        reports, traces, recall, dumps = [], [], [], []
        feedback = FeedbackSummary(mode)
        for bp in blueprints:
            agent = MemoryAgent(agent_cfg, chat, retry=retry, update_prompt=prompt.full_text, seed=seed)
            trace = run_episode(bp, agent, SimulatedUser(bp, user_backend, retry), seed=seed,
                                agent_params={**agent_cfg.to_dict(), "prompt_version": prompt.version})
            traces.append(trace)
            reports.append(aggregate_report(trace, bp))
            dumps.append(agent.dump_memory())
            recall.append(factual_recall(recall_targets(bp), agent.memory_text(), checker, retry))
            part = build_feedback(trace, bp, mode)
            feedback.question_answer_history += part.question_answer_history
            feedback.user_information_updates.update(part.user_information_updates)
        evolved = evolve_prompt(prompt, feedback, evolver, retry)
        result = CycleResult(k, prompt, evolved, feedback, reports, traces, recall, dumps)
        results.append(result)
        if on_cycle:
            on_cycle(result)
        prompt = evolved
    return results
