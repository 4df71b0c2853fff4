"""Domain types and the pure functions over them.

All records are frozen dataclasses. Sequences are stored as tuples; mappings
are plain dicts that callers treat as read-only. Every top-level document
(blueprint, trace, report) serializes to versioned JSON.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any, Iterable, Mapping

from .errors import IntegrityError, RangeError, ValidationError

FORMAT_VERSION = "1"
VERSION_KEY = "amemgym_version"

StateAssignment = dict  # variable name -> value


def _tuple(seq: Iterable | None) -> tuple:
    return tuple(seq) if seq is not None else ()


def _freeze(obj, **coerce):
    for name, fn in coerce.items():
        object.__setattr__(obj, name, fn(getattr(obj, name)))


# --------------------------------------------------------------------------
# Persona and schema


@dataclass(frozen=True)
class PersonaRecord:
    name: str
    profile: str
    source_id: str = ""

    def __post_init__(self):
        if not self.name.strip():
            raise ValidationError("persona name is empty")
        if not self.profile.strip():
            raise ValidationError("persona profile is empty")

    def to_dict(self) -> dict:
        return {"name": self.name, "profile": self.profile, "source_id": self.source_id}

    @classmethod
    def from_dict(cls, d: Mapping) -> PersonaRecord:
        return cls(d["name"], d["profile"], str(d.get("source_id", "")))


@dataclass(frozen=True)
class StateVariable:
    name: str
    choices: tuple[str, ...]

    def __post_init__(self):
        _freeze(self, choices=_tuple)
        if len(self.choices) < 2:
            raise ValidationError(f"state variable {self.name!r} needs at least 2 choices")
        if len(set(self.choices)) != len(self.choices):
            raise ValidationError(f"state variable {self.name!r} has duplicate choices")


@dataclass(frozen=True)
class StateSchema:
    variables: tuple[StateVariable, ...]
    alias_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        _freeze(self, variables=_tuple)
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate variable names in schema")
        known = set(names)
        for alias, canonical in self.alias_map.items():
            if canonical not in known:
                raise ValidationError(f"alias {alias!r} maps to unknown variable {canonical!r}")

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def __len__(self) -> int:
        return len(self.variables)

    def __contains__(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    def variable(self, name: str) -> StateVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def choices(self, name: str) -> tuple[str, ...]:
        return self.variable(name).choices

    def order(self, names: Iterable[str]) -> list[str]:
        """Return ``names`` sorted by schema position (unknown names last)."""
        pos = {n: i for i, n in enumerate(self.names)}
        return sorted(names, key=lambda n: (pos.get(n, len(pos)), n))

    def as_choice_map(self) -> dict[str, list[str]]:
        return {v.name: list(v.choices) for v in self.variables}

    def to_dict(self) -> dict:
        return {
            "variables": [{"name": v.name, "choices": list(v.choices)} for v in self.variables],
            "alias_map": dict(self.alias_map),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> StateSchema:
        return cls(
            tuple(StateVariable(v["name"], tuple(v["choices"])) for v in d["variables"]),
            dict(d.get("alias_map", {})),
        )


# --------------------------------------------------------------------------
# Evolution plan


@dataclass(frozen=True)
class ExposureUtterance:
    query: str
    exposed: dict[str, str]

    def __post_init__(self):
        if not self.query.strip():
            raise ValidationError("exposure query is empty")
        if not self.exposed:
            raise ValidationError("exposure utterance exposes nothing")

    def to_dict(self) -> dict:
        return {"query": self.query, "exposed": dict(self.exposed)}

    @classmethod
    def from_dict(cls, d: Mapping) -> ExposureUtterance:
        return cls(d["query"], dict(d["exposed"]))


@dataclass(frozen=True)
class LifeEvent:
    states: tuple[str, ...]
    narrative: str

    def __post_init__(self):
        _freeze(self, states=_tuple)
        if not self.states:
            raise ValidationError("life event affects no states")

    def to_dict(self) -> dict:
        return {"states": list(self.states), "event": self.narrative}

    @classmethod
    def from_dict(cls, d: Mapping) -> LifeEvent:
        return cls(tuple(d["states"]), d["event"])


@dataclass(frozen=True)
class PeriodPlan:
    index: int
    summary: str
    updates: dict[str, str]
    events: tuple[LifeEvent, ...] = ()
    update_queries: tuple[ExposureUtterance, ...] = ()
    date: str = ""

    def __post_init__(self):
        _freeze(self, events=_tuple, update_queries=_tuple)
        if self.index < 1:
            raise ValidationError("period index must be >= 1")

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "date": self.date,
            "summary": self.summary,
            "updates": dict(self.updates),
            "events": [e.to_dict() for e in self.events],
            "update_queries": [q.to_dict() for q in self.update_queries],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PeriodPlan:
        return cls(
            index=d["index"],
            summary=d["summary"],
            updates=dict(d["updates"]),
            events=tuple(LifeEvent.from_dict(e) for e in d.get("events", [])),
            update_queries=tuple(ExposureUtterance.from_dict(q) for q in d.get("update_queries", [])),
            date=d.get("date", ""),
        )


# --------------------------------------------------------------------------
# Questions and generation config


@dataclass(frozen=True)
class EvaluationQuestion:
    """A state-dependent question with one answer per state variant.

    ``options`` holds, for every evaluation position, the ordered list of
    variant keys presented as multiple-choice options.
    """

    id: int
    text: str
    required: tuple[str, ...]
    variants: dict[str, str]
    options: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        _freeze(self, required=_tuple, options=lambda o: tuple(tuple(x) for x in o))

    def options_at(self, position: int) -> tuple[str, ...]:
        return self.options[position]

    def answer(self, key: str) -> str:
        return self.variants[key]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "required": list(self.required),
            "variants": dict(self.variants),
            "options": [list(o) for o in self.options],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> EvaluationQuestion:
        return cls(d["id"], d["text"], tuple(d["required"]), dict(d["variants"]),
                   tuple(tuple(o) for o in d.get("options", [])))


@dataclass(frozen=True)
class GenConfig:
    n_periods: int = 10
    states_per_question: int = 2
    turns_per_exposure: int = 4
    num_questions: int = 10
    num_choices_per_state: int = 3
    max_changes_per_state: int = 3
    num_changes_per_period: int | None = None
    max_options_per_question: int = 7
    language: str = "English"
    max_refinements: int = 3
    period_months: int = 1

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, int) and f.name != "num_changes_per_period" and value < 1:
                raise ValidationError(f"GenConfig.{f.name} must be >= 1")
        if self.num_changes_per_period is not None and self.num_changes_per_period < 1:
            raise ValidationError("GenConfig.num_changes_per_period must be >= 1")

    @classmethod
    def preset(cls, name: str, **overrides) -> GenConfig:
        presets = {"base": (10, 2, 4), "extra": (20, 3, 10)}
        if name not in presets:
            raise ValidationError(f"unknown preset {name!r}; expected one of {sorted(presets)}")
        n_p, n_s, n_i = presets[name]
        kwargs = dict(n_periods=n_p, states_per_question=n_s, turns_per_exposure=n_i)
        kwargs.update(overrides)
        return cls(**kwargs)

    def changes_per_period(self, n_variables: int) -> int:
        if self.num_changes_per_period is not None:
            return self.num_changes_per_period
        return math.ceil(n_variables / self.n_periods) + 1

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: Mapping) -> GenConfig:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


# --------------------------------------------------------------------------
# Blueprint


@dataclass(frozen=True)
class Blueprint:
    persona: PersonaRecord
    schema: StateSchema
    initial_state: dict[str, str]
    periods: tuple[PeriodPlan, ...]
    initial_queries: tuple[ExposureUtterance, ...]
    questions: tuple[EvaluationQuestion, ...]
    config: GenConfig
    start_date: str
    seed: int

    def __post_init__(self):
        _freeze(self, periods=_tuple, initial_queries=_tuple, questions=_tuple)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    @property
    def n_positions(self) -> int:
        return len(self.periods) + 1

    def question(self, qid: int) -> EvaluationQuestion:
        for q in self.questions:
            if q.id == qid:
                return q
        raise KeyError(qid)

    def date_at(self, t: int) -> str:
        return add_months(self.start_date, t * self.config.period_months)

    def to_dict(self) -> dict:
        return {
            VERSION_KEY: FORMAT_VERSION,
            "persona": self.persona.to_dict(),
            "schema": self.schema.to_dict(),
            "initial_state": dict(self.initial_state),
            "initial_queries": [q.to_dict() for q in self.initial_queries],
            "periods": [p.to_dict() for p in self.periods],
            "questions": [q.to_dict() for q in self.questions],
            "config": self.config.to_dict(),
            "start_date": self.start_date,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Blueprint:
        check_version(d, "blueprint")
        return cls(
            persona=PersonaRecord.from_dict(d["persona"]),
            schema=StateSchema.from_dict(d["schema"]),
            initial_state=dict(d["initial_state"]),
            periods=tuple(PeriodPlan.from_dict(p) for p in d["periods"]),
            initial_queries=tuple(ExposureUtterance.from_dict(q) for q in d["initial_queries"]),
            questions=tuple(EvaluationQuestion.from_dict(q) for q in d["questions"]),
            config=GenConfig.from_dict(d["config"]),
            start_date=d["start_date"],
            seed=d["seed"],
        )


def blueprint_id(blueprint: Blueprint) -> str:
    """Content hash identifying a blueprint; traces refer to it."""
    digest = hashlib.sha256(dumps(blueprint).encode("utf-8")).hexdigest()[:16]
    return f"{blueprint.persona.source_id or 'user'}-{digest}"


# --------------------------------------------------------------------------
# Episode traces


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("user", "assistant", "system"):
            raise ValidationError(f"bad message role {self.role!r}")
        if self.role != "system" and not self.content:
            raise ValidationError(f"empty {self.role} message")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_dict(cls, d: Mapping) -> Message:
        return cls(d["role"], d["content"])


@dataclass(frozen=True)
class EvaluationRecord:
    """Outcome of one question at one position.

    ``chosen`` / ``ub_chosen`` are zero-based option indices, ``None`` for an
    abstention. ``options`` are variant keys in presentation order.
    """

    question_id: int
    options: tuple[str, ...]
    truth: int
    chosen: int | None
    ub_chosen: int | None
    retrieved: tuple[str, ...] = ()

    def __post_init__(self):
        _freeze(self, options=_tuple, retrieved=_tuple)

    @property
    def correct(self) -> bool:
        return self.chosen == self.truth

    @property
    def ub_correct(self) -> bool:
        return self.ub_chosen == self.truth

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "options": list(self.options),
            "truth": self.truth,
            "chosen": self.chosen,
            "ub_chosen": self.ub_chosen,
            "retrieved": list(self.retrieved),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> EvaluationRecord:
        return cls(d["question_id"], tuple(d["options"]), d["truth"], d["chosen"],
                   d["ub_chosen"], tuple(d.get("retrieved", [])))


@dataclass(frozen=True)
class PeriodTraceEntry:
    position: int
    date: str
    sessions: tuple[tuple[Message, ...], ...]
    evaluations: tuple[EvaluationRecord, ...]
    probe: dict[str, str | None]
    events: tuple[str, ...] = ()

    def __post_init__(self):
        _freeze(self, sessions=lambda s: tuple(tuple(m) for m in s),
                evaluations=_tuple, events=_tuple)

    @property
    def n_rounds(self) -> int:
        return sum(len(s) // 2 for s in self.sessions)

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "date": self.date,
            "sessions": [[m.to_dict() for m in s] for s in self.sessions],
            "evaluations": [e.to_dict() for e in self.evaluations],
            "probe": dict(self.probe),
            "events": list(self.events),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PeriodTraceEntry:
        return cls(
            position=d["position"],
            date=d.get("date", ""),
            sessions=tuple(tuple(Message.from_dict(m) for m in s) for s in d["sessions"]),
            evaluations=tuple(EvaluationRecord.from_dict(e) for e in d["evaluations"]),
            probe=dict(d["probe"]),
            events=tuple(d.get("events", [])),
        )


@dataclass(frozen=True)
class EpisodeTrace:
    blueprint_ref: str
    agent_descriptor: str
    mode: str
    seed: int
    periods: tuple[PeriodTraceEntry, ...]
    replay_source: str | None = None
    agent_params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        _freeze(self, periods=_tuple)
        if self.mode not in ("onpolicy", "offpolicy"):
            raise ValidationError(f"bad trace mode {self.mode!r}")

    @property
    def n_sessions(self) -> int:
        return sum(len(p.sessions) for p in self.periods)

    @property
    def n_rounds(self) -> int:
        return sum(p.n_rounds for p in self.periods)

    def to_dict(self) -> dict:
        return {
            VERSION_KEY: FORMAT_VERSION,
            "blueprint_ref": self.blueprint_ref,
            "agent_descriptor": self.agent_descriptor,
            "agent_params": dict(self.agent_params),
            "mode": self.mode,
            "replay_source": self.replay_source,
            "seed": self.seed,
            "periods": [p.to_dict() for p in self.periods],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> EpisodeTrace:
        check_version(d, "trace")
        return cls(
            blueprint_ref=d["blueprint_ref"],
            agent_descriptor=d["agent_descriptor"],
            mode=d["mode"],
            seed=d["seed"],
            periods=tuple(PeriodTraceEntry.from_dict(p) for p in d["periods"]),
            replay_source=d.get("replay_source"),
            agent_params=dict(d.get("agent_params", {})),
        )


# --------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class ReportBundle:
    per_position: tuple[dict, ...]
    diagnostics: tuple[dict, ...]
    aggregate: dict[str, float | None]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        _freeze(self, per_position=_tuple, diagnostics=_tuple)

    def to_dict(self) -> dict:
        return {
            VERSION_KEY: FORMAT_VERSION,
            "per_position": [dict(p) for p in self.per_position],
            "diagnostics": [dict(d) for d in self.diagnostics],
            "aggregate": dict(self.aggregate),
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ReportBundle:
        check_version(d, "report")
        return cls(tuple(d["per_position"]), tuple(d["diagnostics"]),
                   dict(d["aggregate"]), dict(d.get("metadata", {})))


# --------------------------------------------------------------------------
# Serialization


def check_version(d: Mapping, kind: str) -> None:
    version = d.get(VERSION_KEY)
    if version != FORMAT_VERSION:
        raise ValidationError(f"{kind} document has {VERSION_KEY}={version!r}, expected {FORMAT_VERSION!r}")


def dumps(obj) -> str:
    """Stable JSON text for any top-level document."""
    data = obj.to_dict() if hasattr(obj, "to_dict") else obj
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def loads(text: str, cls):
    return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# Pure state functions


def overlay(state: Mapping[str, str], updates: Mapping[str, str]) -> dict[str, str]:
    merged = dict(state)
    merged.update(updates)
    return merged


def state_at(blueprint: Blueprint, t: int) -> dict[str, str]:
    """Full state vector at the end of period ``t`` (0 = initial state)."""
    if not 0 <= t <= blueprint.n_periods:
        raise RangeError(f"position {t} outside 0..{blueprint.n_periods}")
    state = dict(blueprint.initial_state)
    for plan in blueprint.periods[:t]:
        state.update(plan.updates)
    return state


def variant_key(assignment: Mapping[str, str], schema: StateSchema | None = None) -> str:
    """Canonical ``name=value|name=value`` key, variables in schema order."""
    names = schema.order(assignment) if schema is not None else list(assignment)
    return "|".join(f"{n}={assignment[n]}" for n in names)


def parse_variant_key(key: str) -> dict[str, str]:
    out = {}
    for part in key.split("|"):
        name, _, value = part.partition("=")
        out[name] = value
    return out


def ground_truth_variant(question: EvaluationQuestion, state: Mapping[str, str],
                         schema: StateSchema | None = None) -> str:
    missing = [v for v in question.required if v not in state]
    if missing:
        raise IntegrityError(f"question {question.id}: state lacks required {missing}")
    restricted = {v: state[v] for v in question.required}
    if schema is None:
        return "|".join(f"{n}={restricted[n]}" for n in question.required)
    return variant_key(restricted, schema)


def variant_space(schema: StateSchema, required: Iterable[str]) -> list[dict[str, str]]:
    """Cartesian product of the required variables' choices, schema-ordered."""
    names = schema.order(required)
    space: list[dict[str, str]] = [{}]
    for name in names:
        space = [{**partial, name: c} for partial in space for c in schema.choices(name)]
    return space


def write_position(blueprint: Blueprint, variable: str, t: int) -> int:
    """Latest period <= t whose updates set ``variable``; 0 if never updated."""
    for plan in reversed(blueprint.periods[:t]):
        if variable in plan.updates:
            return plan.index
    return 0


# --------------------------------------------------------------------------
# Validation


def validate_blueprint(bp: Blueprint) -> list[str]:
    violations: list[str] = []
    schema = bp.schema
    names = set(schema.names)
    cfg = bp.config

    def legal(var: str, value: str) -> bool:
        return var in names and value in schema.choices(var)

    if set(bp.initial_state) != names:
        violations.append(
            f"initial_state keys differ from schema: missing={sorted(names - set(bp.initial_state))} "
            f"extra={sorted(set(bp.initial_state) - names)}")
    for var, value in bp.initial_state.items():
        if var in names and not legal(var, value):
            violations.append(f"initial_state: {var}={value!r} not a legal choice")

    covered = set()
    for i, q in enumerate(bp.initial_queries):
        for var, value in q.exposed.items():
            if bp.initial_state.get(var) != value:
                violations.append(f"initial query {i}: exposes {var}={value!r} but initial value is "
                                  f"{bp.initial_state.get(var)!r}")
        if not 1 <= len(q.exposed) <= 3:
            violations.append(f"initial query {i}: exposes {len(q.exposed)} variables (expected 1-3)")
        covered.update(q.exposed)
    for var in sorted(names - covered):
        violations.append(f"exposure coverage: variable {var} not exposed by any initial query")

    if len(bp.periods) != cfg.n_periods:
        violations.append(f"expected {cfg.n_periods} periods, found {len(bp.periods)}")
    state = dict(bp.initial_state)
    for expected_index, plan in enumerate(bp.periods, start=1):
        tag = f"period {plan.index}"
        if plan.index != expected_index:
            violations.append(f"{tag}: index out of sequence (expected {expected_index})")
        for var, value in plan.updates.items():
            if var not in names:
                violations.append(f"{tag}: update to unknown variable {var}")
            elif not legal(var, value):
                violations.append(f"{tag}: {var}={value!r} not a legal choice")
            elif state.get(var) == value:
                violations.append(f"{tag}: no-op update {var}={value!r}")
        event_states = {s for e in plan.events for s in e.states}
        for var in sorted(set(plan.updates) - event_states):
            violations.append(f"{tag}: update {var} not covered by any life event")
        for var in sorted(event_states - set(plan.updates)):
            violations.append(f"{tag}: life event references non-updated variable {var}")
        exposed = set()
        for k, q in enumerate(plan.update_queries):
            for var, value in q.exposed.items():
                if plan.updates.get(var) != value:
                    violations.append(f"{tag}: update query {k} exposes {var}={value!r} not in updates")
            exposed.update(q.exposed)
        for var in sorted(set(plan.updates) - exposed):
            violations.append(f"{tag}: update {var} not exposed by any update query")
        state.update(plan.updates)

    ids = [q.id for q in bp.questions]
    if len(set(ids)) != len(ids):
        violations.append("duplicate question ids")
    trajectory = [state_at(bp, t) for t in range(bp.n_positions)] if not violations else None
    for q in bp.questions:
        tag = f"question {q.id}"
        unknown = [v for v in q.required if v not in names]
        if unknown:
            violations.append(f"{tag}: requires unknown variables {unknown}")
            continue
        if len(q.required) != cfg.states_per_question:
            violations.append(f"{tag}: requires {len(q.required)} variables, expected {cfg.states_per_question}")
        if len(set(q.required)) != len(q.required):
            violations.append(f"{tag}: duplicate required variables")
        expected = {variant_key(v, schema) for v in variant_space(schema, q.required)}
        for key in sorted(expected - set(q.variants)):
            violations.append(f"{tag}: missing variant {key}")
        for key in sorted(set(q.variants) - expected):
            violations.append(f"{tag}: unexpected variant {key}")
        answers = list(q.variants.values())
        if len(set(answers)) != len(answers):
            violations.append(f"{tag}: variant answers are not pairwise distinct")
        if any(not a.strip() for a in answers):
            violations.append(f"{tag}: empty variant answer")
        if q.options:
            if len(q.options) != bp.n_positions:
                violations.append(f"{tag}: options for {len(q.options)} positions, expected {bp.n_positions}")
            elif trajectory is not None:
                for t, opts in enumerate(q.options):
                    truth = ground_truth_variant(q, trajectory[t], schema)
                    if truth not in opts:
                        violations.append(f"{tag}: position {t} options omit ground truth")
                    if len(set(opts)) != len(opts) or not set(opts) <= set(q.variants):
                        violations.append(f"{tag}: position {t} has invalid option keys")
                    if len(opts) > cfg.max_options_per_question:
                        violations.append(f"{tag}: position {t} exceeds the option cap")
    if len(bp.questions) != cfg.num_questions:
        violations.append(f"expected {cfg.num_questions} questions, found {len(bp.questions)}")
    return violations


# --------------------------------------------------------------------------
# Dates


def add_months(date: str, months: int) -> str:
    d = _dt.date.fromisoformat(date)
    month_index = d.month - 1 + months
    year = d.year + month_index // 12
    month = month_index % 12 + 1
    # clamp day for short months
    for day in range(d.day, 27, -1):
        try:
            return _dt.date(year, month, day).isoformat()
        except ValueError:
            continue
    return _dt.date(year, month, min(d.day, 28)).isoformat()
