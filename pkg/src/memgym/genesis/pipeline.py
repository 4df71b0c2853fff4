"""Offline blueprint generation.

persona -> questions -> canonical schema -> state trajectory and life events
-> verified exposure utterances -> verified per-variant answers -> blueprint.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

from ..backend import prompts
from ..backend.base import ChatRequest, RetryPolicy, ask_json, complete_with_retry, parse_choice_number
from ..errors import AssemblyError, BackendError, GenerationError
from ..model import (
    Blueprint,
    EvaluationQuestion,
    ExposureUtterance,
    GenConfig,
    LifeEvent,
    Message,
    PeriodPlan,
    PersonaRecord,
    StateSchema,
    StateVariable,
    add_months,
    ground_truth_variant,
    state_at,
    validate_blueprint,
    variant_key,
    variant_space,
)

log = logging.getLogger(__name__)

DEFAULT_START_DATE = "2025-01-01"
MAX_PROFILE_WORDS = 500


@dataclass(frozen=True)
class RawQuestion:
    text: str
    required_info: tuple[dict, ...]


@dataclass(frozen=True)
class VerifierOutcome:
    accepted: bool
    attempts: int
    last_prediction: object = None

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "attempts": self.attempts, "last_prediction": self.last_prediction}


@dataclass
class Generator:
    """Shared state for one blueprint's generation run."""

    backend: object
    cfg: GenConfig
    seed: int = 0
    start_date: str = DEFAULT_START_DATE
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    outcomes: list[dict] = field(default_factory=list)

    def request(self, template_id: str, tag: str, context: dict, **bindings) -> ChatRequest:
        prompt = prompts.render(template_id, **bindings)
        return ChatRequest.user(prompt, tag=tag, context={"seed": self.seed, **context})

    def ask(self, request: ChatRequest, expect=dict):
        try:
            return ask_json(self.backend, request, self.retry, expect=expect)
        except BackendError as exc:
            if isinstance(exc, GenerationError):
                raise
            raise GenerationError(f"[{request.tag}] {exc}") from exc

    def ask_valid(self, request: ChatRequest, check, what: str):
        """Ask until ``check(value)`` returns no problems, re-asking with the problems listed."""
        for attempt in range(self.cfg.max_refinements + 1):
            value = self.ask(request)
            problems = check(value)
            if not problems:
                return value
            log.info("%s rejected (attempt %d): %s", what, attempt + 1, "; ".join(problems))
            request = request.extended(
                Message("assistant", json.dumps(value, ensure_ascii=False)),
                Message("user", "The previous output was rejected:\n- " + "\n- ".join(problems)
                        + "\nReturn a corrected JSON object in the same format."))
        raise GenerationError(f"{what} still invalid after {self.cfg.max_refinements} re-asks: {problems}")


def _json(value) -> str:
    return json.dumps(value, indent=2, ensure_ascii=False)


# --------------------------------------------------------------------------
# persona


def summarize_persona(record: dict, backend, retry: RetryPolicy | None = None, seed: int = 0) -> PersonaRecord:
    basic = dict(record.get("basic", {}))
    complementary = str(record.get("complementary", ""))
    prompt = prompts.render("sample_user_profiles", basic_profile=_json(basic),
                            complementary_info=complementary or "(none)")
    request = ChatRequest.user(prompt, tag="gen.persona", context={"seed": seed, "record": record})
    try:
        data = ask_json(backend, request, retry or RetryPolicy())
    except BackendError as exc:
        raise GenerationError(f"persona summary failed: {exc}") from exc
    name = str(data.get("name") or basic.get("name") or "").strip()
    profile = str(data.get("profile") or "").strip()
    words = profile.split()
    if len(words) > MAX_PROFILE_WORDS:
        profile = " ".join(words[:MAX_PROFILE_WORDS])
    if not name or not profile:
        raise GenerationError("persona summary lacks a name or profile")
    return PersonaRecord(name, profile, str(record.get("source_id", "")))


# --------------------------------------------------------------------------
# questions and schema


def _parse_raw_questions(data, cfg: GenConfig) -> list[RawQuestion]:
    items = data.get("questions", []) if isinstance(data, dict) else data
    out = []
    for item in items if isinstance(items, list) else []:
        if not isinstance(item, dict):
            continue
        text = str(item.get("question", "")).strip()
        required = []
        for info in item.get("required_info", []) or []:
            if not isinstance(info, dict):
                continue
            name = str(info.get("info_type", "")).strip()
            choices = [str(c) for c in info.get("info_choices", []) or []]
            if name and len(choices) >= 2:
                required.append({"info_type": name, "info_choices": choices})
        names = [r["info_type"] for r in required]
        if text and len(required) == cfg.states_per_question and len(set(names)) == len(names):
            out.append(RawQuestion(text, tuple(required)))
    return out


def _sample_questions(gen: Generator, persona: PersonaRecord, n: int, attempt: int) -> list[RawQuestion]:
    cfg = gen.cfg
    request = gen.request(
        "sample_user_questions", "gen.questions",
        {"num_questions": n, "states_per_question": cfg.states_per_question,
         "num_choices": cfg.num_choices_per_state, "attempt": attempt},
        start_date=gen.start_date, user_profile=persona.profile, num_questions=n,
        num_total_months=cfg.n_periods * cfg.period_months,
        num_states_per_question=cfg.states_per_question,
        num_choices_per_state=cfg.num_choices_per_state, prompt_lang=cfg.language)
    return _parse_raw_questions(gen.ask(request, expect=(dict, list)), cfg)


def _refine_types(gen: Generator, persona: PersonaRecord, raw: list[RawQuestion]) -> dict[str, str]:
    info_types = list(dict.fromkeys(r["info_type"] for q in raw for r in q.required_info))
    listing = [{"question": q.text, "required_info": [r["info_type"] for r in q.required_info]} for q in raw]
    request = gen.request("refine_state_schema", "gen.refine_schema", {"info_types": info_types},
                          user_profile=persona.profile, questions_json=_json(listing),
                          prompt_lang=gen.cfg.language)
    data = gen.ask(request)
    alias_map: dict[str, str] = {}
    for canonical, members in data.items():
        members = members if isinstance(members, list) else [members]
        for m in members:
            if m in info_types and m not in alias_map:
                alias_map[m] = str(canonical)
    for t in info_types:
        alias_map.setdefault(t, t)
    return alias_map


def _unify_choices(gen: Generator, persona: PersonaRecord, raw: list[RawQuestion],
                   alias_map: dict[str, str]) -> dict[str, list[str]]:
    n = gen.cfg.num_choices_per_state
    groups: dict[str, list[dict]] = {}
    for q in raw:
        for r in q.required_info:
            canonical = alias_map[r["info_type"]]
            members = groups.setdefault(canonical, [])
            if all(m["info_type"] != r["info_type"] or m["info_choices"] != r["info_choices"] for m in members):
                members.append(r)
    unified: dict[str, list[str]] = {}
    conflicts: dict[str, list[dict]] = {}
    for canonical, members in groups.items():
        choice_sets = {tuple(m["info_choices"]) for m in members}
        only = next(iter(choice_sets))
        if len(choice_sets) == 1 and len(only) == n and len(set(only)) == n:
            unified[canonical] = list(only)
        else:
            conflicts[canonical] = members
    if conflicts:
        def check(value):
            problems = []
            for canonical in conflicts:
                choices = value.get(canonical)
                if not isinstance(choices, list) or len(choices) != n or len(set(map(str, choices))) != n:
                    problems.append(f"{canonical} needs exactly {n} distinct choices")
            return problems

        request = gen.request(
            "fix_schema", "gen.fix_schema", {"groups": conflicts, "num_choices": n},
            start_date=gen.start_date, user_profile=persona.profile, conflict_groups_json=_json(conflicts),
            num_total_months=gen.cfg.n_periods * gen.cfg.period_months, num_choices_per_state=n,
            prompt_lang=gen.cfg.language)
        fixed = gen.ask_valid(request, check, "unified choice sets")
        for canonical in conflicts:
            unified[canonical] = [str(c) for c in fixed[canonical]]
    return unified


def generate_schema_and_questions(persona: PersonaRecord, cfg: GenConfig, backend, seed: int = 0,
                                  start_date: str = DEFAULT_START_DATE, gen: Generator | None = None
                                  ) -> tuple[StateSchema, list[tuple[str, tuple[str, ...]]]]:
    """Canonical schema plus question skeletons ``(text, required canonical names)``."""
    gen = gen or Generator(backend, cfg, seed, start_date)
    raw = _sample_questions(gen, persona, cfg.num_questions, 0)
    attempt = 0
    while len(raw) < cfg.num_questions and attempt < cfg.max_refinements:
        attempt += 1
        raw += _sample_questions(gen, persona, cfg.num_questions - len(raw), attempt)
    if len(raw) < cfg.num_questions:
        raise GenerationError(f"only {len(raw)} well-formed questions out of {cfg.num_questions}")
    raw = raw[:cfg.num_questions]
    alias_map = _refine_types(gen, persona, raw)
    unified = _unify_choices(gen, persona, raw, alias_map)

    skeletons: list[tuple[str, tuple[str, ...]] | None] = []
    for q in raw:
        required = tuple(dict.fromkeys(alias_map[r["info_type"]] for r in q.required_info))
        skeletons.append((q.text, required) if len(required) == cfg.states_per_question else None)

    # questions that collapsed below the required count get one regeneration,
    # restricted to variables already in the schema
    for i, skeleton in enumerate(skeletons):
        if skeleton is not None:
            continue
        for attempt in range(1, cfg.max_refinements + 1):
            for candidate in _sample_questions(gen, persona, 1, 100 + 10 * i + attempt):
                types = [r["info_type"] for r in candidate.required_info]
                canon = tuple(dict.fromkeys(alias_map.get(t) or (t if t in unified else None) for t in types))
                if None not in canon and len(canon) == cfg.states_per_question and all(c in unified for c in canon):
                    skeletons[i] = (candidate.text, canon)
                    break
            if skeletons[i] is not None:
                break
        if skeletons[i] is None:
            raise GenerationError(f"question {i} lost required variables after merging and could not be regenerated")

    used = list(dict.fromkeys(v for _, req in skeletons for v in req))
    schema = StateSchema(tuple(StateVariable(v, tuple(unified[v])) for v in used),
                         {a: c for a, c in alias_map.items() if c in used})
    return schema, [(text, tuple(schema.order(req))) for text, req in skeletons]


# --------------------------------------------------------------------------
# state trajectory


def plan_evolution(persona: PersonaRecord, schema: StateSchema, cfg: GenConfig, backend, seed: int = 0,
                   start_date: str = DEFAULT_START_DATE, gen: Generator | None = None
                   ) -> tuple[dict[str, str], list[PeriodPlan]]:
    """Initial state plus per-period updates, summaries, and life events (no queries yet)."""
    gen = gen or Generator(backend, cfg, seed, start_date)
    choice_map = schema.as_choice_map()
    months = cfg.n_periods * cfg.period_months

    def check_initial(value):
        problems = [f"missing value for {v}" for v in schema.names if v not in value]
        problems += [f"{v}={value[v]!r} is not a valid choice" for v in schema.names
                     if v in value and value[v] not in choice_map[v]]
        return problems

    request = gen.request("sample_initial_state", "gen.initial_state", {"schema": choice_map},
                          num_total_months=months, start_date=start_date, user_profile=persona.profile,
                          state_schema_json=_json(choice_map))
    initial = gen.ask_valid(request, check_initial, "initial state")
    state = {v: initial[v] for v in schema.names}
    initial_state = dict(state)

    counts = {v: 0 for v in schema.names}
    n_changes = cfg.changes_per_period(len(schema))
    prior: list[dict] = []
    periods: list[PeriodPlan] = []
    for t in range(1, cfg.n_periods + 1):
        current_date = add_months(start_date, (t - 1) * cfg.period_months)
        end_date = add_months(start_date, t * cfg.period_months)

        def check_updates(value, state=state):
            updated = value.get("updated")
            if not isinstance(updated, dict) or not updated:
                return ["'updated' must be a non-empty object"]
            problems = []
            for var, new in updated.items():
                if var not in choice_map:
                    problems.append(f"{var} is not a schema variable")
                elif new not in choice_map[var]:
                    problems.append(f"{var}={new!r} is not a valid choice")
                elif new == state[var]:
                    problems.append(f"{var}={new!r} does not change the current value")
            return problems

        request = gen.request(
            "sample_state_updates", "gen.state_updates",
            {"schema": choice_map, "state": state, "update_counts": counts,
             "max_changes": cfg.max_changes_per_state, "num_changes": n_changes, "period": t},
            num_months=cfg.period_months, step=t, total_steps=cfg.n_periods, remaining=cfg.n_periods - t,
            current_date_str=current_date, end_date_str=end_date, start_date=start_date,
            user_profile=persona.profile, state_schema_json=_json(choice_map), latest_state_json=_json(state),
            prior_updates_json=_json(prior), max_changes_per_state=cfg.max_changes_per_state,
            update_cnts_json=_json(counts), num_changes_per_period=n_changes)
        proposal = gen.ask_valid(request, check_updates, f"period {t} state updates")
        updates = {v: proposal["updated"][v] for v in schema.order(proposal["updated"])}
        summary = str(proposal.get("period_summary", "")).strip() or "State changes for this period."
        changes = {v: {"from": state[v], "to": new} for v, new in updates.items()}
        events = _elaborate(gen, persona, t, current_date, end_date, summary, changes,
                            {v: state[v] for v in schema.names if v not in updates})
        for v in updates:
            counts[v] += 1
        prior.append({"period": t, "summary": summary, "updated": updates})
        state = {**state, **updates}
        periods.append(PeriodPlan(t, summary, updates, tuple(events), (), end_date))
    return initial_state, periods


def _elaborate(gen: Generator, persona, t, period_start, period_end, summary, changes, unchanged) -> list[LifeEvent]:
    def check(value):
        events = value.get("events")
        if not isinstance(events, list) or not events:
            return ["'events' must be a non-empty list"]
        covered = {s for e in events if isinstance(e, dict) for s in e.get("states", []) if s in changes}
        return [f"state change {v} is not explained by any event" for v in changes if v not in covered]

    request = gen.request("elaborate_state_updates", "gen.elaborate", {"changes": changes, "period": t},
                          start_date=gen.start_date, user_profile=persona.profile, period_start=period_start,
                          period_end=period_end, period_summary=summary, state_changes_json=_json(changes),
                          states_not_updated_json=_json(unchanged))
    data = gen.ask_valid(request, check, f"period {t} life events")
    events, seen = [], set()
    for e in data["events"]:
        if not isinstance(e, dict):
            continue
        # keep only updated, not-yet-claimed variables so events partition the updates
        states = [s for s in e.get("states", []) if s in changes and s not in seen]
        if states:
            seen.update(states)
            events.append(LifeEvent(tuple(states), str(e.get("event", "")).strip() or "Life event."))
    return events


# --------------------------------------------------------------------------
# exposure utterances


def verify_query(gen: Generator, query: str, exposed: dict[str, str], schema: StateSchema
                 ) -> tuple[ExposureUtterance, VerifierOutcome]:
    """Check that ``exposed`` is recoverable from ``query``; refine until it is."""
    choices = {v: list(schema.choices(v)) for v in exposed}
    prediction = None
    for attempt in range(1, gen.cfg.max_refinements + 2):
        request = gen.request("check_query_exposure", "gen.check_query", {"query": query, "choices": choices},
                              query=query, state_choices_json=_json(choices))
        prediction = gen.ask(request)
        if all(prediction.get(v) == value for v, value in exposed.items()):
            outcome = VerifierOutcome(True, attempt, {v: prediction.get(v) for v in exposed})
            gen.outcomes.append({"kind": "query", **outcome.to_dict()})
            return ExposureUtterance(query, dict(exposed)), outcome
        if attempt > gen.cfg.max_refinements:
            break
        request = gen.request("refine_query", "gen.refine_query",
                              {"query": query, "exposed": exposed, "attempt": attempt},
                              query=query, exposed_states_json=_json(exposed), state_choices_json=_json(choices))
        refined = gen.ask(request)
        query = str(refined.get("query", "")).strip() or query
    raise GenerationError(f"query never passed verification: {query!r} (variables {sorted(exposed)}, "
                          f"last prediction {prediction})")


def _initial_queries(gen: Generator, persona, schema: StateSchema, initial_state: dict[str, str]):
    remaining = dict(initial_state)
    accepted: list[tuple[ExposureUtterance, VerifierOutcome]] = []
    for attempt in range(gen.cfg.max_refinements + 1):
        if not remaining:
            break
        subset = {v: schema.choices(v) for v in remaining}
        request = gen.request("sample_initial_queries", "gen.initial_queries",
                              {"state": remaining, "attempt": attempt},
                              start_date=gen.start_date, user_profile=persona.profile,
                              initial_state_json=_json(remaining), state_schema_json=_json(
                                  {v: list(c) for v, c in subset.items()}))
        data = gen.ask(request, expect=(dict, list))
        items = data.get("queries", []) if isinstance(data, dict) else data
        for item in items if isinstance(items, list) else []:
            if not isinstance(item, dict):
                continue
            exposed = item.get("exposed_states") or {}
            query = str(item.get("query", "")).strip()
            exposed = {v: val for v, val in exposed.items() if remaining.get(v) == val}
            if not query or not 1 <= len(exposed) <= 3:
                continue
            accepted.append(verify_query(gen, query, exposed, schema))
            for v in exposed:
                remaining.pop(v, None)
    if remaining:
        raise GenerationError(f"initial queries never exposed {sorted(remaining)}")
    return accepted


def _update_queries(gen: Generator, persona, schema: StateSchema, plan: PeriodPlan, previous: dict[str, str]):
    context = [{"background": e.narrative,
                "state_transition": {v: {"from": previous[v], "to": plan.updates[v]} for v in e.states}}
               for e in plan.events]

    def check(value):
        queries = value.get("queries")
        if not isinstance(queries, list) or len(queries) != len(context):
            return [f"expected exactly {len(context)} queries, one per event"]
        return [f"query {i + 1} is empty" for i, q in enumerate(queries) if not str(q).strip()]

    request = gen.request("sample_update_queries", "gen.update_queries", {"events": context, "period": plan.index},
                          start_date=gen.start_date, user_profile_json=_json({"name": persona.name,
                                                                              "profile": persona.profile}),
                          period_start=add_months(gen.start_date, (plan.index - 1) * gen.cfg.period_months),
                          period_end=plan.date, context_json=_json(context),
                          state_schema_json=_json(schema.as_choice_map()))
    data = gen.ask_valid(request, check, f"period {plan.index} update queries")
    return [verify_query(gen, str(q).strip(), {v: plan.updates[v] for v in e.states}, schema)
            for q, e in zip(data["queries"], plan.events)]


def generate_exposure_queries(persona, schema: StateSchema, initial_state: dict[str, str],
                              periods: list[PeriodPlan], backend, cfg: GenConfig, seed: int = 0,
                              start_date: str = DEFAULT_START_DATE, gen: Generator | None = None):
    """Verified initial queries and each period's update queries."""
    gen = gen or Generator(backend, cfg, seed, start_date)
    initial = _initial_queries(gen, persona, schema, initial_state)
    per_period = []
    state = dict(initial_state)
    for plan in periods:
        per_period.append(_update_queries(gen, persona, schema, plan, state))
        state.update(plan.updates)
    return initial, per_period


# --------------------------------------------------------------------------
# variant answers


def _variant_lines(variants: list[dict[str, str]], label: str) -> str:
    return "\n".join(f"{label} {i}: {json.dumps(v, ensure_ascii=False)}" for i, v in enumerate(variants, start=1))


def _classify(gen: Generator, question: str, answer: str, variants: list[dict[str, str]]) -> int | None:
    choices = "\n".join(f"{i}. {json.dumps(v, ensure_ascii=False)}" for i, v in enumerate(variants, start=1))
    request = gen.request("check_personalized_answer", "gen.check_answer",
                          {"answer": answer, "choices": variants},
                          question=question, answer=answer, choices=choices)
    n = parse_choice_number(complete_with_retry(gen.backend, request, gen.retry))
    return n - 1 if n is not None and 1 <= n <= len(variants) else None


def generate_variant_answers(question: str, required: tuple[str, ...], schema: StateSchema, backend,
                             cfg: GenConfig, seed: int = 0, gen: Generator | None = None
                             ) -> tuple[dict[str, str], list[VerifierOutcome]]:
    """One classifier-recoverable answer per variant of the required variables."""
    gen = gen or Generator(backend, cfg, seed)
    variants = variant_space(schema, required)
    info = [{"info_type": v, "choices": list(schema.choices(v))} for v in required]
    request = gen.request("sample_personalized_answers", "gen.answers",
                          {"question": question, "variants": variants},
                          question=question, required_info_types=_json(info),
                          variants_text=_variant_lines(variants, "Variant"))
    failure, data = None, None
    for regeneration in range(2):
        if regeneration:
            request = request.extended(
                Message("assistant", json.dumps(data, ensure_ascii=False)),
                Message("user", f"Answers could not be told apart ({failure}). Write a fresh set where each "
                                "answer clearly matches its own variant, in the same JSON format."))
        data = gen.ask(request)
        try:
            return _verify_answers(gen, question, variants, schema, data)
        except GenerationError as exc:
            failure = str(exc)
            log.info("regenerating answers for %r: %s", question, exc)
    raise GenerationError(f"answers for question {question!r} unresolvable after regeneration: {failure}")


def _verify_answers(gen: Generator, question: str, variants: list[dict[str, str]], schema: StateSchema, data: dict):
    answers: dict[str, str] = {}
    outcomes: list[VerifierOutcome] = []
    for i, variant in enumerate(variants):
        answer = str(data.get(f"variant_{i + 1}", "")).strip()
        if not answer:
            raise GenerationError(f"missing answer for variant {i + 1}")
        predicted = None
        for attempt in range(1, gen.cfg.max_refinements + 2):
            predicted = _classify(gen, question, answer, variants)
            if predicted == i and answer not in answers.values():
                outcome = VerifierOutcome(True, attempt, variant_key(variants[i], schema))
                outcomes.append(outcome)
                gen.outcomes.append({"kind": "answer", **outcome.to_dict()})
                break
            if attempt > gen.cfg.max_refinements:
                raise GenerationError(f"variant {variant_key(variant, schema)} not recovered by the classifier")
            others = [v for j, v in enumerate(variants) if j != i]
            request = gen.request("refine_personalized_answer", "gen.refine_answer",
                                  {"question": question, "target": variant, "attempt": attempt},
                                  question=question, matched_state=json.dumps(variant, ensure_ascii=False),
                                  other_states_text=_variant_lines(others, "Variant"), answer=answer)
            refined = gen.ask(request)
            answer = str(refined.get("answer", "")).strip() or answer
        answers[variant_key(variant, schema)] = answer
    return answers, outcomes


# --------------------------------------------------------------------------
# assembly


def materialize_options(question: EvaluationQuestion, schema: StateSchema, trajectory: list[dict[str, str]],
                        cap: int, seed: int) -> tuple[tuple[str, ...], ...]:
    """Per-position option lists: every variant if it fits the cap, else truth plus sampled distractors."""
    keys = list(question.variants)
    per_position = []
    for t, state in enumerate(trajectory):
        rng = random.Random(f"options:{seed}:{question.id}:{t}")
        truth = ground_truth_variant(question, state, schema)
        if len(keys) <= cap:
            chosen = list(keys)
        else:
            chosen = [truth] + rng.sample([k for k in keys if k != truth], cap - 1)
        rng.shuffle(chosen)
        per_position.append(tuple(chosen))
    return tuple(per_position)


def assemble_blueprint(persona: PersonaRecord, schema: StateSchema, initial_state: dict[str, str],
                       periods: list[PeriodPlan], initial_queries, update_queries,
                       questions: list[tuple[str, tuple[str, ...], dict[str, str]]], cfg: GenConfig,
                       seed: int, start_date: str = DEFAULT_START_DATE) -> Blueprint:
    plans = tuple(PeriodPlan(p.index, p.summary, p.updates, p.events, tuple(u for u, _ in qs), p.date)
                  for p, qs in zip(periods, update_queries))
    bare = [EvaluationQuestion(i, text, required, variants) for i, (text, required, variants) in enumerate(questions)]
    draft = Blueprint(persona, schema, initial_state, plans, tuple(u for u, _ in initial_queries),
                      tuple(bare), cfg, start_date, seed)
    violations = validate_blueprint(draft)
    if violations:
        raise AssemblyError(violations)
    trajectory = [state_at(draft, t) for t in range(draft.n_positions)]
    full = tuple(EvaluationQuestion(q.id, q.text, q.required, q.variants,
                                    materialize_options(q, schema, trajectory, cfg.max_options_per_question, seed))
                 for q in bare)
    blueprint = Blueprint(persona, schema, initial_state, plans, draft.initial_queries, full, cfg, start_date, seed)
    violations = validate_blueprint(blueprint)
    if violations:
        raise AssemblyError(violations)
    return blueprint


@dataclass
class GenerationResult:
    blueprint: Blueprint
    outcomes: list[dict]

    def verifier_stats(self) -> dict:
        stats = {}
        for kind in ("query", "answer"):
            rows = [o for o in self.outcomes if o["kind"] == kind]
            stats[kind] = {"count": len(rows),
                           "refined": sum(o["attempts"] > 1 for o in rows),
                           "max_attempts": max((o["attempts"] for o in rows), default=0)}
        return stats


def run_pipeline(record: dict, cfg: GenConfig, backend, seed: int = 0, start_date: str = DEFAULT_START_DATE,
                 retry: RetryPolicy | None = None) -> GenerationResult:
    gen = Generator(backend, cfg, seed, start_date, retry or RetryPolicy())
    persona = summarize_persona(record, backend, gen.retry, seed)
    schema, skeletons = generate_schema_and_questions(persona, cfg, backend, seed, start_date, gen)
    initial_state, periods = plan_evolution(persona, schema, cfg, backend, seed, start_date, gen)
    initial_queries, update_queries = generate_exposure_queries(persona, schema, initial_state, periods,
                                                                backend, cfg, seed, start_date, gen)
    questions = []
    for text, required in skeletons:
        variants, _ = generate_variant_answers(text, required, schema, backend, cfg, seed, gen)
        questions.append((text, required, variants))
    blueprint = assemble_blueprint(persona, schema, initial_state, periods, initial_queries, update_queries,
                                   questions, cfg, seed, start_date)
    return GenerationResult(blueprint, gen.outcomes)


def generate_blueprint(record: dict, cfg: GenConfig, backend, seed: int = 0,
                       start_date: str = DEFAULT_START_DATE, retry: RetryPolicy | None = None) -> Blueprint:
    return run_pipeline(record, cfg, backend, seed, start_date, retry).blueprint
