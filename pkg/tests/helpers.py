"""Small hand-built fixtures shared by several test modules."""

from __future__ import annotations

from memgym.genesis import materialize_options
from memgym.model import (
    Blueprint,
    EvaluationQuestion,
    ExposureUtterance,
    GenConfig,
    LifeEvent,
    PeriodPlan,
    PersonaRecord,
    StateSchema,
    StateVariable,
    state_at,
    variant_key,
    variant_space,
)

SCHEMA = {
    "diet": ["vegan", "omnivore", "keto"],
    "city": ["paris", "tokyo", "lima"],
    "pet": ["cat", "dog"],
}


def make_blueprint(schema=None, initial=None, updates=None, required=(("diet", "city"), ("pet", "city")),
                   cap=7, seed=0) -> Blueprint:
    """Valid blueprint with one exposure query per variable and per update."""
    schema_map = schema or SCHEMA
    initial = initial or {v: c[0] for v, c in schema_map.items()}
    updates = updates if updates is not None else [{"city": "tokyo"}, {"diet": "keto"}, {"city": "lima", "pet": "dog"}]
    sch = StateSchema(tuple(StateVariable(v, tuple(c)) for v, c in schema_map.items()))
    periods = []
    for i, upd in enumerate(updates, start=1):
        events = tuple(LifeEvent((v,), f"{v} changed") for v in upd)
        queries = tuple(ExposureUtterance(f"update: my {v} is now {val}.", {v: val}) for v, val in upd.items())
        periods.append(PeriodPlan(i, f"period {i}", dict(upd), events, queries, f"2025-{i + 1:02d}-01"))
    initial_queries = tuple(ExposureUtterance(f"hello: my {v} is now {val}.", {v: val}) for v, val in initial.items())
    cfg = GenConfig(n_periods=len(updates), states_per_question=len(required[0]), turns_per_exposure=2,
                    num_questions=len(required), max_options_per_question=cap)
    questions = []
    for qid, req in enumerate(required):
        variants = {variant_key(a, sch): f"q{qid} answer for {variant_key(a, sch)}" for a in variant_space(sch, req)}
        questions.append(EvaluationQuestion(qid, f"question {qid}?", tuple(sch.order(req)), variants))
    draft = Blueprint(PersonaRecord("Tess", "A test persona.", "tiny"), sch, dict(initial), tuple(periods),
                      initial_queries, tuple(questions), cfg, "2025-01-01", seed)
    trajectory = [state_at(draft, t) for t in range(draft.n_positions)]
    full = tuple(EvaluationQuestion(q.id, q.text, q.required, q.variants,
                                    materialize_options(q, sch, trajectory, cap, seed)) for q in questions)
    return Blueprint(draft.persona, sch, draft.initial_state, draft.periods, draft.initial_queries, full, cfg,
                     draft.start_date, seed)
