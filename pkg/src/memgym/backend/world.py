"""Default scripted world: a complete rule set for offline runs.

Generator-side rules (``gen.*``) read the structured request context, the
way a generator model would "know" the task. Assistant-side rules
(``agent.*``) see only the rendered messages, so what a scripted assistant
can answer depends on what its memory architecture put in context.

Scripted text follows a few fixed phrasings that the rules parse back:

* exposure utterances say ``my <variable> is now <value>``;
* variant answers say ``your <variable> (<value>)`` for every required variable;
* values appear with underscores replaced by spaces.
"""

from __future__ import annotations

import functools
import json
import random
import re

from .base import ChatRequest, extract_json
from .scripted import ScriptedBackend, ScriptedEmbedding

# canonical name -> (aliases, choices, topic phrase)
VOCABULARY: dict[str, tuple[tuple[str, ...], tuple[str, ...], str]] = {
    "professional_experience_years": (
        ("current_experience_level", "experience_level_years"),
        ("junior_0_2_years", "mid_level_3_5_years", "senior_6_10_years", "expert_10_plus_years"),
        "my career development"),
    "team_management_size": (
        ("team_size", "subordinate_count"),
        ("no_management", "small_team_2_5", "medium_team_6_15", "large_team_15_plus"),
        "leading people at work"),
    "work_location": (
        ("work_location", "commute_situation"),
        ("fully_remote_home", "hybrid_two_office_days", "onsite_city_office", "rotating_client_sites"),
        "staying productive at work"),
    "work_schedule": (
        ("work_schedule", "working_hours"),
        ("flexible_self_set_hours", "standard_nine_to_five", "early_shift_mornings", "rotating_night_shifts"),
        "organizing my week"),
    "monthly_budget_level": (
        ("budget", "spending_budget"),
        ("tight_budget_under_500", "moderate_budget_500_1500", "comfortable_budget_1500_3000",
         "generous_budget_over_3000"),
        "planning my spending"),
    "household_composition": (
        ("family_status", "household_members"),
        ("living_alone", "living_with_partner", "family_with_young_children", "shared_house_with_roommates"),
        "running my household"),
    "fitness_activity_level": (
        ("fitness_level", "exercise_frequency"),
        ("mostly_sedentary", "light_weekly_walks", "moderate_gym_three_times", "intense_daily_training"),
        "staying fit"),
    "dietary_pattern": (
        ("diet", "eating_preferences"),
        ("omnivore_home_cooking", "vegetarian_meals", "low_carb_plan", "frequent_takeout_meals"),
        "planning my meals"),
    "sleep_pattern": (
        ("sleep_schedule",),
        ("early_bird_sleeper", "night_owl_sleeper", "irregular_short_sleep", "steady_eight_hours"),
        "getting enough rest"),
    "primary_transport_mode": (
        ("transportation", "commute_mode"),
        ("public_transit_rider", "personal_car_driver", "cycling_commuter", "walking_everywhere"),
        "getting around town"),
    "housing_situation": (
        ("housing", "living_arrangement"),
        ("renting_small_apartment", "renting_family_house", "owning_condo", "owning_detached_home"),
        "improving my home"),
    "learning_focus_area": (
        ("learning_goal", "study_topic"),
        ("data_analysis_skills", "public_speaking_skills", "foreign_language_study", "creative_writing_practice"),
        "learning something new"),
    "weekly_free_time": (
        ("free_time", "available_hours"),
        ("under_3_hours_weekly", "about_5_hours_weekly", "about_10_hours_weekly", "over_15_hours_weekly"),
        "using my spare time"),
    "stress_level": (
        ("stress", "workload_pressure"),
        ("calm_low_stress", "manageable_moderate_stress", "high_deadline_stress", "burnout_risk_stress"),
        "handling pressure"),
    "social_circle_size": (
        ("social_life",),
        ("few_close_friends", "medium_friend_group", "large_social_network", "newly_relocated_no_friends"),
        "keeping up my social life"),
    "pet_ownership": (
        ("pets",),
        ("no_pets", "one_indoor_cat", "energetic_young_dog", "multiple_rescue_animals"),
        "caring for animals at home"),
    "savings_goal": (
        ("financial_goal", "savings_target"),
        ("building_emergency_fund", "saving_for_home_deposit", "paying_off_student_loans",
         "investing_for_retirement"),
        "managing my savings"),
    "travel_frequency": (
        ("travel_habits",),
        ("rarely_travels", "quarterly_weekend_trips", "monthly_business_travel", "long_annual_vacation"),
        "planning trips"),
    "cooking_skill_level": (
        ("cooking_skills", "kitchen_experience"),
        ("beginner_cook", "confident_home_cook", "advanced_meal_prepper", "professional_level_cook"),
        "cooking for myself"),
    "volunteering_commitment": (
        ("volunteer_involvement",),
        ("no_volunteering", "occasional_charity_events", "weekly_shelter_shifts", "community_board_member"),
        "giving back to my community"),
    "health_condition_focus": (
        ("health_status", "wellness_concern"),
        ("generally_healthy", "managing_back_pain", "recovering_from_surgery", "managing_seasonal_allergies"),
        "looking after my health"),
    "hobby_focus": (
        ("main_hobby",),
        ("gardening_hobby", "photography_hobby", "board_game_hobby", "woodworking_hobby"),
        "enjoying my hobbies"),
    "reading_preference": (
        ("reading_habits",),
        ("audiobooks_on_commute", "printed_nonfiction", "ebook_fiction_series", "rarely_reads"),
        "finding things to read"),
    "career_goal": (
        ("career_aspiration", "professional_goal"),
        ("seeking_promotion", "switching_industries", "starting_own_business", "maintaining_current_role"),
        "my next professional step"),
    "childcare_arrangement": (
        ("childcare",),
        ("no_childcare_needed", "daycare_weekdays", "grandparents_help", "nanny_part_time"),
        "balancing family logistics"),
    "tech_comfort_level": (
        ("technology_skills",),
        ("tech_novice", "everyday_tech_user", "power_user_automation", "software_developer_level"),
        "choosing new gadgets and apps"),
    "caregiving_responsibility": (
        ("caregiving_duties",),
        ("no_caregiving", "caring_for_aging_parent", "supporting_sibling", "caring_for_partner"),
        "supporting my loved ones"),
    "language_learning_stage": (
        ("language_level",),
        ("absolute_beginner_language", "basic_conversation_language", "intermediate_reading_language",
         "fluent_professional_language"),
        "practicing a second language"),
    "event_hosting_frequency": (
        ("hosting_habits", "gathering_frequency"),
        ("never_hosts", "hosts_monthly_dinners", "hosts_weekly_game_nights", "organizes_large_parties"),
        "hosting friends"),
    "mentoring_delivery_format": (
        ("mentoring_style",),
        ("one_on_one_sessions", "small_group_circles", "workshop_series", "online_async_feedback"),
        "mentoring others"),
    "garden_space": (
        ("gardening_space",),
        ("balcony_containers", "small_backyard_plot", "community_garden_share", "large_rural_garden"),
        "growing plants"),
    "music_practice_level": (
        ("instrument_practice",),
        ("not_playing_instrument", "casual_guitar_strumming", "weekly_piano_lessons", "performing_band_member"),
        "making music"),
}

ALIAS_TO_CANONICAL = {alias: name for name, (aliases, _, _) in VOCABULARY.items() for alias in aliases}

QUESTION_FORMS = (
    "What's a good way to approach {a} while also thinking about {b}?",
    "Can you suggest a plan for {a} that also works for {b}?",
    "How should I balance {a} with {b} over the next few weeks?",
    "Any practical tips for {a}, considering {b}?",
)

REQUESTS = (
    "Could you suggest a weekly plan that fits this?",
    "What should I prioritize over the next few weeks?",
    "Can you help me think through my options?",
    "Any practical tips to make this work smoothly?",
    "How would you adjust my routine around this?",
    "What are some easy first steps I could take?",
)

ADVICE = (
    "start with one small weekly habit and review how it feels after a month.",
    "keep a short checklist and adjust it every Sunday evening.",
    "pick two priorities and protect time for them in your calendar.",
    "lean on people around you and share the load where you can.",
    "set a realistic target and track progress in a simple notebook.",
)

FOLLOWUPS = (
    "That's helpful! Could you also tell me about ways to stay consistent?",
    "Thanks for that information. I'm also curious about common mistakes to avoid.",
    "That makes sense. What about keeping this sustainable in the long run?",
    "Good to know. Is there anything else I should consider before starting?",
    "Interesting. How would you break that into smaller steps?",
    "Thanks! Could you give me an example of how a typical week might look?",
)

REPLIES = (
    "Thanks for sharing that. A good approach is to start small, set a clear weekly goal, and review what worked.",
    "Great question. I would focus on one priority first, then build a simple routine around it.",
    "Here is an idea: block a fixed time slot, keep notes on progress, and adjust after two weeks.",
    "That sounds manageable. Try splitting it into short sessions and check in with yourself regularly.",
    "I'd suggest a flexible plan with a couple of anchors you can rely on, plus room to adapt.",
)


def human(s: str) -> str:
    return s.replace("_", " ")


def normalize(text: str) -> str:
    return text.lower().replace("_", " ")


@functools.lru_cache(maxsize=4096)
def _phrase_pattern(phrase: str) -> re.Pattern:
    return re.compile(r"(?<![a-z0-9])" + re.escape(phrase) + r"(?![a-z0-9])")


def last_mention(text: str, phrase: str) -> int:
    """Start offset of the last whole-phrase occurrence of ``phrase``, or -1."""
    pos = -1
    for m in _phrase_pattern(phrase).finditer(text):
        pos = m.start()
    return pos


def exposure_clause(assignment: dict) -> str:
    return "; ".join(f"my {human(v)} is now {human(val)}" for v, val in assignment.items())


_EXPOSURE = re.compile(r"my ([a-z0-9 ]+?) is now ([a-z0-9 ]+?)(?=[;.,!?\n]|$)")
_ANSWER_PAIR = re.compile(r"your ([a-z0-9 ]+?) \(([a-z0-9 ]+?)\)")


def parse_exposures(text: str) -> list[tuple[str, str]]:
    return _EXPOSURE.findall(normalize(text))


def choices_for(canonical: str, n: int) -> list[str]:
    base = list(VOCABULARY[canonical][1]) if canonical in VOCABULARY else []
    while len(base) < n:
        base.append(f"{canonical}_option_{len(base) + 1}")
    return base[:n]


# --------------------------------------------------------------------------
# generator programs


def _persona(req: ChatRequest, rng: random.Random) -> str:
    record = req.context["record"]
    basic = record.get("basic", {})
    name = basic.get("name") or record.get("name") or "Alex Doe"
    details = record.get("complementary", "").strip()
    facts = ", ".join(f"{k.replace('_', ' ')} {v}" for k, v in basic.items() if k != "name")
    profile = f"{name} ({facts})." if facts else f"{name}."
    if details:
        profile += " " + details
    return json.dumps({"name": name, "profile": profile})


def _questions(req: ChatRequest, rng: random.Random) -> str:
    ctx = req.context
    k, n = ctx["states_per_question"], ctx["num_choices"]
    concepts = sorted(VOCABULARY)
    out = []
    for _ in range(ctx["num_questions"]):
        picked = rng.sample(concepts, k)
        required = []
        for canonical in picked:
            aliases = VOCABULARY[canonical][0]
            alias = rng.choice(aliases)
            choices = choices_for(canonical, n + 1)
            # secondary aliases propose a shifted choice set so the fix step has work to do
            info_choices = choices[:n] if alias == aliases[0] else choices[1:n + 1]
            required.append({"info_type": alias, "info_choices": info_choices})
        topics = [VOCABULARY[c][2] for c in picked]
        text = rng.choice(QUESTION_FORMS).format(a=topics[0], b=" and ".join(topics[1:]))
        out.append({"question": text, "required_info": required})
    return json.dumps({"questions": out})


def _refine_schema(req: ChatRequest, rng: random.Random) -> str:
    groups: dict[str, list[str]] = {}
    for info_type in req.context["info_types"]:
        groups.setdefault(ALIAS_TO_CANONICAL.get(info_type, info_type), []).append(info_type)
    return json.dumps(groups)


def _fix_schema(req: ChatRequest, rng: random.Random) -> str:
    n = req.context["num_choices"]
    out = {}
    for canonical, members in req.context["groups"].items():
        if canonical in VOCABULARY:
            out[canonical] = choices_for(canonical, n)
        else:
            out[canonical] = list(members[0]["info_choices"])[:n]
    return json.dumps(out)


def _initial_state(req: ChatRequest, rng: random.Random) -> str:
    state = {}
    for var, choices in req.context["schema"].items():
        inner = choices[1:-1] if len(choices) >= 3 else choices
        state[var] = rng.choice(inner)
    return json.dumps(state)


def _state_updates(req: ChatRequest, rng: random.Random) -> str:
    ctx = req.context
    counts, cap = ctx["update_counts"], ctx["max_changes"]
    eligible = [v for v in ctx["schema"] if counts.get(v, 0) < cap]
    if not eligible:
        eligible = sorted(ctx["schema"], key=lambda v: counts.get(v, 0))[:1]
    eligible.sort(key=lambda v: (counts.get(v, 0), rng.random()))
    picked = eligible[:ctx["num_changes"]]
    updated = {}
    for var in picked:
        options = [c for c in ctx["schema"][var] if c != ctx["state"][var]]
        updated[var] = rng.choice(options)
    summary = "A period of gradual change touching " + ", ".join(human(v) for v in updated) + "."
    return json.dumps({"period_summary": summary, "updated": updated})


def _elaborate(req: ChatRequest, rng: random.Random) -> str:
    names = list(req.context["changes"])
    events = []
    i = 0
    while i < len(names):
        size = 2 if len(names) - i >= 2 and rng.random() < 0.4 else 1
        group = names[i:i + size]
        i += size
        detail = "; ".join(f"{human(v)} moved to {human(req.context['changes'][v]['to'])}" for v in group)
        events.append({"states": group, "event": f"Something shifted this month: {detail}."})
    return json.dumps({"events": events})


def _initial_queries(req: ChatRequest, rng: random.Random) -> str:
    items = list(req.context["state"].items())
    queries = []
    i = 0
    while i < len(items):
        size = min(len(items) - i, rng.choice((1, 2, 2, 3)))
        group = dict(items[i:i + size])
        i += size
        if rng.random() < 0.15:
            # deliberately vague first draft; the verifier loop refines it
            clause = f"things around my {human(next(iter(group)))} have been shifting lately"
        else:
            clause = exposure_clause(group)
        queries.append({"exposed_states": group, "query": f"For context, {clause}. {rng.choice(REQUESTS)}"})
    return json.dumps({"queries": queries})


def _update_queries(req: ChatRequest, rng: random.Random) -> str:
    queries = []
    for event in req.context["events"]:
        target = {v: t["to"] for v, t in event["state_transition"].items()}
        queries.append(f"Quick update: {exposure_clause(target)}. {rng.choice(REQUESTS)}")
    return json.dumps({"queries": queries})


def _check_query(req: ChatRequest, rng: random.Random) -> str:
    text = normalize(req.context["query"])
    predicted = {}
    for var, choices in req.context["choices"].items():
        best, best_pos = "unknown", -1
        for c in choices:
            pos = last_mention(text, human(c))
            if pos > best_pos:
                best, best_pos = c, pos
        predicted[var] = best
    return json.dumps(predicted)


def _refine_query(req: ChatRequest, rng: random.Random) -> str:
    return json.dumps({"query": f"To be clear, {exposure_clause(req.context['exposed'])}. {rng.choice(REQUESTS)}"})


def _answer_text(assignment: dict, rng: random.Random, vague: bool = False) -> str:
    items = list(assignment.items())
    if vague and len(items) > 1:
        items = items[:-1]
    lead = " and ".join(f"your {human(v)} ({human(val)})" for v, val in items)
    return f"Given {lead}, {rng.choice(ADVICE)}"


def _answers(req: ChatRequest, rng: random.Random) -> str:
    out = {}
    for i, assignment in enumerate(req.context["variants"], start=1):
        out[f"variant_{i}"] = _answer_text(assignment, rng, vague=rng.random() < 0.1)
    return json.dumps(out)


def _check_answer(req: ChatRequest, rng: random.Random) -> str:
    mentioned = dict(_ANSWER_PAIR.findall(normalize(req.context["answer"])))
    for i, assignment in enumerate(req.context["choices"], start=1):
        if all(mentioned.get(human(v)) == human(val) for v, val in assignment.items() if human(v) in mentioned):
            return str(i)
    return "1"


def _refine_answer(req: ChatRequest, rng: random.Random) -> str:
    return json.dumps({"answer": _answer_text(req.context["target"], rng)})


# --------------------------------------------------------------------------
# user simulator and assistant programs


def _followup(req: ChatRequest, rng: random.Random) -> str:
    return rng.choice(FOLLOWUPS)


def _respond(req: ChatRequest, rng: random.Random) -> str:
    return rng.choice(REPLIES)


def _history(req: ChatRequest) -> str:
    return normalize("\n".join(m.content for m in req.messages[:-1]))


_OPTION = re.compile(r"^(\d+)\. (.*)$", re.MULTILINE)


def _evaluate(req: ChatRequest, rng: random.Random) -> str:
    final = req.prompt
    history = _history(req)
    options = [text for _, text in _OPTION.findall(final.split("following options:", 1)[-1])]
    pairs = [_ANSWER_PAIR.findall(normalize(o)) for o in options]
    beliefs: dict[str, str] = {}
    if "state information are as follows:" in final:
        block = final.split("state information are as follows:", 1)[1].split("Please select", 1)[0]
        try:
            beliefs = {human(k): normalize(str(v)) for k, v in extract_json(block).items()}
        except Exception:
            beliefs = {}
    candidates: dict[str, list[str]] = {}
    for option_pairs in pairs:
        for var, val in option_pairs:
            candidates.setdefault(var, [])
            if val not in candidates[var]:
                candidates[var].append(val)
    for var, values in candidates.items():
        if var in beliefs:
            continue
        positions = {v: last_mention(history, v) for v in values}
        best = max(values, key=lambda v: positions[v])
        if positions[best] >= 0:
            beliefs[var] = best
    scores = [sum(beliefs.get(var) == val for var, val in p) for p in pairs]
    choice = scores.index(max(scores)) + 1 if scores else 1
    return f'```json\n{{"answer": {choice}}}\n```'


def _probe(req: ChatRequest, rng: random.Random) -> str:
    schema = extract_json(req.prompt)
    history = _history(req)
    out = {}
    for var, choices in schema.items():
        positions = {c: last_mention(history, human(c)) for c in choices}
        best = max(choices, key=lambda c: positions[c])
        out[var] = best if positions[best] >= 0 else choices[0]
    return "```json\n" + json.dumps(out, indent=4) + "\n```"


def _conversation_section(prompt: str) -> str:
    return prompt.rsplit("Conversation:", 1)[-1]


def _user_lines(section: str) -> str:
    return "\n".join(line for line in section.splitlines() if line.lower().startswith("user:"))


def _extract_facts(req: ChatRequest, rng: random.Random) -> str:
    facts = [f"User's {var} is {val}" for var, val in parse_exposures(_user_lines(_conversation_section(req.prompt)))]
    return json.dumps({"facts": facts})


def _awi_update(req: ChatRequest, rng: random.Random) -> str:
    update = {}
    for var, val in parse_exposures(_user_lines(_conversation_section(req.prompt))):
        update[var.replace(" ", "_")] = f"{var} is {val}"
    return json.dumps(update)


def _evolve(req: ChatRequest, rng: random.Random) -> str:
    current = req.context["current"].rstrip()
    feedback = req.context["feedback"]
    focus = [human(v) for v in list(feedback.get("user_information_updates", {}))[:3]]
    if not focus:
        focus = ["topics raised in the evaluation questions"]
    detail = f"record the latest value for {', '.join(focus)}, replacing older values."
    if detail in current:
        return json.dumps({"new_types": current, "changes": []})
    n = sum(1 for line in current.splitlines() if re.match(r"^\d+\.", line)) + 1
    line = f"{n}. Track Evolving Situational Details: {detail}"
    return json.dumps({"new_types": current + "\n" + line, "changes": [f"added rule {n} covering {', '.join(focus)}"]})


_CLAIM = re.compile(r"^(\d+)\. ([^:\n]+): (.+)$", re.MULTILINE)


def substring_checker(req: ChatRequest, rng: random.Random) -> str:
    """Answers "yes" for a claim iff its value text appears in the document."""
    prompt = req.prompt
    document = prompt.split("User's Conversational History Summary:", 1)[-1].split("Claims about user:", 1)[0]
    claims = prompt.split("Claims about user:", 1)[-1]
    doc = normalize(document)
    verdicts = {}
    for num, _var, value in _CLAIM.findall(claims):
        verdicts[num] = "yes" if last_mention(doc, normalize(value.strip())) >= 0 else "no"
    return json.dumps(verdicts)


def world_rules() -> list[tuple]:
    return [
        ("gen.persona", _persona),
        ("gen.questions", _questions),
        ("gen.refine_schema", _refine_schema),
        ("gen.fix_schema", _fix_schema),
        ("gen.initial_state", _initial_state),
        ("gen.state_updates", _state_updates),
        ("gen.elaborate", _elaborate),
        ("gen.initial_queries", _initial_queries),
        ("gen.update_queries", _update_queries),
        ("gen.check_query", _check_query),
        ("gen.refine_query", _refine_query),
        ("gen.answers", _answers),
        ("gen.check_answer", _check_answer),
        ("gen.refine_answer", _refine_answer),
        ("user.followup", _followup),
        ("agent.respond", _respond),
        ("agent.evaluate", _evaluate),
        ("agent.evaluate_ub", _evaluate),
        ("agent.probe", _probe),
        ("agent.extract", _extract_facts),
        ("agent.awi_update", _awi_update),
        ("evolve.step", _evolve),
        ("recall.check", substring_checker),
    ]


def scripted_world(seed: int = 0) -> ScriptedBackend:
    return ScriptedBackend(world_rules(), rng_seed=seed, descriptor=f"scripted-world@{seed}")


def scripted_embedding(seed: int = 0, dimension: int = 64) -> ScriptedEmbedding:
    return ScriptedEmbedding(dimension=dimension, seed=seed)
