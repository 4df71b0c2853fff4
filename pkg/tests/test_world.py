import json

from memgym.backend.base import ChatRequest
from memgym.backend.world import (
    ALIAS_TO_CANONICAL,
    VOCABULARY,
    choices_for,
    exposure_clause,
    human,
    last_mention,
    parse_exposures,
    scripted_world,
    substring_checker,
)
from memgym.model import Message


def test_exposure_round_trip():
    clause = exposure_clause({"pet_ownership": "energetic_young_dog", "city": "lima"})
    assert clause == "my pet ownership is now energetic young dog; my city is now lima"
    assert parse_exposures("Hi! " + clause + ". Thoughts?") == [("pet ownership", "energetic young dog"),
                                                                ("city", "lima")]


def test_last_mention_respects_word_boundaries():
    text = "i moved from lima to limassol and back to lima"
    assert last_mention(text, "lima") == text.rindex("lima")
    assert last_mention("limassol", "lima") == -1


def test_choices_padded_to_requested_size():
    assert len(choices_for("unknown_thing", 3)) == 3
    canonical = next(iter(VOCABULARY))
    assert choices_for(canonical, 2) == list(VOCABULARY[canonical][1][:2])


def test_aliases_point_to_vocabulary():
    assert set(ALIAS_TO_CANONICAL.values()) <= set(VOCABULARY)


def test_evaluator_prefers_latest_mention():
    world = scripted_world(0)
    final = ("Please select the most suitable answer for my current situation from the following options:\n"
             "1. Given your city (paris), walk.\n2. Given your city (lima), take the bus.")
    req = ChatRequest((Message("user", "my city is now paris"), Message("assistant", "ok"),
                       Message("user", "my city is now lima"), Message("assistant", "ok"),
                       Message("user", final)), tag="agent.evaluate")
    assert json.loads(world.complete(req).strip("`json\n"))["answer"] == 2


def test_followups_never_contain_schema_values():
    values = {human(c) for entry in VOCABULARY.values() for c in entry[1]}
    world = scripted_world(3)
    for i in range(50):
        text = world.complete(ChatRequest.user(f"follow up {i}", tag="user.followup")).lower()
        assert " is now " not in text
        assert not [v for v in values if last_mention(text, v) >= 0]


def test_substring_checker_verdicts():
    prompt = ("User's Conversational History Summary:\ncity is lima\nClaims about user:\n"
              "1. city: lima\n2. diet: keto")
    reply = json.loads(substring_checker(ChatRequest.user(prompt, tag="recall.check"), None))
    assert reply == {"1": "yes", "2": "no"}
