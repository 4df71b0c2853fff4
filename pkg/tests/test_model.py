import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import make_blueprint
from memgym.errors import IntegrityError, RangeError, ValidationError
from memgym.model import (
    Blueprint,
    EpisodeTrace,
    EvaluationQuestion,
    GenConfig,
    Message,
    StateSchema,
    StateVariable,
    add_months,
    blueprint_id,
    dumps,
    ground_truth_variant,
    loads,
    parse_variant_key,
    state_at,
    validate_blueprint,
    variant_key,
    variant_space,
    write_position,
)


def test_presets():
    base = GenConfig.preset("base")
    assert (base.n_periods, base.states_per_question, base.turns_per_exposure) == (10, 2, 4)
    extra = GenConfig.preset("extra")
    assert (extra.n_periods, extra.states_per_question, extra.turns_per_exposure) == (20, 3, 10)
    assert GenConfig.preset("base", num_choices_per_state=4).num_choices_per_state == 4
    with pytest.raises(ValidationError):
        GenConfig.preset("huge")


def test_changes_per_period_default():
    cfg = GenConfig.preset("base")
    assert cfg.changes_per_period(17) == 3  # ceil(17/10) + 1
    assert cfg.changes_per_period(10) == 2
    assert GenConfig(num_changes_per_period=5).changes_per_period(17) == 5


def test_config_rejects_nonpositive():
    with pytest.raises(ValidationError):
        GenConfig(n_periods=0)


def test_schema_rejects_duplicates_and_short_choice_lists():
    with pytest.raises(ValidationError):
        StateVariable("a", ("x",))
    with pytest.raises(ValidationError):
        StateVariable("a", ("x", "x"))
    with pytest.raises(ValidationError):
        StateSchema((StateVariable("a", ("x", "y")), StateVariable("a", ("x", "y"))))
    with pytest.raises(ValidationError):
        StateSchema((StateVariable("a", ("x", "y")),), {"alias": "missing"})


def test_blueprint_round_trip_is_byte_stable():
    bp = make_blueprint()
    text = dumps(bp)
    again = loads(text, Blueprint)
    assert again == bp
    assert dumps(again) == text
    assert json.loads(text)["amemgym_version"] == "1"


def test_version_mismatch_rejected():
    data = make_blueprint().to_dict()
    data["amemgym_version"] = "0"
    with pytest.raises(ValidationError):
        Blueprint.from_dict(data)


def test_state_at_overlays_updates():
    bp = make_blueprint()
    assert state_at(bp, 0) == {"diet": "vegan", "city": "paris", "pet": "cat"}
    assert state_at(bp, 1)["city"] == "tokyo"
    assert state_at(bp, 3) == {"diet": "keto", "city": "lima", "pet": "dog"}
    with pytest.raises(RangeError):
        state_at(bp, 4)
    with pytest.raises(RangeError):
        state_at(bp, -1)


def test_variant_keys_follow_schema_order():
    bp = make_blueprint()
    assert variant_key({"city": "lima", "diet": "keto"}, bp.schema) == "diet=keto|city=lima"
    assert parse_variant_key("diet=keto|city=lima") == {"diet": "keto", "city": "lima"}


def test_ground_truth_variant_requires_coverage():
    q = make_blueprint().questions[0]
    assert ground_truth_variant(q, {"diet": "vegan", "city": "paris", "pet": "cat"}) == "diet=vegan|city=paris"
    with pytest.raises(IntegrityError):
        ground_truth_variant(q, {"diet": "vegan"})


@given(st.lists(st.integers(min_value=2, max_value=4), min_size=1, max_size=3))
def test_variant_space_is_full_product(sizes):
    schema = StateSchema(tuple(StateVariable(f"v{i}", tuple(f"c{j}" for j in range(n))) for i, n in enumerate(sizes)))
    space = variant_space(schema, [f"v{i}" for i in range(len(sizes))])
    expected = 1
    for n in sizes:
        expected *= n
    assert len(space) == expected
    assert len({variant_key(a, schema) for a in space}) == expected


def test_write_position_examples():
    bp = make_blueprint(updates=[{"pet": "dog"}, {"city": "tokyo"}, {"pet": "cat"}, {"diet": "keto"},
                                 {"city": "lima"}, {"pet": "dog"}, {"diet": "omnivore"}])
    assert write_position(bp, "diet", 0) == 0
    assert write_position(bp, "city", 7) == 5       # updated at 2 and 5
    assert write_position(bp, "city", 3) == 2
    assert write_position(bp, "city", 1) == 0       # first update comes later


@given(st.integers(min_value=0, max_value=3), st.sampled_from(["diet", "city", "pet"]))
def test_write_position_bounded(t, var):
    bp = make_blueprint()
    w = write_position(bp, var, t)
    assert 0 <= w <= t
    assert state_at(bp, w)[var] == state_at(bp, t)[var]


def test_validate_detects_problems():
    bp = make_blueprint()
    assert validate_blueprint(bp) == []
    data = bp.to_dict()
    data["periods"][0]["updates"] = {"city": "paris"}
    data["periods"][0]["events"] = [{"states": ["city"], "event": "x"}]
    data["periods"][0]["update_queries"] = [{"query": "q", "exposed": {"city": "paris"}}]
    broken = Blueprint.from_dict(data)
    assert any("no-op update" in v for v in validate_blueprint(broken))

    data = bp.to_dict()
    data["initial_queries"] = data["initial_queries"][1:]
    assert any("exposure coverage" in v for v in validate_blueprint(Blueprint.from_dict(data)))

    data = bp.to_dict()
    key = next(iter(data["questions"][0]["variants"]))
    del data["questions"][0]["variants"][key]
    assert any("missing variant" in v for v in validate_blueprint(Blueprint.from_dict(data)))


def test_blueprint_id_depends_on_content():
    a = make_blueprint()
    b = make_blueprint(seed=1)
    assert blueprint_id(a) == blueprint_id(make_blueprint())
    assert blueprint_id(a) != blueprint_id(b)
    assert blueprint_id(a).startswith("tiny-")


def test_add_months_clamps_day():
    assert add_months("2025-01-31", 1) == "2025-02-28"
    assert add_months("2024-01-31", 1) == "2024-02-29"
    assert add_months("2025-11-15", 3) == "2026-02-15"


def test_message_validation():
    with pytest.raises(ValidationError):
        Message("robot", "hi")
    with pytest.raises(ValidationError):
        Message("user", "")


def test_trace_mode_validated():
    with pytest.raises(ValidationError):
        EpisodeTrace("ref", "agent", "sideways", 0, ())


def test_question_options_at():
    q = EvaluationQuestion(0, "q", ("a",), {"a=x": "X", "a=y": "Y"}, (("a=x", "a=y"), ("a=y", "a=x")))
    assert q.options_at(1) == ("a=y", "a=x")
