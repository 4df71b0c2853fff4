import pytest

from memgym.arena import (
    OracleAssistant,
    RandomAssistant,
    SessionScript,
    SimulatedUser,
    evaluation_battery,
    run_episode,
    run_session,
)
from memgym.backend import scripted_embedding, scripted_world
from memgym.backend.scripted import ScriptedBackend
from memgym.errors import CompatibilityError, SessionError, ValidationError
from memgym.memory import AgentConfig, MemoryAgent
from memgym.model import ExposureUtterance, dumps, state_at

from helpers import make_blueprint


def agent(kind="awe", seed=0, **kw):
    return MemoryAgent(AgentConfig.default(kind, **kw), scripted_world(seed), embed=scripted_embedding(seed),
                       seed=seed)


def user(bp, seed=0):
    return SimulatedUser(bp, scripted_world(seed))


OPENER = ExposureUtterance("my diet is now keto, any tips?", {"diet": "keto"})


def test_single_round_session():
    bp = make_blueprint()
    messages = run_session(SessionScript(1, OPENER, 1), user(bp), agent())
    assert [m.role for m in messages] == ["user", "assistant"]
    assert messages[0].content == OPENER.query


def test_four_round_session_alternates():
    bp = make_blueprint()
    messages = run_session(SessionScript(1, OPENER, 4), user(bp), agent())
    assert len(messages) == 8
    assert [m.role for m in messages] == ["user", "assistant"] * 4
    assert messages[0].content == OPENER.query


def test_session_needs_a_round():
    with pytest.raises(ValidationError):
        SessionScript(0, OPENER, 0)


def test_session_error_carries_partial_transcript():
    class Broken:
        calls = 0

        def respond(self, msg):
            self.calls += 1
            if self.calls == 2:
                raise RuntimeError("down")
            return "fine"

    with pytest.raises(SessionError) as err:
        run_session(SessionScript(0, OPENER, 3), user(make_blueprint()), Broken())
    assert [m.role for m in err.value.partial] == ["user", "assistant", "user"]


def test_episode_shape_and_opener_fidelity(blueprint):
    trace = run_episode(blueprint, agent(), user(blueprint))
    assert len(trace.periods) == blueprint.n_positions
    for t, period in enumerate(trace.periods):
        expected = blueprint.initial_queries if t == 0 else blueprint.periods[t - 1].update_queries
        assert [s[0].content for s in period.sessions] == [q.query for q in expected]
        assert all(len(s) == 2 * blueprint.config.turns_per_exposure for s in period.sessions)
        assert len(period.evaluations) == len(blueprint.questions)
        assert set(period.probe) == set(blueprint.schema.names)


def test_episode_reruns_identical(blueprint):
    a = run_episode(blueprint, agent(seed=3), user(blueprint, 3), seed=3)
    b = run_episode(blueprint, agent(seed=3), user(blueprint, 3), seed=3)
    assert dumps(a) == dumps(b)


def test_oracle_scores_perfectly(blueprint):
    trace = run_episode(blueprint, OracleAssistant(blueprint), user(blueprint))
    for period in trace.periods:
        assert all(e.correct and e.ub_correct for e in period.evaluations)
        assert period.probe == state_at(blueprint, period.position)


def test_truth_index_matches_state(blueprint):
    trace = run_episode(blueprint, RandomAssistant(blueprint, 1), user(blueprint))
    by_id = {q.id: q for q in blueprint.questions}
    for period in trace.periods:
        state = state_at(blueprint, period.position)
        for e in period.evaluations:
            key = e.options[e.truth]
            q = by_id[e.question_id]
            assert all(f"{v}={state[v]}" in key for v in q.required)
            assert e.ub_correct


def test_prose_answers_become_abstentions():
    bp = make_blueprint()
    chat = ScriptedBackend([("agent.evaluate*", lambda r, g: "I would pick the second one."),
                            ("agent.probe", lambda r, g: "no idea")] + scripted_world(0).rules)
    a = MemoryAgent(AgentConfig.default("llm"), chat)
    trace = run_episode(bp, a, user(bp))
    evals = [e for p in trace.periods for e in p.evaluations]
    assert evals and all(e.chosen is None and not e.correct for e in evals)
    assert all(v is None for p in trace.periods for v in p.probe.values())


def test_evaluation_battery_read_only(blueprint):
    a = agent("rag", ns=1)
    run_episode(blueprint, a, user(blueprint))
    digest = a.store_digest()
    evaluation_battery(blueprint, 2, a)
    assert a.store_digest() == digest


def test_offpolicy_replays_sessions_and_stores_match(blueprint):
    source = run_episode(blueprint, agent(seed=1), user(blueprint))
    y, z = agent(seed=2), agent(seed=2)
    z.chat = ScriptedBackend(list(scripted_world(2).rules), rng_seed=99)
    ty = run_episode(blueprint, y, mode="offpolicy", replay=source, replay_source="x/trace.json")
    tz = run_episode(blueprint, z, mode="offpolicy", replay=source, replay_source="x/trace.json")
    assert y.store_digest() == z.store_digest()
    assert [p.sessions for p in ty.periods] == [p.sessions for p in source.periods]
    assert ty.mode == "offpolicy" and ty.replay_source == "x/trace.json"
    assert y.chat.count("agent.respond") == 0
    assert tz.periods[0].sessions == source.periods[0].sessions


def test_offpolicy_rejects_foreign_trace(blueprint):
    other = make_blueprint()
    source = run_episode(other, OracleAssistant(other), user(other))
    with pytest.raises(CompatibilityError):
        run_episode(blueprint, agent(), mode="offpolicy", replay=source)


def test_mode_validation(blueprint):
    with pytest.raises(ValidationError):
        run_episode(blueprint, agent(), mode="sideways")
    with pytest.raises(ValidationError):
        run_episode(blueprint, agent(), mode="onpolicy")


def test_scripted_followups_never_leak_values(blueprints20):
    for bp in blueprints20[0][:5]:
        sim = user(bp)
        run_episode(bp, OracleAssistant(bp), sim)
        assert sim.leaks == 0
