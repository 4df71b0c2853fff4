import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memgym.backend import scripted_embedding, scripted_world
from memgym.backend.scripted import ScriptedBackend
from memgym.errors import ValidationError
from memgym.memory import (
    AgentConfig,
    MemoryAgent,
    VectorIndex,
    estimate_tokens,
    format_options,
    parse_answer,
    retrieve_topk,
)
from memgym.model import StateSchema, StateVariable

AWI_EXAMPLES = {
    "Hi.": {},
    "Hi, my name is John. I am a software engineer.": {"basic_profile": "Name is John, a software engineer"},
}


def awi_backend():
    """Returns the fixed update for whichever example appears in the prompt."""
    def update(req, rng):
        for text, result in AWI_EXAMPLES.items():
            if f"user: {text}\n" in req.prompt:
                return json.dumps(result)
        return "{}"

    return ScriptedBackend([("agent.awi_update", update), ("agent.respond", lambda r, g: "ok")])


def awi_agent(**kw):
    return MemoryAgent(AgentConfig.default("awi", freq=1, ns=0, **kw), awi_backend())


# -------------------------------------------------------------- config


def test_defaults_and_labels():
    assert AgentConfig.default("awe").label == "awe-(2,4,30)"
    assert (AgentConfig.default("rag").freq, AgentConfig.default("rag").topk) == (1, 30)
    assert AgentConfig.default("awi").topk == 0
    assert AgentConfig.default("llm").label == "llm"
    with pytest.raises(ValidationError):
        AgentConfig("awe", freq=0)
    with pytest.raises(ValidationError):
        AgentConfig.default("mystery")


def test_retrieval_kinds_need_embeddings():
    with pytest.raises(ValidationError):
        MemoryAgent(AgentConfig.default("rag"), scripted_world(0))


# -------------------------------------------------------------- awi write path


def test_awi_hi_leaves_store_empty():
    agent = awi_agent()
    agent.respond("Hi.")
    assert agent.facts == {}
    assert agent.update_cycles == 1


def test_awi_john_example():
    agent = awi_agent()
    agent.respond("Hi, my name is John. I am a software engineer.")
    assert agent.facts == {"basic_profile": "Name is John, a software engineer"}


def test_awi_overwrite_and_empty_merge():
    agent = awi_agent()
    agent.merge({"food": "Favourite food is pizza"})
    agent.merge({"food": "Favourite food is sushi"})
    assert agent.facts == {"food": "Favourite food is sushi"}
    before = dict(agent.facts)
    agent.merge({})
    agent.merge({"food": "  "})
    assert agent.facts == before


def test_awi_never_embeds():
    emb = scripted_embedding(0)
    agent = MemoryAgent(AgentConfig.default("awi"), scripted_world(0), embed=emb)
    for i in range(8):
        agent.respond(f"my city is now lima {i}")
    agent.evaluate("q?", ["a", "b"])
    assert emb.calls == 0


def test_llm_never_embeds_or_retrieves():
    emb = scripted_embedding(0)
    chat = scripted_world(0)
    agent = MemoryAgent(AgentConfig.default("llm"), chat, embed=emb)
    for i in range(5):
        agent.respond(f"message {i}")
    assert emb.calls == 0
    assert chat.count("agent.extract") == chat.count("agent.awi_update") == 0
    assert len(agent._context("x", "x")) == 1 + 2 * 5 + 1


# -------------------------------------------------------------- update cycles


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=25), st.integers(min_value=1, max_value=6),
       st.sampled_from(["llm", "rag", "awe", "awi"]))
def test_update_cycles_are_floor_rounds_over_freq(rounds, freq, kind):
    agent = MemoryAgent(AgentConfig.default(kind, freq=freq), scripted_world(0), embed=scripted_embedding(0))
    for i in range(rounds):
        agent.respond(f"round {i}")
    assert agent.update_cycles == rounds // freq


def test_awe_one_extraction_per_cycle_and_flush():
    chat = scripted_world(0)
    agent = MemoryAgent(AgentConfig.default("awe", ns=0), chat, embed=scripted_embedding(0))
    agent.respond("my diet is now vegan")
    assert chat.count("agent.extract") == 0
    agent.respond("hello again")
    assert chat.count("agent.extract") == 1
    assert agent.buffer == []
    assert agent.index.texts() == ["User's diet is vegan"]


def test_awe_duplicate_facts_are_suppressed():
    agent = MemoryAgent(AgentConfig.default("awe", ns=0), scripted_world(0), embed=scripted_embedding(0))
    for _ in range(4):
        agent.respond("my diet is now vegan")
    assert agent.index.texts() == ["User's diet is vegan"]


def test_rag_flush_conservation():
    agent = MemoryAgent(AgentConfig.default("rag", ns=3), scripted_world(0), embed=scripted_embedding(0))
    sent = [f"message number {i}" for i in range(11)]
    for text in sent:
        agent.respond(text)
    indexed = [t.split("\n")[0][len("User: "):] for t in agent.index.texts()]
    in_context = [u for u, _ in agent.buffer]
    assert indexed + in_context == sent
    assert in_context == sent[-3:]
    assert not set(indexed) & set(in_context)


def test_failed_write_keeps_rounds():
    def bad(req, rng):
        return "not json at all"

    chat = ScriptedBackend([("agent.extract", bad), ("agent.respond", lambda r, g: "ok")])
    agent = MemoryAgent(AgentConfig.default("awe", ns=0), chat, embed=scripted_embedding(0))
    agent.respond("a")
    agent.respond("b")
    assert [u for u, _ in agent.buffer] == ["a", "b"]
    assert any(e.startswith("write-failed") for e in agent.drain_events())


def test_buffer_persists_across_sessions_for_ns_context():
    agent = MemoryAgent(AgentConfig.default("awi", freq=100, ns=2), scripted_world(0))
    for i in range(3):
        agent.respond(f"m{i}")
    assert [u for u, _ in agent._short_term()] == ["m1", "m2"]


# -------------------------------------------------------------- retrieval


def test_identical_query_scores_one():
    emb = scripted_embedding(0)
    index = VectorIndex(emb.dimension)
    texts = ["User's diet is vegan", "User's city is lima", "User's pet is dog"]
    for t, v in zip(texts, emb.embed(texts)):
        index.add(t, v)
    hits = retrieve_topk(index, "User's city is lima", 3, emb)
    assert hits[0][0] == "User's city is lima"
    assert abs(hits[0][1] - 1.0) <= 1e-12


def test_k_larger_than_store_and_empty_store():
    emb = scripted_embedding(0)
    index = VectorIndex(emb.dimension)
    assert retrieve_topk(index, "x", 5, emb) == []
    texts = [f"fact {i}" for i in range(7)]
    for t, v in zip(texts, emb.embed(texts)):
        index.add(t, v)
    assert len(retrieve_topk(index, "x", 50, emb)) == 7
    with pytest.raises(ValueError):
        retrieve_topk(index, "x", -1, emb)


def test_equal_vectors_break_ties_by_insertion():
    index = VectorIndex(2)
    index.add("first", [1.0, 0.0])
    index.add("second", [1.0, 0.0])
    index.add("other", [0.0, 1.0])
    assert [t for t, _ in index.search([1.0, 0.0], 2)] == ["first", "second"]


def test_index_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        VectorIndex(3).add("x", [1.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=1, max_size=12),
       st.lists(st.integers(-3, 3), min_size=3, max_size=3), st.integers(0, 12))
def test_retrieval_monotone_in_k(vectors, query, k):
    index = VectorIndex(3)
    for i, v in enumerate(vectors):
        index.add(f"e{i}", v)
    small = index.search(query, k)
    large = index.search(query, k + 1)
    assert large[:len(small)] == small
    assert len(large) - len(small) <= 1
    assert len(small) == min(k, len(vectors))
    assert all(np.isfinite(s) for _, s in large)


# -------------------------------------------------------------- evaluation


SCHEMA = StateSchema((StateVariable("diet", ("vegan", "keto")), StateVariable("city", ("paris", "lima"))))


@pytest.mark.parametrize("kind", ["llm", "rag", "awe", "awi"])
def test_evaluation_is_read_only(kind):
    agent = MemoryAgent(AgentConfig.default(kind, ns=1), scripted_world(0), embed=scripted_embedding(0))
    for text in ["my diet is now keto", "hello", "my city is now lima", "thanks", "bye"]:
        agent.respond(text)
    digest, buffer, cycles = agent.store_digest(), list(agent.buffer), agent.update_cycles
    agent.evaluate("What should I eat?", ["Given your diet (keto), eat eggs", "Given your diet (vegan), eat tofu"])
    agent.probe(SCHEMA)
    agent.evaluate_with_truth("What should I eat?", ["a", "b"], {"diet": "keto"})
    assert (agent.store_digest(), agent.buffer, agent.update_cycles) == (digest, buffer, cycles)


def test_probe_marks_missing_and_invalid_unknown():
    chat = ScriptedBackend([("agent.probe", lambda r, g: json.dumps({"diet": "keto", "city": "berlin"}))])
    agent = MemoryAgent(AgentConfig.default("awi"), chat)
    assert agent.probe(SCHEMA) == {"diet": "keto", "city": None}
    chat = ScriptedBackend([("agent.probe", lambda r, g: json.dumps({"diet": "vegan"}))])
    assert MemoryAgent(AgentConfig.default("awi"), chat).probe(SCHEMA) == {"diet": "vegan", "city": None}


def test_ub_context_has_truth_and_no_memory():
    seen = []

    def capture(req, rng):
        seen.append(req)
        return '{"answer": 1}'

    chat = ScriptedBackend([("agent.evaluate_ub", capture), ("agent.*", lambda r, g: "{}")])
    agent = MemoryAgent(AgentConfig.default("awi", freq=1, ns=4), chat)
    agent.merge({"diet": "diet is vegan"})
    agent.respond("my diet is now vegan")
    assert agent.evaluate_with_truth("q?", ["x", "y"], {"diet": "keto"}) == 0
    [req] = seen
    assert len(req.messages) == 2
    assert '"diet": "keto"' in req.prompt
    assert "diet is vegan" not in req.messages[0].content


@pytest.mark.parametrize("reply,n,expected", [
    ('{"answer": 3}', 5, 2),
    ('```json\n{"answer": 1}\n```', 5, 0),
    ('{"answer": "2"}', 5, 1),
    ('{"answer": 6}', 5, None),
    ('{"answer": 0}', 5, None),
    ("I think the third one", 5, None),
    ('blah "answer": 4 blah', 5, 3),
])
def test_parse_answer(reply, n, expected):
    assert parse_answer(reply, n) == expected


def test_option_block_is_one_based():
    assert format_options(["a", "b"]) == "1. a\n2. b"


def test_llm_overflow_truncates_oldest():
    agent = MemoryAgent(AgentConfig("llm", freq=1, ns=0, topk=0, token_budget=400), scripted_world(0))
    for i in range(20):
        agent.respond(f"round {i} " + "x" * 80)
    events = agent.drain_events()
    assert any(e.startswith("overflow") for e in events)
    context = agent._context("final", "final")
    assert sum(estimate_tokens(m.content) for m in context) <= 400
    users = [m.content for m in context if m.role == "user"][:-1]
    assert users and users[-1].startswith("round 19")
