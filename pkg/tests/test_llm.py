import json

import httpx
import pytest

from nesyc.errors import EndpointError, UnparseableAfterRetries, VocabularyViolation
from nesyc.interpretation import Example, Interpretation
from nesyc.llm import (
    HYPOTHESIS_WITH_SUBSUMPTION,
    ChatClient,
    LlmEndpointConfig,
    LlmGenerator,
    ask_for_program,
    extract_rules,
    llm_generate,
    llm_semantic_parse,
    render_examples,
    request_hash,
)
from nesyc.lptext import parse, parse_atom


class ScriptedServer:
    """Replies from a fixed list, recording every request body."""

    def __init__(self, replies, status=200):
        self.replies = list(replies)
        self.status = status
        self.bodies: list = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.bodies.append(json.loads(request.content))
        if self.status != 200:
            return httpx.Response(self.status, json={"error": "boom"})
        text = self.replies.pop(0)
        return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def client(replies, retries=2, **kw):
    server = ScriptedServer(replies, **kw)
    cfg = LlmEndpointConfig(base_url="http://mock/v1", max_repair_retries=retries, api_key_env="")
    return ChatClient(cfg, transport=httpx.MockTransport(server)), server, cfg


def batch():
    e = lambda atoms, pos, i: Example(Interpretation(frozenset(parse_atom(a) for a in atoms)), pos,
                                      "T", i)
    return [e(["at(apple,table,0)", "robot_at(table,0)", "action(pick_up(apple,table),1)"], True, "p1"),
            e(["robot_at(table,0)", "action(pick_up(cup,table),1)"], False, "n1")]


def test_prompt_contains_examples_verbatim():
    c, server, cfg = client(["small(apple).", ":- action(pick_up(O, L), T), not at(O, L, T)."])
    h, bk = llm_generate(batch(), cfg=cfg, client=c)
    block = render_examples(batch())
    assert block in server.bodies[0]["messages"][0]["content"]
    assert block in server.bodies[1]["messages"][0]["content"]
    assert "action(pick_up(O, L), T)" in server.bodies[1]["messages"][0]["content"]
    assert h == parse(":- action(pick_up(O, L), T), not at(O, L, T).")
    assert bk == parse("small(apple).")


def test_malformed_then_valid_uses_one_retry():
    c, server, _ = client(["Sure! here you go:\n:- action(pick_up(O, L), T), not at(O, L T.",
                           ":- action(pick_up(O, L), T), not at(O, L, T)."])
    res = ask_for_program(c, "prompt", retries=2)
    assert res.retries == 1 and len(res.program.clauses) == 1
    repair = server.bodies[1]["messages"]
    assert [m["role"] for m in repair] == ["user", "assistant", "user"]
    assert "could not be parsed" in repair[-1]["content"]


def test_retries_exhausted():
    c, server, _ = client(["no rules here", "still prose", "nope"])
    with pytest.raises(UnparseableAfterRetries) as info:
        ask_for_program(c, "prompt", retries=2)
    assert len(server.bodies) == 3 and info.value.diagnostics


def test_request_parameters():
    c, server, cfg = client(["p(a)."])
    c.complete([{"role": "user", "content": "hi"}])
    body = server.bodies[0]
    assert body["model"] == cfg.model_name and body["temperature"] == 0.0
    assert body["max_tokens"] == cfg.max_new_tokens


def test_http_error_maps_to_endpoint_error():
    c, _, _ = client([], status=500)
    with pytest.raises(EndpointError):
        c.complete([{"role": "user", "content": "hi"}])


def test_fixtures_replay(tmp_path):
    cfg = LlmEndpointConfig(fixtures_dir=str(tmp_path), api_key_env="")
    c = ChatClient(cfg)
    msgs = [{"role": "user", "content": "hi"}]
    (tmp_path / f"{request_hash(c.body(msgs))}.txt").write_text("p(a).")
    assert c.complete(msgs) == "p(a)."
    with pytest.raises(EndpointError):
        c.complete([{"role": "user", "content": "other"}])


def test_extract_rules():
    reply = "Here are the rules:\n```\n- :- action(x(A), T), p(A).\n2. q(b).\n```\nHope this helps."
    assert extract_rules(reply) == ":- action(x(A), T), p(A).\nq(b)."


def test_semantic_parse_vocabulary():
    c, _, cfg = client(["robot_at(table).", "dance(robot)."])
    got = llm_semantic_parse("You are at the table.", cfg, c)
    assert got.atoms == {parse_atom("robot_at(table)")}
    with pytest.raises(VocabularyViolation):
        llm_semantic_parse("The robot dances.", cfg, c)


def test_semantic_parse_rejects_rules():
    c, server, cfg = client(["p(X) :- q(X).", "robot_at(table)."])
    assert llm_semantic_parse("You are at the table.", cfg, c).atoms == {parse_atom("robot_at(table)")}
    assert len(server.bodies) == 2


def test_generator_counts_retries():
    c, _, cfg = client(["bad (", "q(a).", ":- action(pick_up(O, L), T), holding(O2, T)."])
    gen = LlmGenerator(cfg, client=c)
    hs, bk = gen(batch())
    assert gen.stats["retries"] == 1 and len(hs) == 1


def test_template_slots():
    assert HYPOTHESIS_WITH_SUBSUMPTION.slots == {
        "predicates", "interpreter_feedback", "positive_negative_examples",
        "background_knowledge", "target_action_predicate"}
    with pytest.raises(ValueError):
        HYPOTHESIS_WITH_SUBSUMPTION.render(predicates="")


def test_config_file(tmp_path):
    (tmp_path / "llm.toml").write_text('[llm]\nmodel_name = "m"\ntemperature = 0.2\n')
    cfg = LlmEndpointConfig.from_file(tmp_path / "llm.toml")
    assert cfg.model_name == "m" and cfg.temperature == 0.2
    with pytest.raises(ValueError):
        LlmEndpointConfig(temperature=-1)
