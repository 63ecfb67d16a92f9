"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (collected in the terminal summary) before
asserting, so a failing criterion still reports its measured values.
"""
import random
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings

from nesyc.domain import knowledge_f1
from nesyc.envsim import WorldConfig, gen_dataset, oracle_rules, records_to_experiences
from nesyc.harness import BenchConfig, ContinualConfig, bench, continual
from nesyc.interpretation import bk_closure, is_model
from nesyc.logic import variant_key
from nesyc.lptext import parse, print_program
from nesyc.planner import load_problem, plan
from nesyc.reformulation import (
    FixedGenerator,
    ReformulationConfig,
    interpret_loop,
    reformulate,
    translate_experiences,
)
from nesyc.scoring import score
from microworld import problem_text, random_world
from oracles import blocks_shortest, brute_is_model, carrier_pickup_step, enumerate_plans
from strategies import programs

DATA = Path(__file__).parent / "data"
pytestmark = pytest.mark.acceptance


# 1 ---------------------------------------------------------------------------------------

def test_carrier_lfi(carrier, criterion):
    t0 = time.perf_counter()
    ex = carrier["examples"]
    verdicts = {}
    for e, h in [("e1", "h1"), ("e2", "h1"), ("e3", "h1"), ("e1", "h2")]:
        base = bk_closure(carrier["bk"], ex[e].interp)
        verdicts[(e, h)] = is_model(ex[e].interp, carrier[h], base)
    gen = FixedGenerator([carrier["h1"], carrier["h2"]], carrier["bk"])
    chosen = interpret_loop(list(ex.values()), None, ReformulationConfig(itermax=1), gen,
                            carrier["bk"]).accepted
    elapsed = time.perf_counter() - t0
    expected = {("e1", "h1"): True, ("e2", "h1"): True, ("e3", "h1"): False, ("e1", "h2"): False}
    oracle = {(e, h): brute_is_model(ex[e].interp.atoms, carrier[h].clauses, carrier["bk"].clauses)
              for e, h in expected}
    ok = verdicts == expected == oracle and chosen == carrier["h1"] and elapsed < 1.0
    criterion(1, ok, f"selected {'h1' if chosen == carrier['h1'] else 'h2'}, "
                     f"verdicts match oracle={verdicts == oracle}, {elapsed * 1000:.0f} ms")
    assert ok


# 2 ---------------------------------------------------------------------------------------

def test_orange_planner(orange_text, criterion):
    objs = ["plate", "fork", "orange"]
    acts = [("pickup", x, y) for x in objs for y in ["table"] + objs if x != y]
    results = {}
    for goal in ("orange", "plate"):
        prob = load_problem(orange_text.replace("goal(holding(orange))", f"goal(holding({goal}))"), 3)
        p = [str(a) for a in plan(prob)]
        init = frozenset((a.predicate,) + tuple(str(t) for t in a.args) for a in prob.initial.fluents)
        found = enumerate_plans(init, ("holding", goal), acts,
                                lambda s, a: carrier_pickup_step(s, a, objs), 3)
        shortest = min(len(f) for f in found)
        as_text = {tuple(f"{a[0]}({a[1]}, {a[2]})" for a in f) for f in found}
        results[goal] = (p, len(p) == shortest and tuple(p) in as_text)
    ok = (results["orange"][0] == ["pickup(orange, plate)"]
          and len(results["plate"][0]) == 2 and results["plate"][0][0] == "pickup(orange, plate)"
          and all(m for _, m in results.values()))
    criterion(2, ok, f"holding(orange) -> {results['orange'][0]}, "
                     f"holding(plate) -> {results['plate'][0]}")
    assert ok


# 3 ---------------------------------------------------------------------------------------

def test_microworld_equivalence(criterion):
    rng = random.Random(2024)
    t0 = time.perf_counter()
    agree = 0
    n = 120
    for _ in range(n):
        objs, init, goal, horizon = random_world(rng)
        got = plan(load_problem(problem_text(objs, init, goal), horizon))
        want = blocks_shortest(init, goal, objs, ["table"] + objs, horizon)
        agree += (got is None and want is None) or (got is not None and len(got) == want)
    elapsed = time.perf_counter() - t0
    ok = agree == n and elapsed < 30
    criterion(3, ok, f"{agree}/{n} worlds agree, {elapsed:.1f} s")
    assert ok


# 4 and 5 ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def learned():
    cfg = WorldConfig(rng_seed=1)
    train = records_to_experiences(gen_dataset(cfg, 40, "random-failures", seed=0))
    held = records_to_experiences(gen_dataset(cfg, 20, "random-failures", seed=7), prefix="h")
    traces: list = []
    k = reformulate(train, None, ReformulationConfig(), trace_out=traces)
    return train, held, k, traces[0]


def test_reformulation_recovers_oracle(learned, criterion):
    train, held, k, trace = learned
    counts = {}
    for _, _, tr in train.transitions():
        counts[tr.action.predicate] = counts.get(tr.action.predicate, 0) + 1
    target = {variant_key(c) for c in parse((DATA / "pickup_rules.lp").read_text()).clauses}
    got = {variant_key(c) for c in k.constraints.clauses if "pick_up" in str(c.body[0])}
    oracle = oracle_rules()
    f1 = knowledge_f1(k.clauses, oracle.clauses)
    ex = translate_experiences(held)
    hi_r = score(k.constraints, ex, trace.bk).value
    hi_o = score(oracle.constraints, ex, trace.bk).value
    ok = (counts["pick_up"] >= 40 and got == target and f1 >= 0.8 and hi_r >= 0.95 * hi_o)
    criterion(4, ok, f"pick_up transitions {counts['pick_up']}, pick_up set match={got == target} "
                     f"({len(got & target)}/{len(target)} listed), F1 {f1:.3f}, "
                     f"held-out HI {hi_r:.3f} vs oracle {hi_o:.3f}")
    assert ok


def test_hi_monotone(learned, criterion):
    runs = [learned[3]]
    for seed, batch in [(1, 6), (2, 4), (3, 8), (4, 6), (5, 3)]:
        xs = records_to_experiences(gen_dataset(WorldConfig(rng_seed=seed), 4, seed=seed))
        traces: list = []
        reformulate(xs, None, ReformulationConfig(batch_size=batch, rng_seed=seed), trace_out=traces)
        runs.extend(traces)
    gaps = [t.accepted_hi.value - t.first_step_best for t in runs]
    passes = [[p["accepted_hi"] for p in t.passes] for t in runs]
    ok = all(g >= -1e-12 for g in gaps) and all(p == sorted(p) for p in passes)
    criterion(5, ok, f"{len(runs)} runs, min HI gain over first step {min(gaps):+.4f}")
    assert ok


# 6 ---------------------------------------------------------------------------------------

def test_static_end_to_end(criterion):
    t0 = time.perf_counter()
    summary, _ = bench(BenchConfig(world=WorldConfig(dynamics="static"), tasks=50, seeds=(1,)))
    elapsed = time.perf_counter() - t0
    ok = summary.sr >= 90 and summary.gc >= 90 and elapsed < 300
    criterion(6, ok, f"SR {summary.sr:.1f}, GC {summary.gc:.1f}, Step {summary.step:.1f}, "
                     f"{elapsed:.0f} s")
    assert ok


# 7 ---------------------------------------------------------------------------------------

def test_refinement_under_high_dynamics(criterion):
    world = WorldConfig(dynamics="high")
    on, _ = bench(BenchConfig(world=world, tasks=50, seeds=(1,), refinements=5))
    off, _ = bench(BenchConfig(world=world, tasks=50, seeds=(1,), refinements=0))
    ok = on.sr - off.sr >= 20
    criterion(7, ok, f"SR with refinement {on.sr:.1f}, without {off.sr:.1f}, "
                     f"gap {on.sr - off.sr:.1f} pp")
    assert ok


# 8 ---------------------------------------------------------------------------------------

def test_continual_convergence(criterion):
    rows, _, _ = continual(ContinualConfig())
    deltas = [r["delta"] for r in rows]
    f1 = [r["f1"] for r in rows]
    ok = (len(rows) == 8 and deltas[-1] == 0 and all(b >= a for a, b in zip(f1, f1[1:]))
          and all(r["sr"] == 100 for r in rows))
    criterion(8, ok, "delta " + "/".join(f"{d:.1f}" for d in deltas)
              + "; F1 " + "/".join(f"{x:.1f}" for x in f1)
              + "; SR " + "/".join(f"{r['sr']:.0f}" for r in rows))
    assert ok


# 9 ---------------------------------------------------------------------------------------

_round_trip_failures: list = []


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(programs)
def _round_trip(p):
    text = print_program(p)
    again = parse(text)
    if again != p or print_program(again) != text:
        _round_trip_failures.append(text)


def test_parser_round_trip(orange_text, criterion):
    listings = {"planning listing": orange_text,
                "pick_up constraints": (DATA / "pickup_rules.lp").read_text()}
    fixed = {}
    for name, text in listings.items():
        p = parse(text)
        printed = print_program(p)
        fixed[name] = parse(printed) == p and print_program(parse(printed)) == printed
    _round_trip_failures.clear()
    _round_trip()
    ok = all(fixed.values()) and not _round_trip_failures
    criterion(9, ok, f"listings {fixed}, 1000 generated programs, "
                     f"{len(_round_trip_failures)} failures")
    assert ok


# 10 --------------------------------------------------------------------------------------

def test_llm_offline_contract(criterion):
    import json

    import httpx

    from nesyc.errors import UnparseableAfterRetries
    from nesyc.interpretation import Example, Interpretation
    from nesyc.llm import ChatClient, LlmEndpointConfig, ask_for_program, llm_generate, \
        render_examples
    from nesyc.lptext import parse_atom

    def scripted(replies):
        seen = []

        def handler(request):
            seen.append(json.loads(request.content))
            return httpx.Response(200, json={"choices": [{"message": {"content": replies.pop(0)}}]})
        cfg = LlmEndpointConfig(base_url="http://mock/v1", api_key_env="", max_repair_retries=2)
        return ChatClient(cfg, transport=httpx.MockTransport(handler)), seen, cfg

    batch = [Example(Interpretation(frozenset({parse_atom("at(apple,table,0)"),
                                               parse_atom("action(pick_up(apple,table),1)")})),
                     True, "T", "p1"),
             Example(Interpretation(frozenset({parse_atom("action(pick_up(cup,table),1)")})),
                     False, "T", "n1")]
    c, seen, cfg = scripted(["none.", ":- action(pick_up(O, L), T), not at(O, L, T)."])
    llm_generate(batch, cfg=cfg, client=c)
    verbatim = all(render_examples(batch) in b["messages"][0]["content"] for b in seen)

    c, _, _ = scripted([":- action(pick_up(O, L), T), not at(O L, T).",
                        ":- action(pick_up(O, L), T), not at(O, L, T)."])
    retries = ask_for_program(c, "x", 2).retries

    c, _, _ = scripted(["prose", "prose", "prose"])
    try:
        ask_for_program(c, "x", 2)
        raised = False
    except UnparseableAfterRetries:
        raised = True
    ok = verbatim and retries == 1 and raised
    criterion(10, ok, f"examples verbatim={verbatim}, repair retries={retries}, "
                      f"exhaustion raises={raised}")
    assert ok
