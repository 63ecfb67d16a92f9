import pytest
from hypothesis import given, settings, strategies as st

from nesyc.envsim import WorldConfig, gen_dataset, oracle_rules, records_to_experiences
from nesyc.errors import InconsistentEffects, MalformedTransition, NoCandidates
from nesyc.interpretation import Interpretation
from nesyc.logic import variant_key
from nesyc.lptext import parse, parse_atom, parse_clause, print_program
from nesyc.reformulation import (
    ExperienceSet,
    FixedGenerator,
    ReformulationConfig,
    Transition,
    enumerative_generate,
    extract_effects,
    interpret_loop,
    reformulate,
    translate_experiences,
    translate_transition,
)
from nesyc.scoring import score


def I(*texts):
    return Interpretation(frozenset(parse_atom(t) for t in texts))


def tr(pre, act, ok, post=None):
    return Transition(I(*pre), parse_atom(act), I(*(post if post is not None else pre)), ok)


POS = [tr(["at(apple,table)", "robot_at(table)"], "pick_up(apple,table)", 1),
       tr(["at(cup,shelf)", "robot_at(shelf)"], "pick_up(cup,shelf)", 1),
       tr(["at(mug,table)", "robot_at(table)", "at(cup,shelf)"], "pick_up(mug,table)", 1)]
NEG_AWAY = [tr(["at(apple,shelf)", "robot_at(table)"], "pick_up(apple,table)", 0),
            tr(["robot_at(shelf)", "at(mug,table)"], "pick_up(cup,shelf)", 0),
            tr(["at(cup,table)", "robot_at(table)"], "pick_up(mug,table)", 0)]
NEG_HOLD = [tr(["at(apple,table)", "robot_at(table)", "holding(cup)"], "pick_up(apple,table)", 0),
            tr(["at(cup,shelf)", "robot_at(shelf)", "holding(mug)"], "pick_up(cup,shelf)", 0)]


def batch(trs):
    return [translate_transition(t, i, ex_id=f"x{i}") for i, t in enumerate(trs)]


def keys(prog):
    return {variant_key(c) for c in prog.clauses}


class TestTranslate:
    def test_positive_example(self):
        ex = translate_transition(POS[0], 0)
        assert ex.positive
        assert ex.interp.atoms == {parse_atom("at(apple,table,0)"), parse_atom("robot_at(table,0)"),
                                   parse_atom("action(pick_up(apple,table),1)")}

    def test_negative_keeps_holding(self):
        ex = translate_transition(NEG_HOLD[0], 4)
        assert not ex.positive
        assert parse_atom("holding(cup,4)") in ex.interp.atoms

    def test_empty(self):
        assert translate_experiences(ExperienceSet()) == []

    def test_unknown_schema(self):
        with pytest.raises(MalformedTransition):
            translate_transition(tr([], "fly(bird)", 1), 0)

    def test_bad_affordance(self):
        with pytest.raises(MalformedTransition):
            tr([], "go_to(table)", 2)

    def test_origin_kept(self):
        xs = ExperienceSet(origin="M")
        xs.add("m", POS[:1])
        assert translate_experiences(xs)[0].origin == "M"


class TestEnumerative:
    def test_not_at(self):
        hs = enumerative_generate(batch(POS + NEG_AWAY))
        assert keys(parse(":- action(pick_up(O,L),T), not at(O,L,T).")) <= set().union(
            *(keys(h) for h in hs))

    def test_holding_other(self):
        hs = enumerative_generate(batch(POS + NEG_HOLD))
        want = keys(parse(":- action(pick_up(O,_),T), holding(O2,T)."))
        assert want <= set().union(*(keys(h) for h in hs))

    def test_all_positive(self):
        hs = enumerative_generate(batch(POS))
        assert all(len(h.clauses) == 0 for h in hs)

    def test_candidates_are_valid_text(self):
        for h in enumerative_generate(batch(POS + NEG_AWAY + NEG_HOLD)):
            assert parse(print_program(h)) == h


class TestEffects:
    def test_pick_up_adds_holding(self):
        trs = [tr(["at(apple,table)", "robot_at(table)"], "pick_up(apple,table)", 1,
                  ["holding(apple)", "robot_at(table)"]),
               tr(["at(cup,shelf)", "robot_at(shelf)"], "pick_up(cup,shelf)", 1,
                  ["holding(cup)", "robot_at(shelf)"])]
        eff = keys(extract_effects(trs))
        assert variant_key(parse_clause("holding(O,T) :- action(pick_up(O,L),T).")) in eff
        assert variant_key(parse_clause("del_at(O,L,T) :- action(pick_up(O,L),T).")) in eff

    def test_no_common_diff(self):
        trs = [tr(["robot_at(table)"], "open(fridge)", 1)]
        diags: list = []
        assert extract_effects(trs, diagnostics=diags) == parse("")
        assert diags
        with pytest.raises(InconsistentEffects):
            extract_effects(trs, strict=True)


class TestLoop:
    def test_carrier_selects_h1(self, carrier):
        ex = list(carrier["examples"].values())
        gen = FixedGenerator([carrier["h1"], carrier["h2"]], carrier["bk"])
        tr_ = interpret_loop(ex, None, ReformulationConfig(itermax=1), gen, carrier["bk"])
        assert tr_.accepted == carrier["h1"]
        assert tr_.accepted_hi.value == 0.5

    def test_no_candidates(self, carrier):
        with pytest.raises(NoCandidates):
            interpret_loop(list(carrier["examples"].values()), None, ReformulationConfig(),
                           FixedGenerator([]))

    def test_feedback_kinds(self, carrier):
        seen = []

        class Spy(FixedGenerator):
            def __call__(self, b, current_h=None, feedback=None):
                seen.append(None if feedback is None else feedback.kind)
                return super().__call__(b, current_h, feedback)

        ex = list(carrier["examples"].values())
        interpret_loop(ex, None, ReformulationConfig(itermax=3, batch_size=3),
                       Spy([carrier["h1"]], carrier["bk"]), carrier["bk"])
        assert seen == [None, "Revise", "Revise"]


@pytest.fixture(scope="module")
def small_dataset():
    recs = gen_dataset(WorldConfig(rng_seed=3), 6, "random-failures", seed=1)
    return records_to_experiences(recs)


class TestReformulate:
    def test_deterministic(self, small_dataset):
        a = reformulate(small_dataset, None, ReformulationConfig())
        b = reformulate(small_dataset, None, ReformulationConfig())
        assert a.to_lp() == b.to_lp()

    def test_itermax_stationary(self, small_dataset):
        one = reformulate(small_dataset, None, ReformulationConfig(itermax=1))
        three = reformulate(small_dataset, None, ReformulationConfig(itermax=3))
        assert one.to_lp() == three.to_lp()

    def test_monotone_hi(self, small_dataset):
        traces: list = []
        reformulate(small_dataset, None, ReformulationConfig(), trace_out=traces)
        t = traces[0]
        assert t.accepted_hi.value >= t.first_step_best
        accepted = [p["accepted_hi"] for p in t.passes]
        assert accepted == sorted(accepted)

    def test_rules_are_registered(self, small_dataset):
        k = reformulate(small_dataset, None, ReformulationConfig())
        text = k.to_lp()
        assert parse(text) == k.program()
        from nesyc.domain import HOUSEHOLD
        known = set(HOUSEHOLD.fluents) | {"action"} | {f"del_{p}" for p in HOUSEHOLD.fluents} \
            | {p for p in ("openable", "is_heater", "is_cooler", "is_cleaner", "heatable",
                           "coolable", "cleanable")}
        for c in k.clauses:
            for a in c.atoms():
                assert a.predicate in known or a.is_comparison, a

    def test_seed_rules_kept_when_best(self, small_dataset):
        oracle = oracle_rules().constraints
        traces: list = []
        k = reformulate(small_dataset, oracle, ReformulationConfig(), trace_out=traces)
        ex, bk = translate_experiences(small_dataset), traces[0].bk
        assert score(k.constraints, ex, bk).value >= score(oracle, ex, bk).value

    def test_no_false_positives_on_full_data(self, small_dataset):
        traces: list = []
        k = reformulate(small_dataset, None, ReformulationConfig(), trace_out=traces)
        assert score(k.constraints, translate_experiences(small_dataset), traces[0].bk).fpr == 0.0

    def test_memory_counts_as_working_memory(self, small_dataset):
        mem = ExperienceSet(origin="M")
        mem.add("m", NEG_HOLD)
        traces: list = []
        k = reformulate(small_dataset, None, ReformulationConfig(), memory=mem, trace_out=traces)
        assert score(k.constraints, batch(NEG_HOLD), traces[0].bk).fpr == 0.0


@settings(max_examples=15, deadline=None)
@given(st.lists(st.sampled_from(POS + NEG_AWAY + NEG_HOLD), min_size=2, max_size=8),
       st.integers(1, 4), st.integers(0, 5))
def test_accepted_is_argmax_over_passes(trs, k, seed):
    xs = ExperienceSet()
    xs.add("x", trs)
    traces: list = []
    try:
        reformulate(xs, None, ReformulationConfig(batch_size=k, rng_seed=seed), trace_out=traces)
    except NoCandidates:
        return
    t = traces[0]
    assert t.accepted_hi.value >= max(p["pass_best_hi"] for p in t.passes) - 1e-12
