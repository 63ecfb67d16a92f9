import pytest
from hypothesis import given, settings, strategies as st

from nesyc.errors import GroundingOverflow
from nesyc.logic import (
    Atom,
    Clause,
    Compound,
    Constant,
    Literal,
    Variable,
    apply_substitution,
    atom,
    ground_instances,
    match_atom,
    theta_subsumes,
    variant_key,
)
from nesyc.lptext import parse, parse_atom, parse_clause
from oracles import brute_solutions
from strategies import CONSTANTS, atoms, clauses, ground_atom_sets

X, Y, Z, A = (Variable(v) for v in "XYZA")
c = Constant

H1 = parse_clause("carrier(X) :- mother(Y,X), carrier(Y), father(Z,X), carrier(Z).")
H2 = parse_clause("carrier(X) :- mother(Y,X), father(Z,X).")
CARRIER_BK = parse("father(henry,bill). father(alan,betsy). father(alan,benny). "
                   "mother(beth,bill). mother(ann,betsy). mother(alice,benny).")


class TestTerms:
    def test_compound_needs_args(self):
        with pytest.raises(ValueError):
            Compound("f", ())

    def test_atom_builder_reads_case(self):
        a = atom("on", "X", "plate")
        assert a.args == (X, c("plate"))

    def test_clause_kinds(self):
        assert parse_clause(":- p(X).").is_constraint
        assert parse_clause("p(a).").is_fact
        assert parse_clause("p(X) :- q(X).").is_rule

    def test_duplicate_body_literals_collapse(self):
        lit = Literal(atom("p", "X"))
        assert len(Clause(None, (lit, lit)).body) == 1


class TestSubstitution:
    def test_pickup_table_table(self):
        got = apply_substitution(atom("pickup", "X", "Y"), {X: c("table"), Y: c("table")})
        assert got == atom("pickup", "table", "table")

    def test_empty_is_identity(self):
        assert apply_substitution(atom("small", "X"), {}) == atom("small", "X")

    def test_partial(self):
        assert apply_substitution(atom("on", "X", "Z"), {X: c("orange")}) == atom("on", "orange", "Z")

    @given(clauses(), st.dictionaries(st.sampled_from([X, Y, Z]), st.sampled_from(CONSTANTS)))
    def test_idempotent_with_ground_bindings(self, cl, theta):
        once = apply_substitution(cl, theta)
        assert apply_substitution(once, theta) == once


class TestMatch:
    def test_binds_both(self):
        assert match_atom(atom("on", "A", "X"), atom("on", "orange", "plate")) == \
            {A: c("orange"), X: c("plate")}

    def test_conflict(self):
        assert match_atom(atom("on", "X", "X"), atom("on", "orange", "plate")) is None

    def test_predicate_mismatch(self):
        assert match_atom(atom("holding", "X"), atom("on", "a", "b")) is None

    def test_time_arithmetic(self):
        pat = parse_atom("at(O, L, T-1)")
        th = match_atom(pat, parse_atom("at(apple, table, 3)"), {Variable("T"): c("4")})
        assert th is not None and th[Variable("O")] == c("apple")

    @given(atoms(), atoms(ground=True))
    def test_match_reproduces_ground(self, pattern, ground):
        th = match_atom(pattern, ground)
        if th is not None:
            assert apply_substitution(pattern, th) == ground


class TestSubsumption:
    def test_reflexive_example(self):
        assert theta_subsumes(H1, H1)

    def test_general_subsumes_specific(self):
        assert theta_subsumes(H2, H1)
        assert not theta_subsumes(H1, H2)

    def test_extra_literal_has_no_image(self):
        h3 = parse_clause("pickup(X,Y) :- small(X), light(X), non_fragile(X), heavy(Y).")
        h2 = parse_clause("pickup(X,Y) :- small(X), light(X), heavy(Y).")
        assert not theta_subsumes(h3, h2)
        assert theta_subsumes(h2, h3)

    def test_polarity_matters(self):
        assert not theta_subsumes(parse_clause(":- p(X), not q(X)."), parse_clause(":- p(a), q(a)."))

    def test_constraint_never_subsumes_rule_head(self):
        assert not theta_subsumes(parse_clause("p(X) :- q(X)."), parse_clause(":- q(a)."))

    @given(clauses(nested=False))
    def test_reflexive(self, cl):
        assert theta_subsumes(cl, cl)

    @settings(max_examples=60)
    @given(clauses(nested=False), clauses(nested=False), clauses(nested=False))
    def test_transitive(self, a, b, d):
        if theta_subsumes(a, b) and theta_subsumes(b, d):
            assert theta_subsumes(a, d)

    @settings(max_examples=80)
    @given(clauses(nested=False, max_body=2), ground_atom_sets)
    def test_firing_instances_are_inherited(self, general, atoms_):
        # extend the general clause with one more literal; every firing of the
        # specific clause is a firing of the general one
        extra = Literal(Atom("p", (X,)))
        if general.head is not None:
            return
        specific = Clause(None, general.body + (extra,))
        assert theta_subsumes(general, specific)
        consts = set(CONSTANTS)
        fire_s = brute_solutions(specific.body, atoms_, consts)
        fire_g = brute_solutions(general.body, atoms_, consts)
        g_vars = set(general.variables())
        projected = {frozenset((v, t) for v, t in th if v in g_vars) for th in fire_s}
        assert projected <= fire_g


class TestGrounding:
    def test_carrier_count(self):
        # henry, bill, alan, betsy, benny, beth, ann, alice
        consts = {t for cl in CARRIER_BK for a in cl.atoms() for t in a.args}
        assert len(consts) == 8
        assert len(ground_instances(H2, consts)) == len(consts) ** 3

    def test_empty_constants(self):
        assert ground_instances(H2, set()) == []

    def test_ground_clause(self):
        g = parse_clause("p(a) :- q(a).")
        assert ground_instances(g, {c("a"), c("b")}) == [g]

    def test_deterministic_order(self):
        inst = ground_instances(parse_clause(":- q(X, Y)."), {c("b"), c("a")})
        assert [str(i) for i in inst] == [":- q(a, a).", ":- q(a, b).", ":- q(b, a).", ":- q(b, b)."]

    def test_overflow(self):
        with pytest.raises(GroundingOverflow):
            ground_instances(H1, {c(str(i)) for i in range(20)}, cap=100)


class TestVariants:
    def test_renaming_and_order(self):
        a = parse_clause(":- action(pick_up(O, L), T), not at(O, L, T).")
        b = parse_clause(":- not at(A, B, S), action(pick_up(A, B), S).")
        assert variant_key(a) == variant_key(b)

    def test_distinct_clauses_differ(self):
        assert variant_key(parse_clause(":- p(X, Y).")) != variant_key(parse_clause(":- p(X, X)."))
