import itertools

import pytest
from hypothesis import given, settings, strategies as st

from nesyc.errors import EmptyCandidates, NoExamples
from nesyc.interpretation import Example, Interpretation
from nesyc.logic import Program
from nesyc.lptext import parse
from nesyc.scoring import ConfusionCounts, Counts, HiScore, ScoringParams, confusion, hi, \
    hi_unweighted, score, select_best
from strategies import clauses, ground_atom_sets


def counts(t=(0, 0, 0, 0), m=(0, 0, 0, 0)) -> ConfusionCounts:
    out = ConfusionCounts()
    out.by_origin["T"] = Counts(*t)
    out.by_origin["M"] = Counts(*m)
    return out


class TestConfusion:
    def test_carrier_h1(self, carrier):
        cc = confusion(carrier["h1"], carrier["examples"].values(), carrier["bk"])
        t = cc["T"]
        assert (t.tp, t.fp, t.tn, t.fn) == (2, 0, 1, 0)

    def test_carrier_h2(self, carrier):
        cc = confusion(carrier["h2"], carrier["examples"].values(), carrier["bk"])
        assert (cc["T"].tp, cc["T"].fp) == (0, 0)
        assert sorted(cc.false_negatives) == ["e1", "e2"]

    def test_empty_hypothesis_covers_all(self, carrier):
        cc = confusion(Program(), carrier["examples"].values(), carrier["bk"])
        assert (cc["T"].tp, cc["T"].fp) == (2, 1)
        assert cc.false_positives == ["e3"]

    def test_origin_split(self, carrier):
        ex = [Example(e.interp, e.positive, "M", e.id) for e in carrier["examples"].values()]
        cc = confusion(carrier["h1"], ex, carrier["bk"])
        assert cc["M"].tp == 2 and cc["T"].n_pos == 0


class TestHi:
    def test_perfect(self):
        assert hi(counts(t=(4, 0, 3, 0))).value == pytest.approx(0.5)

    def test_carrier(self, carrier):
        assert score(carrier["h1"], carrier["examples"].values(), carrier["bk"]).value == 0.5
        assert score(carrier["h2"], carrier["examples"].values(), carrier["bk"]).value == 0.0

    def test_empty_hypothesis(self, carrier):
        assert score(Program(), carrier["examples"].values(), carrier["bk"]).value == 0.0

    def test_lambda_weighting(self):
        # T: tpr 1, fpr 0.5; M: tpr 0.5, fpr 1
        s = hi(counts(t=(2, 1, 1, 0), m=(1, 2, 0, 1)), ScoringParams(alpha=0.5, lam=0.25))
        tpr = 0.25 * 1 + 0.75 * 0.5
        fpr = 0.25 * 0.5 + 0.75 * 1
        assert s.tpr == pytest.approx(tpr) and s.fpr == pytest.approx(fpr)
        assert s.value == pytest.approx(0.5 * tpr - 0.5 * fpr)

    def test_empty_partition_gets_no_weight(self):
        only_t = hi(counts(t=(3, 1, 1, 1)), ScoringParams(lam=0.1))
        assert only_t.tpr == pytest.approx(0.75) and only_t.fpr == pytest.approx(0.5)

    def test_no_negatives(self):
        assert hi(counts(t=(2, 0, 0, 0))).fpr == 0.0

    def test_no_examples(self):
        with pytest.raises(NoExamples):
            hi(counts())

    def test_unweighted_form(self):
        s = hi_unweighted(counts(t=(1, 0, 1, 1), m=(1, 1, 0, 0)))
        assert s.value == pytest.approx(2 / 3 - 1 / 2)

    def test_params_validated(self):
        with pytest.raises(ValueError):
            ScoringParams(alpha=1.5)

    @given(st.tuples(*[st.integers(0, 5)] * 8), st.floats(0, 1), st.floats(0, 1))
    def test_range(self, n, alpha, lam):
        cc = counts(t=n[:4], m=n[4:])
        if not any(n):
            return
        s = hi(cc, ScoringParams(alpha, lam))
        assert -(1 - alpha) - 1e-12 <= s.value <= alpha + 1e-12
        assert 0 <= s.tpr <= 1 and 0 <= s.fpr <= 1
        if alpha == 1.0:
            assert s.value == pytest.approx(s.tpr)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(clauses(nested=False), max_size=3), clauses(nested=False),
           st.lists(st.tuples(ground_atom_sets, st.booleans()), min_size=1, max_size=5))
    def test_adding_clause_shrinks_models(self, base_clauses, extra, exs):
        examples = [Example(Interpretation(a), lab, "T", str(i)) for i, (a, lab) in enumerate(exs)]
        h = Program(tuple(base_clauses))
        before = confusion(h, examples)["T"]
        after = confusion(h.union(Program((extra,))), examples)["T"]
        assert after.tp <= before.tp and after.fp <= before.fp


class TestSelect:
    def test_best(self, carrier):
        assert select_best([(carrier["h1"], 0.5), (carrier["h2"], 0.0)]) == carrier["h1"]

    def test_single(self, carrier):
        assert select_best([(carrier["h2"], -0.3)]) == carrier["h2"]

    def test_tie_prefers_fewer_clauses(self):
        one = parse(":- p(X).")
        three = parse(":- p(X). :- q(X). :- r(X).")
        assert select_best([(three, 0.2), (one, 0.2)]) == one

    def test_tie_prefers_shorter_bodies(self):
        short = parse(":- p(X).")
        long_ = parse(":- p(X), q(X).")
        assert select_best([(long_, HiScore(0.1, 1, 0)), (short, HiScore(0.1, 1, 0))]) == short

    def test_empty(self):
        with pytest.raises(EmptyCandidates):
            select_best([])

    def test_permutation_invariant(self):
        progs = [(parse(t), v) for t, v in [(":- p(X).", 0.3), (":- q(X).", 0.3),
                                             (":- r(X), s(X).", 0.3), (":- s(a).", 0.1)]]
        winners = {select_best(list(p)) for p in itertools.permutations(progs)}
        assert len(winners) == 1
