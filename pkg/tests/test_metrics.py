import math

import pytest
from hypothesis import given, strategies as st

from nesyc.domain import knowledge_f1, rule_delta
from nesyc.lptext import parse
from nesyc.metrics import MetricsSummary, phase_table, results_from_trace, seed_rates, summarize, \
    write_csv

R = parse(":- p(X). :- q(X). :- r(X). :- s(X).").clauses


def ep(success, gc=None, step=1.0):
    return {"success": success, "gc": gc if gc is not None else float(success), "step": step}


def test_seed_rates():
    r = seed_rates([ep(True), ep(False, 0.5, 0.0), ep(True), ep(False, 0.0, 0.5)])
    assert r == {"sr": 50.0, "gc": 62.5, "step": 62.5, "n": 4}


def test_summary_uses_sample_std():
    s = summarize({1: [ep(True)], 2: [ep(False)], 3: [ep(True)]})
    assert s.sr == pytest.approx(200 / 3)
    assert s.sr_std == pytest.approx(math.sqrt(((100 - 200 / 3) ** 2 * 2 + (200 / 3) ** 2) / 2))
    assert s.n_episodes == 3


def test_single_seed_has_zero_std():
    assert summarize({1: [ep(True), ep(False)]}).sr_std == 0.0


def test_empty():
    with pytest.raises(ValueError):
        seed_rates([])
    with pytest.raises(ValueError):
        summarize({})


def test_cell_and_dict():
    s = MetricsSummary(92.0, 3.14, 90.0, 1.0, 80.0, 0.0, 50)
    assert s.cell("sr") == "92.0 ± 3.1"
    assert s.to_dict()["hi_final"] is None


def test_delta_examples():
    assert rule_delta(R, R) == 0.0
    assert rule_delta(R, R[:3]) == 25.0
    assert rule_delta(R[:2], R) == 100.0
    assert rule_delta([], R) == 100.0 and rule_delta([], []) == 0.0


def test_delta_ignores_renaming():
    assert rule_delta(parse(":- p(X), q(X).").clauses, parse(":- q(Y), p(Y).").clauses) == 0.0


def test_f1():
    assert knowledge_f1(R, R) == 1.0
    assert knowledge_f1(R[:2], R) == pytest.approx(2 / 3)
    assert knowledge_f1([], R) == 0.0


@given(st.sets(st.integers(0, 3)), st.sets(st.integers(0, 3)))
def test_f1_symmetric_and_bounded(a, b):
    x, y = [R[i] for i in sorted(a)], [R[i] for i in sorted(b)]
    f = knowledge_f1(x, y)
    assert 0.0 <= f <= 1.0 and f == knowledge_f1(y, x)


def test_phase_table():
    rows = phase_table([(R[:2], [ep(True)]), (R, [ep(False)]), (R, [])], R)
    assert [r["delta"] for r in rows] == [100.0, 100.0, 0.0]
    assert rows[2]["f1"] == 100.0 and math.isnan(rows[2]["sr"])


def test_results_from_trace():
    evs = [{"event": "plan"}, {"event": "result", "success": True, "gc": 1.0, "step": 0.5,
                                "steps_used": 4, "refinements": 1, "extra": 0}]
    assert results_from_trace(evs) == [{"success": True, "gc": 1.0, "step": 0.5,
                                        "steps_used": 4, "refinements": 1}]


def test_write_csv(tmp_path):
    write_csv([{"a": 1, "b": 2}], tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines() == ["a,b", "1,2"]
    write_csv([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ""
