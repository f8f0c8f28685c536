import pytest

import oracle
from drnla import constraints as C
from drnla import lang
from drnla.interp import InputBox
from drnla.lang import ErrorStmt, If
from drnla.polylib import BudgetExceeded
from drnla.validate import (
    CASCADE, CexCase, Counterexample, Mode, Safe, ValidationScope, classify, export_smtlib,
    instrument_check, replay, validate,
)

FIRST = (C.parse_blia("0 >= c - k"), C.parse_blia("0 == c - k - 1"))
SECOND = (C.parse_blia("0 >= c - k"), C.parse_blia("k - c <= -1"))


@pytest.fixture(scope="module")
def prog(cohencu5):
    return lang.normalize(cohencu5)


def scope_k(lo=-10, hi=10, **kw):
    return ValidationScope(InputBox.uniform(["k"], lo, hi), **kw)


def test_cascade_shape(prog):
    checked = instrument_check(prog, {"L1": FIRST})
    arms = []
    node = [s for s in lang.iter_stmts(checked.body) if isinstance(s, If)][0]
    for case in CASCADE:
        assert node.then == (ErrorStmt(case.value, "L1"),) and node.loc is None
        arms.append(case)
        [node] = node.orelse
    original = [s for s in lang.iter_stmts(prog.body) if isinstance(s, If)][0]
    assert node == original
    assert arms == [CexCase.EXPAND_POS, CexCase.TRIM_NEG, CexCase.TRIM_POS, CexCase.EXPAND_NEG]


def test_empty_map_identity(prog):
    assert instrument_check(prog, {}) == prog


def test_two_sites_both_expanded():
    p = lang.normalize(lang.parse(
        "int x = *; int y = 0; if (x*x > 4) { y = 1; } if (x*x*x < 0) { y = 2; }"))
    checked = instrument_check(p, {"L1": (C.TRUE, C.TRUE), "L2": (C.TRUE, C.TRUE)})
    errors = [s for s in lang.iter_stmts(checked.body) if isinstance(s, ErrorStmt)]
    assert sorted({e.loc for e in errors}) == ["L1", "L2"] and len(errors) == 8
    assert [l for l, _ in lang.condition_sites(checked)] == ["L1", "L2"]


def test_unknown_location(prog):
    with pytest.raises(KeyError):
        instrument_check(prog, {"L7": FIRST})


def test_first_guess_expand_neg(prog):
    v = validate(prog, {"L1": FIRST}, scope_k())
    assert isinstance(v, Counterexample) and v.case is CexCase.EXPAND_NEG
    s = v.error_state
    assert (s["y"], s["z"], s["c"], s["p"]) == (1, 6, 0, 2) and s["k"] <= -2
    assert replay(prog, {"L1": FIRST}, v)
    assert oracle.check_counterexample(prog, {"L1": FIRST}, v) == []


def test_second_guess_safe(prog):
    v = validate(prog, {"L1": SECOND}, scope_k())
    assert isinstance(v, Safe) and v.runs == 21


def test_true_true_tag_follows_branch_order(prog):
    # k = 0 first: the guard holds at the first visit, so TrimNeg is hit first
    v = validate(prog, {"L1": (C.TRUE, C.TRUE)}, scope_k(0, 10))
    assert v.case is CexCase.TRIM_NEG
    assert oracle.bev(lang.site_condition(prog, "L1"), v.error_state)
    # k = -10 first: the guard fails at the first visit
    v = validate(prog, {"L1": (C.TRUE, C.TRUE)}, scope_k())
    assert v.case is CexCase.TRIM_POS


def test_random_mode_deterministic(prog):
    sc = scope_k(-50, 50, mode=Mode.RANDOM, runs=30, seed=4)
    a = validate(prog, {"L1": FIRST}, sc)
    b = validate(prog, {"L1": FIRST}, sc)
    assert a == b and isinstance(a, Counterexample)


def test_budget_exceeded_is_explicit(prog):
    with pytest.raises(BudgetExceeded):
        validate(prog, {"L1": SECOND}, scope_k(-50, 50, budget=10))


def test_classify_follows_cascade():
    assert classify(True, True, True) is CexCase.TRIM_NEG
    assert classify(True, False, True) is CexCase.EXPAND_POS
    assert classify(False, True, False) is CexCase.TRIM_POS
    assert classify(False, False, False) is CexCase.EXPAND_NEG
    assert classify(True, True, False) is None and classify(False, False, True) is None


def test_counterexample_paths_list_sites(prog):
    m = {"L1": (C.parse_blia("c <= 1"), C.parse_blia("c >= 2"))}
    v = validate(prog, m, scope_k(3, 3))
    assert v.case is CexCase.EXPAND_POS and v.error_state["c"] == 2
    assert v.path == (("L1", True), ("L1", True))
    assert oracle.check_counterexample(prog, m, v) == []


def test_describe(prog):
    v = validate(prog, {"L1": FIRST}, scope_k())
    assert v.describe().startswith("ExpandNeg at L1; inputs: k=-10")


# ------------------------------------------------------------------- SMT


def test_smt_straight_line_structure():
    p = lang.normalize(lang.parse("int x = *; int p = 2; if (8 == x*x*x) { p = 1; } else { p = 0; }"))
    scripts = export_smtlib(p, {"L1": (C.parse_blia("x == 2"), C.parse_blia("x != 2"))})
    assert sorted(scripts) == sorted(("L1", c.value) for c in CASCADE)
    for text in scripts.values():
        assert text.count("(assert ") == 1
        assert "(set-logic QF_NIA)" in text and text.rstrip().endswith("(exit)")


def test_smt_deterministic(prog):
    a = export_smtlib(prog, {"L1": SECOND}, unroll=8)
    b = export_smtlib(prog, {"L1": SECOND}, unroll=8)
    assert a == b


def _z3_check(text):
    z3 = pytest.importorskip("z3")
    s = z3.Solver()
    s.add(z3.parse_smt2_string(text))
    r = s.check()
    return r, (s.model() if r == z3.sat else None), z3


def test_smt_second_guess_unsat(prog):
    box = InputBox.uniform(["k"], -10, 10)
    scripts = export_smtlib(prog, {"L1": SECOND}, unroll=8, box=box)
    for key, text in scripts.items():
        r, _, z3 = _z3_check(text)
        assert r == z3.unsat, key
    # the exhaustive checker agrees on the matching scope
    assert isinstance(validate(prog, {"L1": SECOND}, scope_k(loop_bound=8)), Safe)


def test_smt_first_guess_expand_neg_sat(prog):
    box = InputBox.uniform(["k"], -10, 10)
    scripts = export_smtlib(prog, {"L1": FIRST}, unroll=8, box=box)
    r, model, z3 = _z3_check(scripts[("L1", "ExpandNeg")])
    assert r == z3.sat
    k = model.eval(z3.Int("k@0")).as_long()
    assert k <= -2
    # every other case agrees with exhaustive search over the box
    for case in CASCADE:
        r, model, _ = _z3_check(scripts[("L1", case.value)])
        found = False
        for kk in range(-10, 11):
            out, _, _, halted = oracle.run_full(instrument_check(prog, {"L1": FIRST}), {"k": kk}, 8)
            found |= halted == (case.value, "L1")
        assert (r == z3.sat) == found, case
