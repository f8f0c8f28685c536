import pytest

import oracle
from conftest import corpus_program, refined
from drnla import constraints as C
from drnla import lang
from drnla.interp import InputBox, diff_test
from drnla.polylib import LinAtom
from drnla.refine import (
    Direction, RefineConfig, Status, amend, dual_refine, expand_core, generalize_cex, get_models,
    hull_or, initial_guess, refine_program, rewrite,
)
from drnla.validate import CexCase, validate

FIRST = (C.parse_blia("0 >= c - k"), C.parse_blia("0 == c - k - 1"))
NONNEG = RefineConfig(sample_range=(0, 30))


@pytest.fixture(scope="module")
def prog(cohencu5):
    return lang.normalize(cohencu5)


@pytest.fixture(scope="module")
def first_cex(prog):
    return validate(prog, {"L1": FIRST}, NONNEG.scope(prog))


def test_initial_guess_nonnegative_box(prog):
    pos, neg, flags = initial_guess(prog, "L1", NONNEG)
    assert (pos, neg, flags) == (*FIRST, ())


def test_initial_guess_full_box_already_separates(prog):
    pos, neg, _ = initial_guess(prog, "L1", RefineConfig())
    assert pos == C.parse_blia("c <= k") and neg == C.parse_blia("k - c <= -1")


def test_initial_guess_empty_positive_side():
    p = lang.normalize(lang.parse("int x = *; int p = 0; if (x*x < 0) { p = 1; }"))
    pos, neg, flags = initial_guess(p, "L1", RefineConfig(sample_runs=20))
    assert pos == C.FALSE and flags == ("empty-pos",) and neg != C.FALSE


def test_first_cex_is_expand_neg(first_cex):
    assert first_cex.case is CexCase.EXPAND_NEG
    assert first_cex.error_state == {"y": 1, "z": 6, "c": 0, "p": 2, "k": -50}


def test_get_models_singleton(prog, first_cex):
    s = get_models(prog, first_cex, {"L1": FIRST}, RefineConfig(models_per_cex=1))
    assert s.states == (first_cex.error_state,)


def test_get_models_family(prog, first_cex):
    s = get_models(prog, first_cex, {"L1": FIRST}, NONNEG)
    assert s.states[0] == first_cex.error_state
    assert sorted(st["k"] for st in s.states) == list(range(-50, -1))
    assert {(st["y"], st["z"], st["c"], st["p"]) for st in s.states} == {(1, 6, 0, 2)}


def test_get_models_respects_limit(prog, first_cex):
    s = get_models(prog, first_cex, {"L1": FIRST}, RefineConfig(models_per_cex=5))
    assert len(s.states) == 5
    for st in s.states:
        assert not oracle.bev(lang.site_condition(prog, "L1"), st)
        assert not C.eval_blia(FIRST[1], st)


def test_generalize_expand_uses_core(prog, first_cex):
    g = generalize_cex(FIRST[1], first_cex, Direction.EXPAND, prog, {"L1": FIRST}, NONNEG)
    assert g == C.parse_blia("c == 0 && k <= -2")


def test_generalize_trim_keeps_whole_conjunction(prog, first_cex):
    g = generalize_cex(FIRST[1], first_cex, Direction.TRIM, prog, {"L1": FIRST}, NONNEG)
    atoms = C.conj_atoms(g)
    assert atoms is not None and len(atoms) > 2
    assert all(a.holds(first_cex.error_state) for a in atoms)


def test_expand_core_disjunctive():
    side = C.parse_blia("x <= 0 || x >= 10")
    learned = [LinAtom.le({"x": -1}, 4), LinAtom.le({"x": 1}, -6), LinAtom.eq({"y": 1})]  # 4 <= x <= 6
    assert expand_core(side, learned) == learned[:2]
    assert expand_core(C.parse_blia("x <= 5"), learned) is None


def test_hull_or_running_example():
    g = C.parse_blia("c == 0 && k <= -2")
    assert hull_or(FIRST[1], g, {"c", "k"}) == C.parse_blia("k - c <= -1")


def test_hull_or_same_operand():
    b = C.parse_blia("x <= 1 && y >= 0")
    assert hull_or(b, b, {"x", "y"}) == b


def test_hull_or_non_conjunctive_is_disjunction():
    b = C.parse_blia("x <= 1 || x >= 5")
    h = hull_or(b, C.parse_blia("x == 3"), {"x"})
    assert isinstance(h, C.BOr) and len(C.disjuncts(h)) == 3


def test_hull_or_unsat_operand():
    b = C.parse_blia("x <= 1")
    assert hull_or(C.parse_blia("x <= 0 && x >= 1"), b, {"x"}) == b


def test_amend_trim_excludes_condition():
    side = C.parse_blia("x <= 10")
    new = amend(side, C.parse_blia("x == 3"), Direction.TRIM, {"x"})
    for x in range(-15, 16):
        assert C.eval_blia(new, {"x": x}) == (x <= 10 and x != 3)


def test_dual_refine_cohencu5(prog):
    r = dual_refine(prog, "L1", NONNEG)
    assert r.status is Status.EXACT and r.iterations == 2
    assert r.stages == ("v", "en", "v")
    assert (r.b_pos, r.b_neg) == (C.parse_blia("c <= k"), C.parse_blia("k - c <= -1"))
    [step] = r.history
    assert step.case is CexCase.EXPAND_NEG and step.before == FIRST[1] and step.after == r.b_neg


def test_dual_refine_zero_iterations(prog):
    r = dual_refine(prog, "L1", RefineConfig(max_iters=0))
    assert r.status is Status.PARTIAL and r.stages == () and r.iterations == 0


def test_dual_refine_if_cubic():
    r = refined("if-cubic.imp").results[0]
    assert r.exact and r.b_pos == C.parse_blia("x == 2")


def test_history_is_monotone():
    """Each trim shrinks and each expand grows its side, checked on a grid."""
    for name in ("if-cubic.imp", "slicing.imp", "while.imp"):
        r = refined(name).results[0]
        for step in r.history:
            names = sorted(C.variables(step.before) | C.variables(step.after))[:2]
            grid = list(_grid(names, step.cex.error_state, -6, 6))
            b = [C.eval_blia(step.before, s) for s in grid]
            a = [C.eval_blia(step.after, s) for s in grid]
            if step.case.expands:
                assert all(y or not x for x, y in zip(b, a)), name
                assert C.eval_blia(step.after, step.cex.error_state)
            else:
                assert all(x or not y for x, y in zip(b, a)), name
                assert not C.eval_blia(step.after, step.cex.error_state)


def _grid(names, base, lo, hi):
    import itertools

    for vals in itertools.product(range(lo, hi + 1), repeat=len(names)):
        s = dict(base)
        s.update(zip(names, vals))
        yield s


def test_rewrite_replaces_guard(cohencu5):
    pr = refine_program(cohencu5, NONNEG)
    assert pr.all_exact
    [site] = [s for s in lang.iter_stmts(pr.rewritten.body) if isinstance(s, lang.If) and s.loc == "L1"]
    assert site.cond == C.to_boolexpr(C.parse_blia("c <= k"))
    assert lang.find_nla_sites(pr.rewritten) == []


def test_rewrite_empty_results_identity(prog):
    assert rewrite(prog, []) == prog


def test_rewrite_rejects_partial(prog):
    r = dual_refine(prog, "L1", RefineConfig(max_iters=0))
    with pytest.raises(ValueError):
        rewrite(prog, [r])
    assert rewrite(prog, [r], allow_partial=True) != prog


def test_slicing_false_guard_is_equivalent():
    pr = refined("slicing.imp")
    [r] = pr.results
    assert r.exact and r.b_pos == C.FALSE and "empty-pos" in r.flags
    # k is 0 and c starts at 0, so the loop never runs, exactly like c <= k - 1
    box = InputBox.for_program(pr.program, -8, 8)
    cond = lang.parse_bexpr("c <= k - 1", pr.program.variables)
    ref = lang.map_sites(pr.program, lambda s: lang.If(cond, s.then, s.orelse, s.loc) if s.loc == "L1" else s)
    rep = diff_test(ref, pr.rewritten, 0, box, 0, exhaustive=True)
    assert rep.mismatches == 0


def test_refine_program_unknown_site(cohencu5):
    with pytest.raises(KeyError):
        refine_program(cohencu5, sites=["L9"])


def test_refine_program_linear_site_by_request():
    p = lang.parse("int x = *; int p = 0; if (x <= 3) { p = 1; }")
    pr = refine_program(p, RefineConfig(scope_range=(-10, 10)), sites=["L1"])
    assert pr.all_exact and pr.results[0].b_pos == C.parse_blia("x <= 3")


def test_deterministic(cohencu5):
    cfg = RefineConfig(seed=5, sample_range=(0, 30))
    assert refine_program(cohencu5, cfg) == refine_program(cohencu5, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        RefineConfig(max_iters=-1)
    with pytest.raises(ValueError):
        RefineConfig(models_per_cex=0)


def test_exact_results_agree_per_visit():
    """For Exact results the pair agrees with the guard at sampled visits."""
    for name in ("cohencu5.imp", "ps2.imp", "sqrt1.imp"):
        pr = refined(name)
        [r] = pr.results
        cond = lang.site_condition(pr.program, r.loc)
        for k in range(-20, 21):
            for s in oracle.site_visits(pr.program, {n: k for n in pr.program.inputs}, r.loc):
                b = oracle.bev(cond, s)
                assert C.eval_blia(r.b_pos, s) == b and C.eval_blia(r.b_neg, s) == (not b)


def test_corpus_program_has_nla_site():
    assert lang.find_nla_sites(lang.normalize(corpus_program("ps2.imp")))
