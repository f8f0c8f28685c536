import itertools
import random

import pytest

import gen
from drnla import constraints as C
from drnla.polylib import LinAtom, Rel


def pts(names=("x", "y", "z"), r=5):
    for v in itertools.product(range(-r, r + 1), repeat=len(names)):
        yield dict(zip(names, v))


def cmp_text(text):
    return C.parse_blia(text)


def test_eval_examples():
    b = cmp_text("0 >= c - k")
    assert C.eval_blia(b, {"c": 0, "k": -2}) is False
    assert C.eval_blia(cmp_text("0 == c - k - 1"), {"c": 0, "k": -1}) is True
    assert C.eval_blia(C.TRUE, {}) is True


def test_eval_missing_variable():
    with pytest.raises(KeyError):
        C.eval_blia(cmp_text("x <= 1"), {})


def test_nnf_examples():
    x3 = cmp_text("x < 3")
    assert C.nnf(C.BNot(C.BNot(x3))) == x3
    ne = C.nnf(C.BNot(cmp_text("x == 0")))
    assert isinstance(ne, C.BOr) and len(ne.args) == 2
    for p in pts(("x",)):
        assert C.eval_blia(ne, p) == (p["x"] != 0)
    a, b = cmp_text("x <= 0"), cmp_text("y == 1")
    n = C.nnf(C.BNot(C.conj(a, b)))
    assert isinstance(n, C.BOr)
    assert not any(isinstance(s, C.BNot) for s in _walk(n))


def _walk(b):
    yield b
    for a in getattr(b, "args", ()):
        yield from _walk(a)
    if isinstance(b, C.BNot):
        yield from _walk(b.arg)


def test_conj_atoms():
    assert len(C.conj_atoms(C.conj(cmp_text("0 >= c - k"), cmp_text("p == 2")))) == 2
    assert C.conj_atoms(C.disj(cmp_text("x <= 0"), cmp_text("y <= 0"))) is None
    nested = C.BAnd((C.BAnd((cmp_text("x <= 0"),)), cmp_text("y == 1")))
    assert len(C.conj_atoms(nested)) == 2


def test_simplify_trims_to_strict_bound():
    b = C.conj(C.BNot(cmp_text("x == 2")), cmp_text("x > 1"))
    s = C.simplify(b)
    assert C.to_text(s) == C.to_text(cmp_text("x > 2"))


def test_simplify_drops_weaker_bound():
    assert C.simplify(C.conj(cmp_text("x <= 3"), cmp_text("x <= 5"))) == cmp_text("x <= 3")


def test_simplify_drops_empty_disjunct():
    b = C.disj(C.conj(cmp_text("x <= 0"), cmp_text("x >= 1")), cmp_text("y == 0"))
    assert C.simplify(b) == cmp_text("y == 0")


def test_simplify_never_grows():
    b = C.BNot(cmp_text("x == 0"))
    assert C.atom_count(C.simplify(b)) <= C.atom_count(b)


def test_tighten_strict_to_nonstrict():
    a = C.atom(LinAtom.lt({"x": 2}, -3))  # 2x < 3  <=>  x <= 1
    assert a == C.atom(LinAtom.le({"x": 1}, -1))
    assert C.atom(LinAtom.eq({"x": 2}, -3)) == C.FALSE


def test_text_forms():
    assert C.to_text(cmp_text("c <= k")) == "(0 >= (c - k))"
    assert C.to_text(cmp_text("k - c <= -1")) == "(-1 >= (-c + k))"
    assert C.to_text(cmp_text("c == k + 1")) == "(1 == (c - k))"
    assert C.to_text(C.conj(cmp_text("x <= 1"), cmp_text("y >= 0"))) == "((1 >= (x)) && (0 >= (-y)))"


@pytest.mark.parametrize("seed", range(30))
def test_text_round_trip(seed):
    b = gen.blia(random.Random(seed), 3)
    text = C.to_text(b)
    back = C.parse_blia(text)
    for p in pts(r=3):
        assert C.eval_blia(back, p) == C.eval_blia(b, p)


def test_to_boolexpr_agrees():
    from drnla import lang
    b = C.disj(cmp_text("3*x - y <= 2"), C.conj(cmp_text("x == y"), C.BNot(cmp_text("z < 0"))))
    e = C.to_boolexpr(b)
    for p in pts(r=3):
        assert C.eval_blia(b, p) == _bev(e, p)
    assert lang.parse_bexpr(lang.pretty_bexpr(e), ["x", "y", "z"]) == e


def _bev(e, p):
    import oracle
    return oracle.bev(e, p)


def test_from_boolexpr_rejects_nonlinear():
    with pytest.raises(C.NotLinear):
        C.parse_blia("x*y <= 1")


@pytest.mark.parametrize("seed", range(40))
def test_semantics_preserved_sample(seed):
    rng = random.Random(seed)
    b = gen.blia(rng)
    n, s = C.nnf(b), C.simplify(b)
    assert C.atom_count(s) <= C.atom_count(b)
    for p in pts(r=3):
        v = C.eval_blia(b, p)
        assert C.eval_blia(n, p) == v and C.eval_blia(s, p) == v
