import random

import pytest

from drnla.learn import EmptySampleSet, SampleSet, learn, learn_equalities, learn_octagons
from drnla.polylib import LinAtom, implies

le, eq = LinAtom.le, LinAtom.eq

# error-site states of the running example's first counterexample family
CEX_ROWS = [dict(y=1, z=6, c=0, k=k, p=2) for k in (-2, -3, -4, -5, -6)]
CEX = SampleSet.of(["y", "z", "c", "k", "p"], CEX_ROWS)


def test_equalities_pin_constant_columns():
    atoms = learn_equalities(CEX)
    for a in (eq({"p": 1}, -2), eq({"c": 1}), eq({"y": 1}, -1), eq({"z": 1}, -6)):
        assert implies(atoms, a)
    assert all(a.holds_int(s) for a in atoms for s in CEX.states)


def test_equalities_diagonal():
    s = SampleSet.of(["x", "y"], [dict(x=0, y=0), dict(x=1, y=1)])
    [a] = learn_equalities(s)
    assert a == eq({"x": 1, "y": -1})


def test_equalities_full_rank():
    s = SampleSet.of(["x", "y"], [dict(x=0, y=0), dict(x=1, y=0), dict(x=0, y=1)])
    assert learn_equalities(s) == []


def test_octagon_bounds():
    s = SampleSet.of(["x"], [dict(x=1), dict(x=2), dict(x=3)])
    assert set(learn_octagons(s)) == {le({"x": -1}, 1), le({"x": 1}, -3)}


def test_octagons_contain_p_plus_k():
    assert le({"p": 1, "k": 1}) in learn_octagons(CEX)


def test_single_sample_octagon_pins_sum():
    s = SampleSet.of(["x", "y"], [dict(x=4, y=1)])
    octs = learn_octagons(s)
    assert le({"x": 1, "y": 1}, -5) in octs and le({"x": -1, "y": -1}, 5) in octs


def test_learn_running_example():
    atoms = learn(CEX)
    for a in (le({"p": 1, "k": 1}), eq({"p": 1}, -2), eq({"c": 1})):
        assert implies(atoms, a)


def test_learn_single_sample_has_no_octagons():
    s = SampleSet.of(["x", "y"], [dict(x=4, y=1)])
    atoms = learn(s)
    assert all(a.rel.value == "=" for a in atoms)


def test_learn_linear_relation_with_range():
    s = SampleSet.of(["x", "c"], [dict(x=2 * c, c=c) for c in range(6)])
    atoms = learn(s)
    assert eq({"x": 1, "c": -2}) in atoms
    assert implies(atoms, le({"c": -1})) and implies(atoms, le({"c": 1}, -5))


def test_empty_sample_set():
    with pytest.raises(EmptySampleSet):
        learn(SampleSet(("x",), ()))


@pytest.mark.parametrize("seed", range(25))
def test_soundness_tightness_determinism(seed):
    rng = random.Random(seed)
    names = ["a", "b", "c"]
    rows = []
    for _ in range(rng.randint(1, 12)):
        a = rng.randint(-9, 9)
        rows.append(dict(a=a, b=rng.choice([a + 1, rng.randint(-9, 9)]), c=3))
    s = SampleSet.of(names, rows)
    out = learn(s)
    assert all(a.holds_int(r) for a in out for r in s.states)
    for a in learn_octagons(s):
        assert any(a.term.eval_int(r) == 0 for r in s.states), "bound attained"
    assert learn(SampleSet.of(names, rows)) == out
