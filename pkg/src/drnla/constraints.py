"""Boolean combinations of linear integer atoms.

Atoms are kept in an integer-tightened form: ``t <= 0`` or ``t = 0`` with
coprime integer variable coefficients, so ``x < 3`` is stored as
``x - 2 <= 0``.  The negation of ``t <= 0`` is then ``-t + 1 <= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, gcd
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import lang
from .polylib import FALSE_ATOM, TRUE_ATOM, LinAtom, LinTerm, Rel, implies, is_sat


class NotLinear(ValueError):
    pass


@dataclass(frozen=True)
class BTrue:
    pass


@dataclass(frozen=True)
class BFalse:
    pass


@dataclass(frozen=True)
class BAtom:
    atom: LinAtom


@dataclass(frozen=True)
class BNot:
    arg: "Blia"


@dataclass(frozen=True)
class BAnd:
    args: tuple["Blia", ...]


@dataclass(frozen=True)
class BOr:
    args: tuple["Blia", ...]


Blia = Union[BTrue, BFalse, BAtom, BNot, BAnd, BOr]

TRUE = BTrue()
FALSE = BFalse()


# ------------------------------------------------------------- construction


def tighten(atom: LinAtom) -> Union[LinAtom, bool]:
    """Integer-equivalent atom using only ``=`` and ``<=``.

    Returns a bool when the atom is constant over the integers.  For
    non-integer coefficients the atom is returned unchanged.
    """
    term, rel = atom.term, atom.rel
    if term.is_constant():
        return atom == TRUE_ATOM or LinAtom.make(term, rel) == TRUE_ATOM
    if any(c.denominator != 1 for _, c in term.coeffs):
        scaled = term.integer_scaled()
        if any(c.denominator != 1 for _, c in scaled.coeffs):  # pragma: no cover
            return LinAtom.make(term, rel)
        term = scaled
    g = 0
    for _, c in term.coeffs:
        g = gcd(g, int(c))
    coeffs = {n: c / g for n, c in term.coeffs}
    const = term.const / g
    if rel is Rel.EQ:
        if const.denominator != 1:
            return False
        return LinAtom.make(LinTerm.of(coeffs, const), Rel.EQ)
    if rel is Rel.LT:
        # a.x + const < 0  <=>  a.x + const' <= 0 with const' = floor(const) + 1
        const = Fraction(int(const // 1) + 1)
    else:
        const = Fraction(ceil(const))
    return LinAtom(LinTerm.of(coeffs, const), Rel.LE)


def atom(a: LinAtom) -> Blia:
    t = tighten(a)
    if t is True:
        return TRUE
    if t is False:
        return FALSE
    return BAtom(t)


def le(coeffs: Mapping[str, int], const: int = 0) -> Blia:
    """``sum coeffs + const <= 0``."""
    return atom(LinAtom.make(LinTerm.of(coeffs, const), Rel.LE))


def lt(coeffs: Mapping[str, int], const: int = 0) -> Blia:
    return atom(LinAtom.make(LinTerm.of(coeffs, const), Rel.LT))


def eq(coeffs: Mapping[str, int], const: int = 0) -> Blia:
    return atom(LinAtom.make(LinTerm.of(coeffs, const), Rel.EQ))


def conj(*args: Blia) -> Blia:
    out: list[Blia] = []
    for a in args:
        parts = a.args if isinstance(a, BAnd) else (a,)
        for p in parts:
            if isinstance(p, BFalse):
                return FALSE
            if isinstance(p, BTrue) or p in out:
                continue
            out.append(p)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return BAnd(tuple(out))


def disj(*args: Blia) -> Blia:
    out: list[Blia] = []
    for a in args:
        parts = a.args if isinstance(a, BOr) else (a,)
        for p in parts:
            if isinstance(p, BTrue):
                return TRUE
            if isinstance(p, BFalse) or p in out:
                continue
            out.append(p)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return BOr(tuple(out))


def conj_of_atoms(atoms: Iterable[LinAtom]) -> Blia:
    return conj(*(atom(a) for a in atoms))


def negate(b: Blia) -> Blia:
    return BNot(b)


# --------------------------------------------------------------- semantics


def eval_blia(b: Blia, state: Mapping[str, int]) -> bool:
    if isinstance(b, BAtom):
        missing = b.atom.vars() - state.keys()
        if missing:
            raise KeyError(f"state lacks {sorted(missing)}")
        return b.atom.holds_int(state)
    if isinstance(b, BTrue):
        return True
    if isinstance(b, BFalse):
        return False
    if isinstance(b, BNot):
        return not eval_blia(b.arg, state)
    if isinstance(b, BAnd):
        return all(eval_blia(a, state) for a in b.args)
    if isinstance(b, BOr):
        return any(eval_blia(a, state) for a in b.args)
    raise TypeError(b)


def variables(b: Blia) -> frozenset[str]:
    if isinstance(b, BAtom):
        return b.atom.vars()
    if isinstance(b, BNot):
        return variables(b.arg)
    if isinstance(b, (BAnd, BOr)):
        out: frozenset[str] = frozenset()
        for a in b.args:
            out |= variables(a)
        return out
    return frozenset()


def atoms_of(b: Blia) -> list[LinAtom]:
    if isinstance(b, BAtom):
        return [b.atom]
    if isinstance(b, BNot):
        return atoms_of(b.arg)
    if isinstance(b, (BAnd, BOr)):
        return [x for a in b.args for x in atoms_of(a)]
    return []


def atom_count(b: Blia) -> int:
    return len(atoms_of(b))


def _negate_atom(a: LinAtom) -> Blia:
    if a.rel is Rel.EQ:
        # t != 0  <=>  t < 0  or  -t < 0
        return disj(atom(LinAtom.make(a.term, Rel.LT)), atom(LinAtom.make(-a.term, Rel.LT)))
    if a.rel is Rel.LE:
        return atom(LinAtom.make(-a.term, Rel.LT))
    return atom(LinAtom.make(-a.term, Rel.LE))


def nnf(b: Blia, negated: bool = False) -> Blia:
    """Negation-free equivalent; negated atoms become complementary atoms."""
    if isinstance(b, BTrue):
        return FALSE if negated else TRUE
    if isinstance(b, BFalse):
        return TRUE if negated else FALSE
    if isinstance(b, BAtom):
        return _negate_atom(b.atom) if negated else b
    if isinstance(b, BNot):
        return nnf(b.arg, not negated)
    parts = [nnf(a, negated) for a in b.args]
    if isinstance(b, BAnd):
        return disj(*parts) if negated else conj(*parts)
    return conj(*parts) if negated else disj(*parts)


def conj_atoms(b: Blia) -> Optional[list[LinAtom]]:
    """Atom list when ``b`` is a pure conjunction of atoms, else ``None``."""
    b = nnf(b)
    if isinstance(b, BTrue):
        return []
    if isinstance(b, BFalse):
        return [FALSE_ATOM]
    if isinstance(b, BAtom):
        return [b.atom]
    if isinstance(b, BAnd) and all(isinstance(a, BAtom) for a in b.args):
        return [a.atom for a in b.args]
    return None


def disjuncts(b: Blia) -> list[Blia]:
    b = nnf(b)
    if isinstance(b, BOr):
        return list(b.args)
    if isinstance(b, BFalse):
        return []
    return [b]


# ------------------------------------------------------------ simplification


def simplify(b: Blia, context: Sequence[LinAtom] = ()) -> Blia:
    """Rational-sound simplification after conversion to NNF.

    Within conjunctions duplicate and entailed atoms are dropped; disjuncts
    inconsistent with the surrounding context are dropped.  No new atoms
    are introduced.
    """
    current = nnf(b)
    while True:
        nxt = _simp(current, list(context))
        if nxt == current:
            break
        current = nxt
    # negated equalities split in two under NNF; never return something larger
    return b if atom_count(current) > atom_count(b) else current


def _simp(b: Blia, ctx: list[LinAtom]) -> Blia:
    if isinstance(b, (BTrue, BFalse)):
        return b
    if isinstance(b, BAtom):
        if not is_sat(ctx + [b.atom]):
            return FALSE
        return b
    if isinstance(b, BOr):
        parts = [_simp(a, ctx) for a in b.args]
        return disj(*parts)
    # conjunction: atoms first, then compound children under the atom context
    atoms = [a.atom for a in b.args if isinstance(a, BAtom)]
    others = [a for a in b.args if not isinstance(a, BAtom)]
    if not is_sat(ctx + atoms):
        return FALSE
    kept = _drop_entailed(atoms, ctx)
    local = ctx + kept
    children = [_simp(o, local) for o in others]
    return conj(*(BAtom(a) for a in kept), *children)


def _drop_entailed(atoms: list[LinAtom], ctx: list[LinAtom]) -> list[LinAtom]:
    kept: list[LinAtom] = []
    for a in atoms:
        if a not in kept:
            kept.append(a)
    i = 0
    while i < len(kept):
        others = ctx + kept[:i] + kept[i + 1:]
        if _entails(others, kept[i]):
            del kept[i]
        else:
            i += 1
    return kept


def _entails(atoms: list[LinAtom], a: LinAtom) -> bool:
    """Entailment via the integer complement of ``a`` (rational check)."""
    neg = _negate_atom(a)
    for d in disjuncts(neg):
        if isinstance(d, BTrue):
            return False
        if not is_sat(atoms + [d.atom]):
            continue
        return False
    return True


# -------------------------------------------------------------------- text


def _lin_text(term: LinTerm) -> str:
    parts = []
    for i, (name, c) in enumerate(term.coeffs):
        c = int(c)
        mag = abs(c)
        body = name if mag == 1 else f"{mag}*{name}"
        if i == 0:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    return " ".join(parts)


def atom_text(a: LinAtom) -> str:
    """``(K >= (lin))`` or ``(K == (lin))`` with ``K`` the negated constant."""
    k = -a.term.const
    ks = str(int(k)) if k.denominator == 1 else f"{k.numerator}/{k.denominator}"
    op = {Rel.LE: ">=", Rel.EQ: "==", Rel.LT: ">"}[a.rel]
    return f"({ks} {op} ({_lin_text(a.term)}))"


def to_text(b: Blia) -> str:
    if isinstance(b, BTrue):
        return "true"
    if isinstance(b, BFalse):
        return "false"
    if isinstance(b, BAtom):
        return atom_text(b.atom)
    if isinstance(b, BNot):
        return f"!({to_text(b.arg)})"
    sep = " && " if isinstance(b, BAnd) else " || "
    return "(" + sep.join(to_text(a) for a in b.args) + ")"


def _linearize(e) -> LinTerm:
    poly = lang.to_poly(e)
    coeffs = {}
    const = 0
    for mono, c in poly.items():
        if len(mono) == 0:
            const = c
        elif len(mono) == 1:
            coeffs[mono[0]] = c
        else:
            raise NotLinear(f"nonlinear term {'*'.join(mono)}")
    return LinTerm.of(coeffs, const)


def from_boolexpr(b) -> Blia:
    """Convert a linear ``lang`` condition."""
    if isinstance(b, lang.BoolConst):
        return TRUE if b.value else FALSE
    if isinstance(b, lang.Not):
        return BNot(from_boolexpr(b.operand))
    if isinstance(b, lang.And):
        return conj(from_boolexpr(b.left), from_boolexpr(b.right))
    if isinstance(b, lang.Or):
        return disj(from_boolexpr(b.left), from_boolexpr(b.right))
    if isinstance(b, lang.Compare):
        d = _linearize(b.left) - _linearize(b.right)  # left - right
        op = b.op
        if op == "<=":
            return atom(LinAtom.make(d, Rel.LE))
        if op == "<":
            return atom(LinAtom.make(d, Rel.LT))
        if op == ">=":
            return atom(LinAtom.make(-d, Rel.LE))
        if op == ">":
            return atom(LinAtom.make(-d, Rel.LT))
        if op == "==":
            return atom(LinAtom.make(d, Rel.EQ))
        if op == "!=":
            return BNot(atom(LinAtom.make(d, Rel.EQ)))
    raise TypeError(b)


def parse_blia(text: str) -> Blia:
    return from_boolexpr(lang.parse_bexpr(text))


def _lin_expr(term: LinTerm):
    expr = None
    for name, c in term.coeffs:
        c = int(c)
        mag = abs(c)
        piece = lang.Var(name) if mag == 1 else lang.BinOp("*", lang.Const(mag), lang.Var(name))
        if expr is None:
            if c > 0:
                expr = piece
            elif mag == 1:
                expr = lang.Neg(piece)
            else:
                expr = lang.BinOp("*", lang.Const(c), lang.Var(name))
        else:
            expr = lang.BinOp("+" if c > 0 else "-", expr, piece)
    return expr if expr is not None else lang.Const(0)


def to_boolexpr(b: Blia):
    """Condition for the rewritten program, shaped like the text form."""
    if isinstance(b, BTrue):
        return lang.TRUE
    if isinstance(b, BFalse):
        return lang.FALSE
    if isinstance(b, BAtom):
        a = b.atom
        k = -a.term.const
        if k.denominator != 1:
            raise NotLinear("non-integer constant in atom")
        op = {Rel.LE: ">=", Rel.EQ: "==", Rel.LT: ">"}[a.rel]
        return lang.Compare(op, lang.Const(int(k)), _lin_expr(a.term))
    if isinstance(b, BNot):
        return lang.Not(to_boolexpr(b.arg))
    parts = [to_boolexpr(a) for a in b.args]
    node = parts[0]
    for p in parts[1:]:
        node = lang.And(node, p) if isinstance(b, BAnd) else lang.Or(node, p)
    return node
