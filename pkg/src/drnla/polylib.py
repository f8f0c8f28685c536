"""Exact rational polyhedra.

Linear terms and atoms over ``Fraction`` coefficients, a bounded integer
search, Fourier-Motzkin projection, a simplex feasibility check with
strict bounds, deletion-based unsat cores and the convex hull of a union.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import ceil, floor, gcd
from typing import Iterable, Mapping, Optional, Sequence

# Atom budget for intermediate Fourier-Motzkin results inside hulls.
FM_ATOM_BUDGET = 512

# Redundancy elimination kicks in once an intermediate set grows past this.
_PRUNE_THRESHOLD = 24


class BudgetExceeded(Exception):
    """A bounded search or enumeration would exceed its configured budget."""


class Rel(Enum):
    EQ = "="
    LE = "<="
    LT = "<"


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


@dataclass(frozen=True)
class LinTerm:
    """``sum(c_i * x_i) + const`` with coefficients sorted by variable name."""

    coeffs: tuple[tuple[str, Fraction], ...] = ()
    const: Fraction = Fraction(0)

    @classmethod
    def of(cls, coeffs: Mapping[str, object] | None = None, const: object = 0) -> "LinTerm":
        items = []
        for name, value in (coeffs or {}).items():
            value = Fraction(value)
            if value:
                items.append((name, value))
        items.sort()
        return cls(tuple(items), Fraction(const))

    @classmethod
    def var(cls, name: str) -> "LinTerm":
        return cls(((name, Fraction(1)),), Fraction(0))

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self.coeffs)

    def coeff(self, name: str) -> Fraction:
        for n, c in self.coeffs:
            if n == name:
                return c
        return Fraction(0)

    def vars(self) -> frozenset[str]:
        return frozenset(n for n, _ in self.coeffs)

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "LinTerm") -> "LinTerm":
        acc = self.as_dict()
        for n, c in other.coeffs:
            acc[n] = acc.get(n, 0) + c
        return LinTerm.of(acc, self.const + other.const)

    def __neg__(self) -> "LinTerm":
        return LinTerm(tuple((n, -c) for n, c in self.coeffs), -self.const)

    def __sub__(self, other: "LinTerm") -> "LinTerm":
        return self + (-other)

    def scale(self, k: object) -> "LinTerm":
        k = Fraction(k)
        if not k:
            return LinTerm()
        return LinTerm(tuple((n, c * k) for n, c in self.coeffs), self.const * k)

    def shift(self, k: object) -> "LinTerm":
        return LinTerm(self.coeffs, self.const + Fraction(k))

    def evaluate(self, point: Mapping[str, object]) -> Fraction:
        total = Fraction(self.const)
        for n, c in self.coeffs:
            total += c * point[n]
        return total

    def eval_int(self, point: Mapping[str, int]) -> int:
        """Evaluate an integer-coefficient term without building Fractions."""
        total = self.const.numerator
        for n, c in self.coeffs:
            total += c.numerator * point[n]
        return total

    def is_integral(self) -> bool:
        return self.const.denominator == 1 and all(c.denominator == 1 for _, c in self.coeffs)

    def substitute(self, name: str, term: "LinTerm") -> "LinTerm":
        c = self.coeff(name)
        if not c:
            return self
        rest = LinTerm(tuple((n, v) for n, v in self.coeffs if n != name), self.const)
        return rest + term.scale(c)

    def integer_scaled(self) -> "LinTerm":
        """Positive multiple with coprime integer coefficients (constant included)."""
        values = [c for _, c in self.coeffs] + [self.const]
        den = 1
        for v in values:
            den = _lcm(den, v.denominator)
        nums = [int(v * den) for v in values]
        g = 0
        for v in nums:
            g = gcd(g, v)
        if g == 0:
            return LinTerm()
        return self.scale(Fraction(den, g))

    def text(self) -> str:
        parts = []
        for n, c in self.coeffs:
            parts.append(f"{c}*{n}")
        parts.append(str(self.const))
        return " + ".join(parts)


@dataclass(frozen=True)
class LinAtom:
    """``term REL 0``."""

    term: LinTerm
    rel: Rel

    @classmethod
    def make(cls, term: LinTerm, rel: Rel) -> "LinAtom":
        """Canonical atom: coprime integer scaling, equalities lead positive."""
        if term.is_constant():
            holds = _rel_holds(term.const, rel)
            return TRUE_ATOM if holds else FALSE_ATOM
        term = term.integer_scaled()
        if rel is Rel.EQ and term.coeffs[0][1] < 0:
            term = -term
        return cls(term, rel)

    @classmethod
    def le(cls, coeffs: Mapping[str, object], const: object = 0) -> "LinAtom":
        return cls.make(LinTerm.of(coeffs, const), Rel.LE)

    @classmethod
    def lt(cls, coeffs: Mapping[str, object], const: object = 0) -> "LinAtom":
        return cls.make(LinTerm.of(coeffs, const), Rel.LT)

    @classmethod
    def eq(cls, coeffs: Mapping[str, object], const: object = 0) -> "LinAtom":
        return cls.make(LinTerm.of(coeffs, const), Rel.EQ)

    def vars(self) -> frozenset[str]:
        return self.term.vars()

    def is_constant(self) -> bool:
        return self.term.is_constant()

    def holds(self, point: Mapping[str, object]) -> bool:
        return _rel_holds(self.term.evaluate(point), self.rel)

    def holds_int(self, point: Mapping[str, int]) -> bool:
        if self.term.is_integral():
            v = self.term.eval_int(point)
            if self.rel is Rel.LE:
                return v <= 0
            if self.rel is Rel.EQ:
                return v == 0
            return v < 0
        return self.holds(point)

    def negation(self) -> list["LinAtom"]:
        """Rational complement as a disjunction of atoms."""
        if self.rel is Rel.EQ:
            return [LinAtom.make(self.term, Rel.LT), LinAtom.make(-self.term, Rel.LT)]
        if self.rel is Rel.LE:
            return [LinAtom.make(-self.term, Rel.LT)]
        return [LinAtom.make(-self.term, Rel.LE)]

    def sort_key(self) -> tuple:
        return (self.term.coeffs, self.rel.value, self.term.const)

    def text(self) -> str:
        return f"{self.term.text()} {self.rel.value} 0"

    def __str__(self) -> str:
        return self.text()


def _rel_holds(value: Fraction, rel: Rel) -> bool:
    if rel is Rel.EQ:
        return value == 0
    if rel is Rel.LE:
        return value <= 0
    return value < 0


TRUE_ATOM = LinAtom(LinTerm(), Rel.LE)
FALSE_ATOM = LinAtom(LinTerm((), Fraction(1)), Rel.LE)


@dataclass(frozen=True)
class Polyhedron:
    """Conjunction of atoms in canonical order."""

    atoms: tuple[LinAtom, ...] = ()

    @classmethod
    def of(cls, atoms: Iterable[LinAtom]) -> "Polyhedron":
        seen = set()
        kept = []
        for a in atoms:
            a = LinAtom.make(a.term, a.rel)
            if a == TRUE_ATOM or a in seen:
                continue
            if a == FALSE_ATOM:
                return cls((FALSE_ATOM,))
            seen.add(a)
            kept.append(a)
        kept.sort(key=LinAtom.sort_key)
        return cls(tuple(kept))

    def vars(self) -> frozenset[str]:
        out: set[str] = set()
        for a in self.atoms:
            out |= a.vars()
        return frozenset(out)

    def is_trivially_empty(self) -> bool:
        return FALSE_ATOM in self.atoms

    def contains(self, point: Mapping[str, object]) -> bool:
        return all(a.holds(point) for a in self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)


# --------------------------------------------------------------------------
# Feasibility: general simplex over delta-rationals (value + k*delta).


@dataclass
class SatResult:
    sat: bool
    witness: Optional[dict[str, Fraction]] = None

    def __bool__(self) -> bool:
        return self.sat


def _direction(term: LinTerm) -> tuple[tuple[tuple[str, Fraction], ...], Fraction, Fraction]:
    """Split ``term`` into ``scale * (d . x) + const`` with ``d`` leading +1."""
    lead = term.coeffs[0][1]
    d = tuple((n, c / lead) for n, c in term.coeffs)
    return d, lead, term.const


def sat_rat(atoms: Iterable[LinAtom] | Polyhedron) -> SatResult:
    atoms = list(atoms)
    lower: dict[tuple, tuple[Fraction, Fraction]] = {}
    upper: dict[tuple, tuple[Fraction, Fraction]] = {}
    for a in atoms:
        if a.term.is_constant():
            if not _rel_holds(a.term.const, a.rel):
                return SatResult(False)
            continue
        d, lead, const = _direction(a.term)
        # lead * s + const REL 0  with  s = d . x
        bound = -const / lead
        strict = Fraction(1) if a.rel is Rel.LT else Fraction(0)
        if a.rel is Rel.EQ:
            _tighten_lower(lower, d, (bound, Fraction(0)))
            _tighten_upper(upper, d, (bound, Fraction(0)))
        elif lead > 0:
            _tighten_upper(upper, d, (bound, -strict))
        else:
            _tighten_lower(lower, d, (bound, strict))
    dirs = sorted(set(lower) | set(upper))
    for d in dirs:
        if d in lower and d in upper and lower[d] > upper[d]:
            return SatResult(False)
    names = sorted({n for d in dirs for n, _ in d})
    solver = _Simplex(names, dirs, lower, upper)
    if not solver.check():
        return SatResult(False)
    return SatResult(True, solver.witness())


def _tighten_lower(table, key, value):
    if key not in table or value > table[key]:
        table[key] = value


def _tighten_upper(table, key, value):
    if key not in table or value < table[key]:
        table[key] = value


class _Simplex:
    """Feasibility of ``lo_i <= d_i . x <= hi_i`` in the style of SMT solvers."""

    def __init__(self, names, dirs, lower, upper):
        n = len(names)
        self.names = names
        self.nvars = n + len(dirs)
        index = {name: i for i, name in enumerate(names)}
        zero = (Fraction(0), Fraction(0))
        self.value = [zero] * self.nvars
        self.lo: list = [None] * self.nvars
        self.hi: list = [None] * self.nvars
        self.rows: dict[int, dict[int, Fraction]] = {}
        for k, d in enumerate(dirs):
            s = n + k
            self.rows[s] = {index[name]: c for name, c in d}
            self.lo[s] = lower.get(d)
            self.hi[s] = upper.get(d)

    def _violated(self, v):
        lo, hi, val = self.lo[v], self.hi[v], self.value[v]
        if lo is not None and val < lo:
            return lo
        if hi is not None and val > hi:
            return hi
        return None

    def check(self) -> bool:
        while True:
            basic = None
            for b in sorted(self.rows):
                target = self._violated(b)
                if target is not None:
                    basic = b
                    break
            if basic is None:
                return True
            row = self.rows[basic]
            increase = target > self.value[basic]
            entering = None
            for j in sorted(row):
                a = row[j]
                up_ok = self.hi[j] is None or self.value[j] < self.hi[j]
                down_ok = self.lo[j] is None or self.value[j] > self.lo[j]
                if increase and ((a > 0 and up_ok) or (a < 0 and down_ok)):
                    entering = j
                    break
                if not increase and ((a < 0 and up_ok) or (a > 0 and down_ok)):
                    entering = j
                    break
            if entering is None:
                return False
            self._pivot_update(basic, entering, target)

    def _pivot_update(self, basic, entering, target):
        row = self.rows[basic]
        a = row[entering]
        cur = self.value[basic]
        theta = ((target[0] - cur[0]) / a, (target[1] - cur[1]) / a)
        self.value[basic] = target
        ev = self.value[entering]
        self.value[entering] = (ev[0] + theta[0], ev[1] + theta[1])
        for b, r in self.rows.items():
            if b != basic and entering in r:
                c = r[entering]
                bv = self.value[b]
                self.value[b] = (bv[0] + c * theta[0], bv[1] + c * theta[1])
        # Pivot: entering = (basic - sum_{k != entering} a_k x_k) / a.
        new_row = {basic: 1 / a}
        for k, c in row.items():
            if k != entering:
                new_row[k] = -c / a
        del self.rows[basic]
        for b, r in self.rows.items():
            c = r.pop(entering, None)
            if c is None:
                continue
            for k, v in new_row.items():
                nv = r.get(k, 0) + c * v
                if nv:
                    r[k] = nv
                else:
                    r.pop(k, None)
        self.rows[entering] = new_row

    def witness(self) -> dict[str, Fraction]:
        delta = Fraction(1)
        for v in range(self.nvars):
            val = self.value[v]
            for bound, below in ((self.lo[v], True), (self.hi[v], False)):
                if bound is None:
                    continue
                small, big = (bound, val) if below else (val, bound)
                # need small[0] + small[1]*delta <= big[0] + big[1]*delta
                if small[0] < big[0] and small[1] > big[1]:
                    delta = min(delta, (big[0] - small[0]) / (small[1] - big[1]))
        return {
            name: self.value[i][0] + self.value[i][1] * delta
            for i, name in enumerate(self.names)
        }


def is_sat(atoms: Iterable[LinAtom]) -> bool:
    return sat_rat(atoms).sat


def implies(atoms: Sequence[LinAtom], atom: LinAtom) -> bool:
    """Rational entailment of ``atom`` by the conjunction ``atoms``."""
    return not any(is_sat(list(atoms) + [neg]) for neg in atom.negation())


# --------------------------------------------------------------------------
# Fourier-Motzkin projection.


def _dedupe_parallel(atoms: Iterable[LinAtom]) -> list[LinAtom]:
    """Keep only the tightest of parallel inequalities."""
    best: dict[tuple, tuple[Fraction, bool, LinAtom]] = {}
    rest = []
    for a in atoms:
        if a == TRUE_ATOM:
            continue
        if a == FALSE_ATOM:
            return [FALSE_ATOM]
        if a.rel is Rel.EQ:
            rest.append(a)
            continue
        g = 0
        for _, c in a.term.coeffs:
            g = gcd(g, int(c))
        key = tuple((n, c / g) for n, c in a.term.coeffs)
        const = a.term.const / g
        strict = a.rel is Rel.LT
        cur = best.get(key)
        if cur is None or const > cur[0] or (const == cur[0] and strict and not cur[1]):
            best[key] = (const, strict, a)
    return rest + [v[2] for v in best.values()]


def fm_project(poly: Polyhedron | Iterable[LinAtom], name: str) -> Polyhedron:
    atoms = list(poly)
    eqs = [a for a in atoms if a.rel is Rel.EQ and a.term.coeff(name)]
    if eqs:
        pivot = eqs[0]
        c = pivot.term.coeff(name)
        rest = LinTerm(tuple((n, v) for n, v in pivot.term.coeffs if n != name), pivot.term.const)
        solution = rest.scale(Fraction(-1) / c)
        out = []
        for a in atoms:
            if a is pivot:
                continue
            out.append(LinAtom.make(a.term.substitute(name, solution), a.rel))
        return Polyhedron.of(_dedupe_parallel(out))
    pos, neg, out = [], [], []
    for a in atoms:
        c = a.term.coeff(name)
        if c > 0:
            pos.append(a)
        elif c < 0:
            neg.append(a)
        else:
            out.append(a)
    for p in pos:
        cp = p.term.coeff(name)
        for q in neg:
            cq = -q.term.coeff(name)
            combined = p.term.scale(cq) + q.term.scale(cp)
            rel = Rel.LT if Rel.LT in (p.rel, q.rel) else Rel.LE
            out.append(LinAtom.make(combined, rel))
    return Polyhedron.of(_dedupe_parallel(out))


def remove_redundant(atoms: Sequence[LinAtom]) -> list[LinAtom]:
    """Drop inequalities implied by the others (equalities are kept)."""
    kept = list(atoms)
    i = 0
    while i < len(kept):
        a = kept[i]
        if a.rel is not Rel.EQ and implies(kept[:i] + kept[i + 1:], a):
            del kept[i]
        else:
            i += 1
    return kept


def _elimination_cost(atoms: Sequence[LinAtom], name: str) -> tuple:
    pos = neg = 0
    for a in atoms:
        c = a.term.coeff(name)
        if not c:
            continue
        if a.rel is Rel.EQ:
            return (-1, name)
        if c > 0:
            pos += 1
        else:
            neg += 1
    return (pos * neg - pos - neg, name)


def _fm_tracked(items: list[tuple[LinAtom, frozenset]], name: str, eliminated: int
                ) -> tuple[list[tuple[LinAtom, frozenset]], bool]:
    """One elimination step carrying the set of source inequalities of every atom.

    Substituting an equality maps atoms one to one and keeps histories; the
    second result is False in that case (no inequality was eliminated).
    Otherwise non-strict combinations whose history exceeds
    ``eliminated + 2`` sources are redundant and dropped (Chernikov's rule).
    """
    eqs = [a for a, _ in items if a.rel is Rel.EQ and a.term.coeff(name)]
    out: list[tuple[LinAtom, frozenset]] = []
    if eqs:
        pivot = eqs[0]
        c = pivot.term.coeff(name)
        rest = LinTerm(tuple((n, v) for n, v in pivot.term.coeffs if n != name), pivot.term.const)
        solution = rest.scale(Fraction(-1) / c)
        for a, h in items:
            if a is not pivot:
                out.append((LinAtom.make(a.term.substitute(name, solution), a.rel), h))
        counted = False
    else:
        pos, neg = [], []
        for a, h in items:
            c = a.term.coeff(name)
            (pos if c > 0 else neg if c < 0 else out).append((a, h))
        limit = eliminated + 2
        for p, hp in pos:
            cp = p.term.coeff(name)
            for q, hq in neg:
                h = hp | hq
                rel = Rel.LT if Rel.LT in (p.rel, q.rel) else Rel.LE
                if rel is Rel.LE and len(h) > limit:
                    continue
                cq = -q.term.coeff(name)
                out.append((LinAtom.make(p.term.scale(cq) + q.term.scale(cp), rel), h))
        counted = True
    best: dict[LinAtom, frozenset] = {}
    for a, h in out:
        if a not in best or len(h) < len(best[a]):
            best[a] = h
    return [(a, best[a]) for a in _dedupe_parallel(best)], counted


def project_out(poly: Polyhedron | Iterable[LinAtom], names: Iterable[str],
                budget: Optional[int] = FM_ATOM_BUDGET) -> Optional[Polyhedron]:
    """Eliminate ``names``; ``None`` when an intermediate set exceeds ``budget``."""
    current = Polyhedron.of(poly)
    todo = set(names) & current.vars()
    items = [(a, frozenset([i])) for i, a in enumerate(current.atoms)]
    eliminated = 0
    while todo:
        if current.is_trivially_empty():
            return current
        name = min(todo, key=lambda n: _elimination_cost(current.atoms, n))
        todo.discard(name)
        items, counted = _fm_tracked(items, name, eliminated)
        eliminated += counted
        current = Polyhedron.of(a for a, _ in items)
        if budget is not None and len(current) > budget:
            return None
        if len(current) > _PRUNE_THRESHOLD:
            if not is_sat(current.atoms):
                return Polyhedron((FALSE_ATOM,))
            # pruned atoms are implied by the survivors, so histories stay valid
            kept = set(remove_redundant(current.atoms))
            items = [(a, h) for a, h in items if a in kept]
            current = Polyhedron.of(a for a, _ in items)
        todo &= current.vars()
    return current


def project_onto(poly: Polyhedron | Iterable[LinAtom], keep: Iterable[str],
                 budget: Optional[int] = FM_ATOM_BUDGET) -> Optional[Polyhedron]:
    poly = Polyhedron.of(poly)
    return project_out(poly, poly.vars() - set(keep), budget)


# --------------------------------------------------------------------------
# Equalities from samples.


def _rref(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    rows = [list(r) for r in rows]
    out: list[list[Fraction]] = []
    if not rows:
        return out
    ncols = len(rows[0])
    r = 0
    for col in range(ncols):
        pivot = None
        for i in range(r, len(rows)):
            if rows[i][col]:
                pivot = i
                break
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        lead = rows[r][col]
        rows[r] = [v / lead for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col]:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        r += 1
        if r == len(rows):
            break
    return [row for row in rows[:r]]


def nullspace_int(samples: Sequence[Mapping[str, int]], variables: Sequence[str]) -> list[LinTerm]:
    """Integer basis of affine relations holding on every sample.

    Each relation ``t`` satisfies ``t(s) == 0`` for all samples ``s``.  The
    basis is the reduced row echelon form over the columns
    ``(x1, ..., xn, 1)``, scaled to coprime integers with a positive lead.
    """
    variables = list(variables)
    ncols = len(variables) + 1
    basis: list[list[Fraction]] = []
    pivots: list[int] = []
    seen = set()
    for s in samples:
        key = tuple(s[v] for v in variables)
        if key in seen:
            continue
        seen.add(key)
        row = [Fraction(x) for x in key] + [Fraction(1)]
        for b, p in zip(basis, pivots):
            if row[p]:
                f = row[p]
                row = [x - f * y for x, y in zip(row, b)]
        nz = next((i for i, v in enumerate(row) if v), None)
        if nz is None:
            continue
        lead = row[nz]
        row = [v / lead for v in row]
        for i, b in enumerate(basis):
            if b[nz]:
                f = b[nz]
                basis[i] = [x - f * y for x, y in zip(b, row)]
        basis.append(row)
        pivots.append(nz)
        if len(basis) == ncols:
            return []
    # Null space of the sample matrix = orthogonal complement of its row space.
    rowspace = _rref(basis)
    pivot_cols = []
    for row in rowspace:
        pivot_cols.append(next(i for i, v in enumerate(row) if v))
    free = [c for c in range(ncols) if c not in pivot_cols]
    vectors = []
    for f in free:
        vec = [Fraction(0)] * ncols
        vec[f] = Fraction(1)
        for row, p in zip(rowspace, pivot_cols):
            vec[p] = -row[f]
        vectors.append(vec)
    out = []
    for vec in _rref(vectors):
        term = LinTerm.of({v: c for v, c in zip(variables, vec[:-1])}, vec[-1]).integer_scaled()
        if term.coeffs and term.coeffs[0][1] < 0:
            term = -term
        out.append(term)
    return out


# --------------------------------------------------------------------------
# Bounded integer search.


def find_int_model(poly: Polyhedron | Iterable[LinAtom], box: Mapping[str, tuple[int, int]],
                   budget: int = 1_000_000) -> Optional[dict[str, int]]:
    """Some integer point of ``poly`` inside ``box`` or ``None``.

    Backtracking over variables in name order; each level is pruned with the
    bounds implied by the rational projection onto the assigned prefix.
    """
    poly = Polyhedron.of(poly)
    names = sorted(set(box) | poly.vars())
    missing = [n for n in names if n not in box]
    if missing:
        raise ValueError(f"box does not cover {missing}")
    if poly.is_trivially_empty():
        return None
    levels: list[list[LinAtom]] = [[] for _ in names]
    current: Optional[Polyhedron] = poly
    for i in range(len(names) - 1, -1, -1):
        atoms = list(current.atoms) if current is not None else []
        levels[i] = [a for a in atoms if names[i] in a.vars()]
        if current is not None:
            current = project_out(current, [names[i]], budget=None if len(current) < 64 else 4096)
            if current is not None and current.is_trivially_empty():
                return None
    nodes = [0]
    point: dict[str, int] = {}

    def bounds(i: int) -> tuple[int, int]:
        lo, hi = box[names[i]]
        for a in levels[i]:
            c = a.term.coeff(names[i])
            rest = a.term.const + sum(v * point[n] for n, v in a.term.coeffs if n != names[i])
            # c*x + rest REL 0
            b = -rest / c
            if a.rel is Rel.EQ:
                if b.denominator != 1:
                    return 1, 0
                lo, hi = max(lo, int(b)), min(hi, int(b))
            elif c > 0:
                ub = floor(b) if a.rel is Rel.LE or b.denominator != 1 else int(b) - 1
                hi = min(hi, ub)
            else:
                lb = ceil(b) if a.rel is Rel.LE or b.denominator != 1 else int(b) + 1
                lo = max(lo, lb)
        return lo, hi

    def search(i: int) -> bool:
        if i == len(names):
            return poly.contains(point)
        lo, hi = bounds(i)
        for v in range(lo, hi + 1):
            nodes[0] += 1
            if nodes[0] > budget:
                raise BudgetExceeded(f"integer search exceeded {budget} nodes")
            point[names[i]] = v
            if search(i + 1):
                return True
        point.pop(names[i], None)
        return False

    if search(0):
        return dict(point)
    return None


# --------------------------------------------------------------------------
# Cores.


def unsat_core(atoms: Sequence[LinAtom]) -> Optional[list[LinAtom]]:
    """Deletion-based minimal unsat subset in input order, or ``None``."""
    core = list(atoms)
    if is_sat(core):
        return None
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if not is_sat(trial):
            core = trial
        else:
            i += 1
    return core


def unsat_core_pair(phi1: Sequence[LinAtom], phi2: Sequence[LinAtom]) -> Optional[list[LinAtom]]:
    """Atoms of ``phi2`` taking part in an unsat core of ``phi1 + phi2``."""
    tagged = [(0, a) for a in phi1] + [(1, a) for a in phi2]
    if is_sat([a for _, a in tagged]):
        return None
    i = 0
    while i < len(tagged):
        trial = tagged[:i] + tagged[i + 1:]
        if not is_sat([a for _, a in trial]):
            tagged = trial
        else:
            i += 1
    return [a for side, a in tagged if side == 1]


# --------------------------------------------------------------------------
# Convex hull of a union.


def hull_union(p1: Polyhedron | Iterable[LinAtom], p2: Polyhedron | Iterable[LinAtom],
               keep_vars: Iterable[str], budget: int = FM_ATOM_BUDGET) -> Optional[Polyhedron]:
    """Closed convex hull of ``p1`` and ``p2`` projected onto ``keep_vars``.

    Each operand is first projected onto ``keep_vars`` (projection commutes
    with taking convex hulls), then the lifted formulation with a scaled copy
    per operand is built and the auxiliary variables are eliminated.
    """
    keep = sorted(set(keep_vars))
    q1 = project_onto(p1, keep, budget)
    q2 = project_onto(p2, keep, budget)
    if q1 is None or q2 is None:
        return None
    if not is_sat(q1.atoms):
        return _tidy(q2.atoms) if is_sat(q2.atoms) else Polyhedron((FALSE_ATOM,))
    if not is_sat(q2.atoms):
        return _tidy(q1.atoms)
    lam = "__lam"
    copy = {n: f"__u_{n}" for n in keep}
    lifted: list[LinAtom] = []
    for a in q1.atoms:
        # a.x + c <= 0 on the u-copy, homogenised by lambda.
        t = LinTerm.of({copy[n]: c for n, c in a.term.coeffs}) + LinTerm.of({lam: a.term.const})
        lifted.append(LinAtom.make(t, _closed(a.rel)))
    for a in q2.atoms:
        # a.(x - u) + c*(1 - lambda) <= 0
        coeffs: dict[str, Fraction] = {}
        for n, c in a.term.coeffs:
            coeffs[n] = coeffs.get(n, 0) + c
            coeffs[copy[n]] = coeffs.get(copy[n], 0) - c
        coeffs[lam] = coeffs.get(lam, 0) - a.term.const
        lifted.append(LinAtom.make(LinTerm.of(coeffs, a.term.const), _closed(a.rel)))
    lifted.append(LinAtom.le({lam: -1}))
    lifted.append(LinAtom.le({lam: 1}, -1))
    projected = project_out(lifted, [lam] + sorted(copy.values()), budget)
    if projected is None:
        return None
    return _tidy(projected.atoms)


def _closed(rel: Rel) -> Rel:
    return Rel.LE if rel is Rel.LT else rel


def _tidy(atoms: Sequence[LinAtom]) -> Polyhedron:
    return Polyhedron.of(remove_redundant(Polyhedron.of(atoms).atoms))
