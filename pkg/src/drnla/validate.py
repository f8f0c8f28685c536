"""Checking candidate replacements in program context.

``instrument_check`` turns each mapped condition site into a cascade of
error statements, one per mismatch case; ``validate`` searches a bounded
input box for a reachable error and ``export_smtlib`` writes the same
reachability questions as QF_NIA scripts.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional, Union

from . import constraints as C
from . import lang
from .interp import Executable, InputBox, Outcome, compile_expr
from .lang import And, ErrorStmt, If, Not, Program
from .polylib import BudgetExceeded

DEFAULT_SCOPE_RANGE = (-50, 50)
DEFAULT_VALIDATION_LOOP_BOUND = 200
DEFAULT_BUDGET = 250_000

ReplacementMap = Mapping[str, tuple[C.Blia, C.Blia]]


class CexCase(Enum):
    EXPAND_POS = "ExpandPos"
    TRIM_NEG = "TrimNeg"
    TRIM_POS = "TrimPos"
    EXPAND_NEG = "ExpandNeg"

    @property
    def code(self) -> str:
        return _CODES[self]

    @property
    def side(self) -> str:
        return "pos" if self in (CexCase.EXPAND_POS, CexCase.TRIM_POS) else "neg"

    @property
    def expands(self) -> bool:
        return self in (CexCase.EXPAND_POS, CexCase.EXPAND_NEG)


_CODES = {
    CexCase.EXPAND_POS: "ep",
    CexCase.TRIM_NEG: "tn",
    CexCase.TRIM_POS: "tp",
    CexCase.EXPAND_NEG: "en",
}

# Order of the cascade arms; the first matching arm names the case.
CASCADE = (CexCase.EXPAND_POS, CexCase.TRIM_NEG, CexCase.TRIM_POS, CexCase.EXPAND_NEG)


def classify(b: bool, pos: bool, neg: bool) -> Optional[CexCase]:
    """Case raised by the cascade for the given truth values, if any."""
    if b and not pos:
        return CexCase.EXPAND_POS
    if b and neg:
        return CexCase.TRIM_NEG
    if not b and pos:
        return CexCase.TRIM_POS
    if not b and not neg:
        return CexCase.EXPAND_NEG
    return None


class Mode(Enum):
    EXHAUSTIVE = "exhaustive"
    RANDOM = "random"
    SMT_EXPORT = "smt-export"


@dataclass(frozen=True)
class ValidationScope:
    box: InputBox
    loop_bound: int = DEFAULT_VALIDATION_LOOP_BOUND
    mode: Mode = Mode.EXHAUSTIVE
    runs: int = 1000
    seed: int = 0
    budget: int = DEFAULT_BUDGET

    @classmethod
    def for_program(cls, prog: Program, lo: int = DEFAULT_SCOPE_RANGE[0],
                    hi: int = DEFAULT_SCOPE_RANGE[1], **kw) -> "ValidationScope":
        overrides = kw.pop("overrides", None)
        return cls(InputBox.for_program(prog, lo, hi, overrides), **kw)

    def describe(self) -> str:
        return f"{self.mode.value}; {self.box.describe() or 'no inputs'}; loop bound {self.loop_bound}"


@dataclass(frozen=True)
class Safe:
    runs: int

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Counterexample:
    case: CexCase
    loc: str
    inputs: dict[str, int]
    error_state: dict[str, int]
    path: tuple[tuple[str, bool], ...] = field(default=())

    def __bool__(self) -> bool:
        return False

    def describe(self) -> str:
        ins = ", ".join(f"{k}={v}" for k, v in self.inputs.items()) or "(none)"
        st = ", ".join(f"{k}={v}" for k, v in self.error_state.items())
        return f"{self.case.value} at {self.loc}; inputs: {ins}; state: {st}"


Verdict = Union[Safe, Counterexample]


# ------------------------------------------------------------ instrumenting


def _cascade(node: If, pos: C.Blia, neg: C.Blia) -> If:
    b = node.cond
    p = C.to_boolexpr(pos)
    n = C.to_boolexpr(neg)
    conds = {
        CexCase.EXPAND_POS: And(b, Not(p)),
        CexCase.TRIM_NEG: And(b, n),
        CexCase.TRIM_POS: And(Not(b), p),
        CexCase.EXPAND_NEG: And(Not(b), Not(n)),
    }
    inner: If = node
    for case in reversed(CASCADE):
        inner = If(conds[case], (ErrorStmt(case.value, node.loc),), (inner,), None)
    return inner


def instrument_check(prog: Program, m: ReplacementMap) -> Program:
    """Five-way cascade at every mapped site; the original branch is the last arm."""
    sites = {loc for loc, _ in lang.condition_sites(prog)}
    for loc in m:
        if loc not in sites:
            raise KeyError(f"unknown location {loc}")
    if not m:
        return prog
    done = set()

    def fn(node: If):
        if node.loc in m:
            done.add(node.loc)
            pos, neg = m[node.loc]
            return _cascade(node, pos, neg)
        return node

    out = lang.map_sites(prog, fn)
    missing = set(m) - done
    if missing:
        raise ValueError(f"sites {sorted(missing)} are loop guards; normalize the program first")
    return out


# -------------------------------------------------------------- validation


def _inputs(scope: ValidationScope) -> Iterator[dict[str, int]]:
    if scope.mode is Mode.EXHAUSTIVE:
        if scope.box.size > scope.budget:
            raise BudgetExceeded(
                f"box has {scope.box.size} points, budget is {scope.budget}")
        return scope.box.points()
    if scope.mode is Mode.RANDOM:
        rng = random.Random(scope.seed)
        return (scope.box.sample(rng) for _ in range(scope.runs))
    raise ValueError("SMT export produces scripts, not verdicts; use export_smtlib")


def validate(prog: Program, m: ReplacementMap, scope: ValidationScope) -> Verdict:
    exe = Executable(instrument_check(prog, m))
    runs = 0
    for inp in _inputs(scope):
        runs += 1
        r = exe.run(inp, scope.loop_bound)
        if r.outcome is Outcome.ERROR:
            r = exe.run(inp, scope.loop_bound, record_path=True)
            case, loc = r.error
            return Counterexample(CexCase(case), loc, dict(inp), r.state, tuple(r.path))
    return Safe(runs)


def case_holds(case: CexCase, b: bool, pos: bool, neg: bool) -> bool:
    return {
        CexCase.EXPAND_POS: b and not pos,
        CexCase.TRIM_NEG: b and neg,
        CexCase.TRIM_POS: not b and pos,
        CexCase.EXPAND_NEG: not b and not neg,
    }[case]


def replay(prog: Program, m: ReplacementMap, cex: Counterexample,
           loop_bound: int = DEFAULT_VALIDATION_LOOP_BOUND) -> bool:
    """Whether ``cex`` reproduces: same label, same state, case condition true there."""
    r = Executable(instrument_check(prog, m)).run(cex.inputs, loop_bound, record_path=True)
    if r.outcome is not Outcome.ERROR or r.error != (cex.case.value, cex.loc):
        return False
    if r.state != cex.error_state or tuple(r.path) != cex.path:
        return False
    cond = lang.site_condition(prog, cex.loc)
    b = bool(compile_expr(cond)[0](dict(cex.error_state)))
    pos, neg = m[cex.loc]
    return case_holds(cex.case, b, C.eval_blia(pos, cex.error_state), C.eval_blia(neg, cex.error_state))


# --------------------------------------------------------------- SMT export


def _smt_int(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


class _SmtBuilder:
    def __init__(self, prog: Program, unroll: int):
        self.unroll = unroll
        self.defs: list[str] = []
        self.decls: list[str] = []
        self.counter: dict[str, int] = {}
        self.reach: dict[tuple[str, str], list[str]] = {}
        env = {}
        for d in prog.decls:
            sym = self.fresh(d.name)
            if d.init is None:
                self.decls.append(f"(declare-const {sym} Int)")
            else:
                self.defs.append(f"(define-fun {sym} () Int {_smt_int(d.init)})")
            env[d.name] = sym
        self.inputs = {d.name: env[d.name] for d in prog.decls if d.init is None}
        self.env0 = env

    def fresh(self, base: str) -> str:
        n = self.counter.get(base, 0)
        self.counter[base] = n + 1
        return f"{base}@{n}"

    def define(self, base: str, sort: str, term: str) -> str:
        if term in ("true", "false") or not term.startswith("("):
            return term
        sym = self.fresh(base)
        self.defs.append(f"(define-fun {sym} () {sort} {term})")
        return sym

    def expr(self, e, env) -> str:
        if isinstance(e, lang.Const):
            return _smt_int(e.value)
        if isinstance(e, lang.Var):
            return env[e.name]
        if isinstance(e, lang.Neg):
            return f"(- {self.expr(e.operand, env)})"
        if isinstance(e, lang.BinOp):
            return f"({e.op} {self.expr(e.left, env)} {self.expr(e.right, env)})"
        if isinstance(e, lang.BoolConst):
            return "true" if e.value else "false"
        if isinstance(e, lang.Not):
            return f"(not {self.expr(e.operand, env)})"
        if isinstance(e, lang.And):
            return f"(and {self.expr(e.left, env)} {self.expr(e.right, env)})"
        if isinstance(e, lang.Or):
            return f"(or {self.expr(e.left, env)} {self.expr(e.right, env)})"
        if isinstance(e, lang.Compare):
            a, b = self.expr(e.left, env), self.expr(e.right, env)
            if e.op == "==":
                return f"(= {a} {b})"
            if e.op == "!=":
                return f"(not (= {a} {b}))"
            return f"({e.op} {a} {b})"
        raise TypeError(e)

    def merge(self, guards_envs: list[tuple[str, dict]], default: dict) -> dict:
        out = {}
        for name in default:
            term = default[name]
            for g, env in reversed(guards_envs):
                if env[name] != term:
                    term = f"(ite {g} {env[name]} {term})"
            out[name] = self.define(name, "Int", term) if term != default[name] else term
        return out

    def block(self, body, env, guard) -> tuple[dict, str, list[tuple[str, dict]]]:
        """Returns final env, residual guard and break records."""
        breaks: list[tuple[str, dict]] = []
        for s in body:
            if guard == "false":
                break
            if isinstance(s, lang.Assign):
                env = dict(env)
                env[s.name] = self.define(s.name, "Int", self.expr(s.expr, env))
            elif isinstance(s, (lang.Skip, lang.Snap)):
                pass
            elif isinstance(s, lang.Break):
                breaks.append((guard, env))
                guard = "false"
            elif isinstance(s, ErrorStmt):
                self.reach.setdefault((s.loc, s.case), []).append(guard)
                guard = "false"
            elif isinstance(s, If):
                c = self.define("%cond", "Bool", self.expr(s.cond, env))
                gt = self.define("%path", "Bool", f"(and {guard} {c})")
                ge = self.define("%path", "Bool", f"(and {guard} (not {c}))")
                env_t, gt2, bt = self.block(s.then, env, gt)
                env_e, ge2, be = self.block(s.orelse, env, ge)
                breaks += bt + be
                merged = {}
                for name in env:
                    a, b = env_t[name], env_e[name]
                    merged[name] = a if a == b else self.define(name, "Int", f"(ite {c} {a} {b})")
                env = merged
                guard = self.define("%path", "Bool", f"(or {gt2} {ge2})")
            elif isinstance(s, lang.While):
                body_ = s.body
                if s.cond != lang.TRUE:
                    body_ = (If(s.cond, s.body, (lang.Break(),)),)
                exits: list[tuple[str, dict]] = []
                for _ in range(self.unroll):
                    if guard == "false":
                        break
                    env, guard, brk = self.block(body_, env, guard)
                    exits += brk
                if not exits:
                    guard = "false"
                    continue
                env = self.merge(exits[1:], exits[0][1]) if len(exits) > 1 else exits[0][1]
                gs = " ".join(g for g, _ in exits)
                guard = self.define("%path", "Bool", f"(or {gs})" if len(exits) > 1 else exits[0][0])
            else:  # pragma: no cover
                raise TypeError(s)
        return env, guard, breaks


def export_smtlib(prog: Program, m: ReplacementMap, unroll: int = DEFAULT_VALIDATION_LOOP_BOUND,
                  box: Optional[InputBox] = None) -> dict[tuple[str, str], str]:
    """One QF_NIA script per (loc, case) asserting that the error label is reachable.

    Loops are unrolled ``unroll`` times; paths still looping afterwards are
    discarded.  Arithmetic is over unbounded integers.
    """
    checked = lang.normalize(prog) if any(
        isinstance(s, lang.While) and s.cond != lang.TRUE for s in lang.iter_stmts(prog.body)
    ) else prog
    program = instrument_check(checked, m)
    sb = _SmtBuilder(program, unroll)
    sb.block(program.body, sb.env0, "true")
    ranges = box.as_dict() if box is not None else {}
    scripts = {}
    for loc in sorted(m, key=_loc_key):
        for case in CASCADE:
            guards = sb.reach.get((loc, case.value), [])
            reach = "false" if not guards else (guards[0] if len(guards) == 1 else f"(or {' '.join(guards)})")
            bounds = []
            for name, sym in sb.inputs.items():
                if name in ranges:
                    lo, hi = ranges[name]
                    bounds.append(f"(<= {_smt_int(lo)} {sym})")
                    bounds.append(f"(<= {sym} {_smt_int(hi)})")
            goal = f"(and {' '.join(bounds)} {reach})" if bounds else reach
            lines = [
                f"; reachability of {case.value} at {loc}, loops unrolled {unroll} times",
                "(set-logic QF_NIA)",
                *sb.decls,
                *sb.defs,
                f"(assert {goal})",
                "(check-sat)",
                "(get-model)",
                "(exit)",
            ]
            scripts[(loc, case.value)] = "\n".join(lines) + "\n"
    return scripts


def _loc_key(loc: str) -> tuple:
    return (int(loc[1:]) if loc[1:].isdigit() else 0, loc)
