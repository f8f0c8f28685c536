"""Concrete execution of ``.imp`` programs.

Programs are compiled once into nested tuples of Python closures; every
arithmetic result is range-checked against signed 64-bit bounds.  Loops are
cut after ``loop_bound`` iterations per entry.
"""

from __future__ import annotations

import itertools
import random
import statistics
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Mapping, Optional, Sequence

from . import lang
from .lang import (
    And, Assign, BinOp, BoolConst, Break, Compare, Const, ErrorStmt, If, Neg, Not,
    Or, Program, Skip, Snap, Var, While,
)
from .learn import SampleSet

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1

DEFAULT_SAMPLE_LOOP_BOUND = 500


class Outcome(Enum):
    COMPLETED = "Completed"
    LOOP_LIMIT = "LoopLimitHit"
    OVERFLOW = "ArithmeticOverflow"
    ERROR = "ErrorReached"


class EmptySide(Exception):
    """One side of a condition site was never observed while sampling."""

    def __init__(self, loc: str, pos: SampleSet, neg: SampleSet):
        self.loc = loc
        self.pos = pos
        self.neg = neg
        sides = [n for n, s in (("positive", pos), ("negative", neg)) if not s.states]
        super().__init__(f"{loc}: no {' or '.join(sides)} samples")


@dataclass
class RunResult:
    outcome: Outcome
    state: dict[str, int]
    steps: int
    trace: Optional[list[tuple[Optional[str], dict[str, int]]]] = None
    error: Optional[tuple[str, str]] = None  # (case, loc) when outcome is ERROR
    path: Optional[list[tuple[str, bool]]] = None


@dataclass(frozen=True)
class InputBox:
    """Inclusive integer interval per nondeterministic input."""

    ranges: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        for name, lo, hi in self.ranges:
            if lo > hi:
                raise ValueError(f"empty interval for {name}: [{lo}, {hi}]")

    @classmethod
    def uniform(cls, names: Sequence[str], lo: int, hi: int,
                overrides: Optional[Mapping[str, tuple[int, int]]] = None) -> "InputBox":
        overrides = overrides or {}
        return cls(tuple((n, *overrides.get(n, (lo, hi))) for n in names))

    @classmethod
    def for_program(cls, prog: Program, lo: int, hi: int,
                    overrides: Optional[Mapping[str, tuple[int, int]]] = None) -> "InputBox":
        return cls.uniform(prog.inputs, lo, hi, overrides)

    @property
    def names(self) -> list[str]:
        return [n for n, _, _ in self.ranges]

    def as_dict(self) -> dict[str, tuple[int, int]]:
        return {n: (lo, hi) for n, lo, hi in self.ranges}

    @property
    def size(self) -> int:
        total = 1
        for _, lo, hi in self.ranges:
            total *= hi - lo + 1
        return total

    def points(self) -> Iterator[dict[str, int]]:
        """Lexicographic enumeration in declaration order."""
        names = self.names
        axes = [range(lo, hi + 1) for _, lo, hi in self.ranges]
        for values in itertools.product(*axes):
            yield dict(zip(names, values))

    def sample(self, rng: random.Random) -> dict[str, int]:
        return {n: rng.randint(lo, hi) for n, lo, hi in self.ranges}

    def describe(self) -> str:
        return ", ".join(f"{n} in [{lo}, {hi}]" for n, lo, hi in self.ranges)


# ------------------------------------------------------------------ compiling


class _Overflow(Exception):
    pass


class _LoopLimit(Exception):
    pass


class _Halt(Exception):
    def __init__(self, case: str, loc: str):
        self.case = case
        self.loc = loc


def _ck(v: int) -> int:
    if v > INT_MAX or v < INT_MIN:
        raise _Overflow
    return v


def _expr_src(e) -> tuple[str, int]:
    """Python source for an expression plus its operation count."""
    if isinstance(e, Const):
        return repr(e.value), 0
    if isinstance(e, Var):
        return f"s[{e.name!r}]", 0
    if isinstance(e, Neg):
        src, n = _expr_src(e.operand)
        return f"_ck(-{src})", n + 1
    if isinstance(e, BinOp):
        a, na = _expr_src(e.left)
        b, nb = _expr_src(e.right)
        return f"_ck({a} {e.op} {b})", na + nb + 1
    if isinstance(e, BoolConst):
        return ("True" if e.value else "False"), 0
    if isinstance(e, Not):
        src, n = _expr_src(e.operand)
        return f"(not {src})", n + 1
    if isinstance(e, And):
        a, na = _expr_src(e.left)
        b, nb = _expr_src(e.right)
        return f"({a} and {b})", na + nb + 1
    if isinstance(e, Or):
        a, na = _expr_src(e.left)
        b, nb = _expr_src(e.right)
        return f"({a} or {b})", na + nb + 1
    if isinstance(e, Compare):
        a, na = _expr_src(e.left)
        b, nb = _expr_src(e.right)
        return f"({a} {e.op} {b})", na + nb + 1
    raise TypeError(e)


_ENV = {"_ck": _ck, "__builtins__": {}}


def compile_expr(e) -> tuple[Callable[[dict], object], int]:
    src, cost = _expr_src(e)
    return eval(f"lambda s: {src}", _ENV), cost


_ASSIGN, _SKIP, _BREAK, _IF, _WHILE, _SNAP, _ERROR = range(7)


def _compile_block(body) -> tuple:
    out = []
    for s in body:
        if isinstance(s, Assign):
            fn, cost = compile_expr(s.expr)
            out.append((_ASSIGN, 1 + cost, s.name, fn))
        elif isinstance(s, Skip):
            out.append((_SKIP, 1))
        elif isinstance(s, Break):
            out.append((_BREAK, 1))
        elif isinstance(s, If):
            fn, cost = compile_expr(s.cond)
            out.append((_IF, 1 + cost, s.loc, fn, _compile_block(s.then), _compile_block(s.orelse)))
        elif isinstance(s, While):
            if s.cond == lang.TRUE:
                fn, cost = None, 0
            else:
                fn, cost = compile_expr(s.cond)
            out.append((_WHILE, 1 + cost, s.loc, fn, _compile_block(s.body)))
        elif isinstance(s, Snap):
            out.append((_SNAP, 0, s.loc, s.side))
        elif isinstance(s, ErrorStmt):
            out.append((_ERROR, 0, s.case, s.loc))
        else:  # pragma: no cover
            raise TypeError(s)
    return tuple(out)


class Executable:
    """A compiled program; ``run`` is reentrant."""

    def __init__(self, prog: Program):
        self.program = prog
        self.variables = prog.variables
        self.inputs = prog.inputs
        self.inits = [(d.name, d.init) for d in prog.decls]
        self.code = _compile_block(prog.body)

    def initial_state(self, inputs: Mapping[str, int]) -> dict[str, int]:
        s = {}
        for name, init in self.inits:
            if init is None:
                if name not in inputs:
                    raise ValueError(f"missing input for {name}")
                v = int(inputs[name])
                if v > INT_MAX or v < INT_MIN:
                    raise ValueError(f"input {name}={v} outside 64-bit range")
                s[name] = v
            else:
                s[name] = init
        return s

    def run(self, inputs: Mapping[str, int], loop_bound: int = DEFAULT_SAMPLE_LOOP_BOUND, *,
            trace: bool = False,
            on_snap: Optional[Callable[[str, str, dict], None]] = None,
            on_visit: Optional[Callable[[str, dict, bool], None]] = None,
            record_path: bool = False) -> RunResult:
        if loop_bound < 1:
            raise ValueError("loop_bound must be at least 1")
        s = self.initial_state(inputs)
        steps = 0
        tr: Optional[list] = [] if trace else None
        path: Optional[list] = [] if record_path else None

        def block(code) -> bool:
            """Returns True when a ``break`` escapes the block."""
            nonlocal steps
            for st in code:
                kind = st[0]
                steps += st[1]
                if kind == _ASSIGN:
                    s[st[2]] = st[3](s)
                    if tr is not None:
                        tr.append((None, dict(s)))
                elif kind == _IF:
                    c = st[3](s)
                    loc = st[2]
                    if loc is not None:
                        if tr is not None:
                            tr.append((loc, dict(s)))
                        if on_visit is not None:
                            on_visit(loc, s, c)
                        if path is not None:
                            path.append((loc, c))
                    if block(st[4] if c else st[5]):
                        return True
                elif kind == _WHILE:
                    cond, body, loc = st[3], st[4], st[2]
                    count = 0
                    cost = st[1]
                    while True:
                        if cond is not None:
                            c = cond(s)
                            if loc is not None:
                                if tr is not None:
                                    tr.append((loc, dict(s)))
                                if on_visit is not None:
                                    on_visit(loc, s, c)
                                if path is not None:
                                    path.append((loc, c))
                            if not c:
                                break
                        if count >= loop_bound:
                            raise _LoopLimit
                        count += 1
                        if block(body):
                            break
                        steps += cost
                elif kind == _BREAK:
                    return True
                elif kind == _SNAP:
                    if on_snap is not None:
                        on_snap(st[2], st[3], s)
                elif kind == _ERROR:
                    raise _Halt(st[2], st[3])
            return False

        outcome, error = Outcome.COMPLETED, None
        try:
            block(self.code)
        except _LoopLimit:
            outcome = Outcome.LOOP_LIMIT
        except _Overflow:
            outcome = Outcome.OVERFLOW
        except _Halt as h:
            outcome, error = Outcome.ERROR, (h.case, h.loc)
        return RunResult(outcome, dict(s), steps, tr, error, path)


def execute(prog: Program, inputs: Mapping[str, int], loop_bound: int = DEFAULT_SAMPLE_LOOP_BOUND,
            trace: bool = False) -> RunResult:
    return Executable(prog).run(inputs, loop_bound, trace=trace)


def format_trace(trace: Sequence[tuple[Optional[str], Mapping[str, int]]]) -> str:
    lines = []
    for loc, state in trace:
        vals = " ".join(f"{k}={v}" for k, v in state.items())
        lines.append(f"{loc or '-'} {vals}")
    return "\n".join(lines)


# ------------------------------------------------------------------ snapshots


def instrument_snapshots(prog: Program, loc: str) -> Program:
    """Put ``@snap loc pos`` first in the then-arm and ``@snap loc neg`` first in the else-arm."""
    found = []

    def add(node: If):
        if node.loc != loc:
            return node
        found.append(node)
        return If(node.cond, (Snap(loc, "pos"),) + node.then, (Snap(loc, "neg"),) + node.orelse, node.loc)

    out = lang.map_sites(prog, add)
    if not found:
        if any(l == loc for l, _ in lang.condition_sites(prog)):
            raise ValueError(f"{loc} is a loop guard; normalize the program first")
        raise KeyError(f"unknown location {loc}")
    return out


def collect_snapshots(prog: Program, loc: str, runs: int, box: InputBox, seed: int,
                      loop_bound: int = DEFAULT_SAMPLE_LOOP_BOUND) -> tuple[SampleSet, SampleSet]:
    """Sample ``runs`` inputs and log states at ``loc`` split by branch taken.

    Raises ``EmptySide`` (carrying both sets) when a side stays empty.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    exe = Executable(instrument_snapshots(prog, loc))
    names = prog.variables
    logs: dict[str, dict[tuple, None]] = {"pos": {}, "neg": {}}

    def snap(l, side, s):
        logs[side][tuple(s[n] for n in names)] = None

    rng = random.Random(seed)
    for _ in range(runs):
        exe.run(box.sample(rng), loop_bound, on_snap=snap)
    pos = SampleSet(tuple(names), tuple(dict(zip(names, k)) for k in logs["pos"]))
    neg = SampleSet(tuple(names), tuple(dict(zip(names, k)) for k in logs["neg"]))
    if not pos.states or not neg.states:
        raise EmptySide(loc, pos, neg)
    return pos, neg


# ------------------------------------------------------------- differential


@dataclass
class DiffReport:
    runs: int
    mismatches: int
    mismatch_inputs: list[dict[str, int]] = field(default_factory=list)
    steps_a: list[int] = field(default_factory=list)
    steps_b: list[int] = field(default_factory=list)

    @property
    def median_ratio(self) -> float:
        ratios = [b / a for a, b in zip(self.steps_a, self.steps_b) if a]
        return statistics.median(ratios) if ratios else 1.0


def diff_test(p: Program, q: Program, runs: int, box: InputBox, seed: int,
              loop_bound: int = 200, exhaustive: bool = False) -> DiffReport:
    """Run both programs on identical inputs and compare outcomes and final states."""
    if p.variables != q.variables or p.inputs != q.inputs:
        raise ValueError("programs declare different variables")
    ea, eb = Executable(p), Executable(q)
    if exhaustive:
        inputs: Iterator[dict[str, int]] = box.points()
    else:
        rng = random.Random(seed)
        inputs = (box.sample(rng) for _ in range(runs))
    report = DiffReport(0, 0)
    for inp in inputs:
        ra = ea.run(inp, loop_bound)
        rb = eb.run(inp, loop_bound)
        report.runs += 1
        report.steps_a.append(ra.steps)
        report.steps_b.append(rb.steps)
        if ra.outcome != rb.outcome or ra.state != rb.state:
            report.mismatches += 1
            if len(report.mismatch_inputs) < 20:
                report.mismatch_inputs.append(dict(inp))
    return report
