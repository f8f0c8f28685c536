"""Dual refinement of a nonlinear condition into a pair of linear ones.

For a site ``if (b) ...`` the engine keeps a pair ``(pos, neg)`` meant to
agree with ``b`` and ``!b`` on every reachable state.  Each round the pair
is validated; a counterexample is generalised from many similar states and
used to shrink (trim) or grow (expand) the offending side.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional, Sequence

from . import constraints as C
from . import lang
from .interp import (
    DEFAULT_SAMPLE_LOOP_BOUND, EmptySide, Executable, InputBox, collect_snapshots, compile_expr,
)
from .learn import SampleSet, learn
from .lang import If, Program
from .polylib import BudgetExceeded, LinAtom, hull_union, is_sat, unsat_core, unsat_core_pair
from .validate import (
    DEFAULT_BUDGET, DEFAULT_SCOPE_RANGE, DEFAULT_VALIDATION_LOOP_BOUND, CexCase, Counterexample,
    Mode, Safe, ValidationScope, classify, validate,
)

log = logging.getLogger(__name__)


class Status(Enum):
    EXACT = "exact"
    PARTIAL = "partial"


class KeepVars(Enum):
    NLA = "nla"
    ALL = "all"


class Direction(Enum):
    EXPAND = "expand"
    TRIM = "trim"


@dataclass(frozen=True)
class RefineConfig:
    max_iters: int = 18
    models_per_cex: int = 1000
    sample_runs: int = 100
    sample_range: tuple[int, int] = (-30, 30)
    sample_overrides: tuple[tuple[str, int, int], ...] = ()
    sample_loop_bound: int = DEFAULT_SAMPLE_LOOP_BOUND
    scope_range: tuple[int, int] = DEFAULT_SCOPE_RANGE
    scope_overrides: tuple[tuple[str, int, int], ...] = ()
    loop_bound: int = DEFAULT_VALIDATION_LOOP_BOUND
    mode: Mode = Mode.EXHAUSTIVE
    validation_runs: int = 1000
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    keep_vars: KeepVars = KeepVars.NLA
    dual_amend: bool = False

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.models_per_cex < 1:
            raise ValueError("models_per_cex must be positive")

    def sample_box(self, prog: Program) -> InputBox:
        over = {n: (lo, hi) for n, lo, hi in self.sample_overrides}
        return InputBox.for_program(prog, *self.sample_range, over)

    def scope(self, prog: Program) -> ValidationScope:
        over = {n: (lo, hi) for n, lo, hi in self.scope_overrides}
        return ValidationScope(
            InputBox.for_program(prog, *self.scope_range, over),
            loop_bound=self.loop_bound, mode=self.mode, runs=self.validation_runs,
            seed=self.seed, budget=self.budget,
        )


@dataclass(frozen=True)
class Step:
    """One amendment: the counterexample, the generalised condition and the side before/after."""

    case: CexCase
    cex: Counterexample
    condition: C.Blia
    before: C.Blia
    after: C.Blia


@dataclass(frozen=True)
class RefineResult:
    loc: str
    nla: lang.BoolExpr
    b_pos: C.Blia
    b_neg: C.Blia
    status: Status
    iterations: int
    stages: tuple[str, ...]
    flags: tuple[str, ...] = ()
    history: tuple[Step, ...] = field(default=(), compare=True)
    note: str = ""

    @property
    def exact(self) -> bool:
        return self.status is Status.EXACT


# ------------------------------------------------------------ initial guess


def initial_guess(prog: Program, loc: str, cfg: RefineConfig) -> tuple[C.Blia, C.Blia, tuple[str, ...]]:
    """Learn both sides and keep the atoms that discriminate between them.

    Returns ``(pos, neg, flags)``; flags record an empty side.
    """
    box = cfg.sample_box(prog)
    try:
        s_pos, s_neg = collect_snapshots(prog, loc, cfg.sample_runs, box, cfg.seed,
                                         cfg.sample_loop_bound)
    except EmptySide as e:
        s_pos, s_neg = e.pos, e.neg
    if not s_pos.states and not s_neg.states:
        log.info("%s: site never reached while sampling", loc)
        return C.FALSE, C.TRUE, ("empty-pos", "empty-neg")
    if not s_pos.states:
        log.info("%s: no positive samples", loc)
        return C.FALSE, C.conj_of_atoms(learn(s_neg)), ("empty-pos",)
    if not s_neg.states:
        log.info("%s: no negative samples", loc)
        return C.conj_of_atoms(learn(s_pos)), C.FALSE, ("empty-neg",)
    a_pos = learn(s_pos)
    a_neg = learn(s_neg)
    common = set(a_pos) & set(a_neg)
    a_pos = [a for a in a_pos if a not in common]
    a_neg = [a for a in a_neg if a not in common]
    core = unsat_core(a_pos + a_neg)
    if core is not None:
        keep = set(core)
        a_pos = [a for a in a_pos if a in keep]
        a_neg = [a for a in a_neg if a in keep]
    return C.conj_of_atoms(a_pos), C.conj_of_atoms(a_neg), ()


# ----------------------------------------------------------- generalisation


class _Full(Exception):
    pass


def get_models(prog: Program, cex: Counterexample, m: Mapping[str, tuple[C.Blia, C.Blia]],
               cfg: RefineConfig) -> SampleSet:
    """States at ``cex.loc`` that raise the same case, starting with ``cex.error_state``.

    Inputs from the validation box are visited in a seeded random order;
    every visit of the site is checked, not only the first failing one.
    """
    names = prog.variables
    found: dict[tuple, None] = {tuple(cex.error_state[n] for n in names): None}
    limit = cfg.models_per_cex
    if limit <= 1:
        return SampleSet(tuple(names), (dict(cex.error_state),))
    pos, neg = m[cex.loc]
    fpos = compile_expr(C.to_boolexpr(pos))[0]
    fneg = compile_expr(C.to_boolexpr(neg))[0]
    case = cex.case

    def visit(loc, s, b):
        if loc != cex.loc or classify(bool(b), bool(fpos(s)), bool(fneg(s))) is not case:
            return
        found[tuple(s[v] for v in names)] = None
        if len(found) >= limit:
            raise _Full

    exe = Executable(prog)
    box = cfg.scope(prog).box
    rng = random.Random(cfg.seed)
    try:
        for inp in _shuffled_points(box, rng, cfg.budget):
            exe.run(inp, cfg.loop_bound, on_visit=visit)
    except _Full:
        pass
    return SampleSet(tuple(names), tuple(dict(zip(names, k)) for k in found))


def _shuffled_points(box: InputBox, rng: random.Random, budget: int):
    ranges = box.ranges
    size = box.size
    if size <= budget:
        order = list(range(size))
        rng.shuffle(order)
    else:
        order = (rng.randrange(size) for _ in range(budget))
    for idx in order:
        point = {}
        for name, lo, hi in reversed(ranges):
            width = hi - lo + 1
            point[name] = lo + idx % width
            idx //= width
        yield {n: point[n] for n, _, _ in ranges}


def _disjunct_atoms(d: C.Blia) -> list[LinAtom]:
    atoms = C.conj_atoms(d)
    if atoms is not None:
        return atoms
    if isinstance(d, C.BAnd):
        return [a.atom for a in d.args if isinstance(a, C.BAtom)]
    return []


def expand_core(b_cur: C.Blia, b_cex: Sequence[LinAtom]) -> Optional[list[LinAtom]]:
    """Unsat-core pair of the current side against the learned atoms.

    For a disjunctive side every disjunct must conflict with ``b_cex``; the
    union of the per-disjunct cores is returned, in ``b_cex`` order.
    """
    parts = C.disjuncts(b_cur)
    if not parts:
        return None
    chosen: set[LinAtom] = set()
    for d in parts:
        core = unsat_core_pair(_disjunct_atoms(d), list(b_cex))
        if core is None:
            return None
        chosen.update(core)
    return [a for a in b_cex if a in chosen]


def generalize_cex(b_cur: C.Blia, cex: Counterexample, direction: Direction, prog: Program,
                   m: Mapping[str, tuple[C.Blia, C.Blia]], cfg: RefineConfig) -> C.Blia:
    s = get_models(prog, cex, m, cfg)
    b_cex = learn(s)
    if direction is Direction.EXPAND:
        core = expand_core(b_cur, b_cex)
        if core is not None:
            return C.conj_of_atoms(core)
    return C.conj_of_atoms(b_cex)


def hull_or(b: C.Blia, b2: C.Blia, keep_vars) -> C.Blia:
    """Convex hull of two conjunctive conditions, else their disjunction."""
    a1, a2 = C.conj_atoms(b), C.conj_atoms(b2)
    if a1 is not None and a2 is not None:
        if not is_sat(a1):
            return b2
        if not is_sat(a2):
            return b
        h = hull_union(a1, a2, keep_vars)
        if h is not None:
            return C.conj_of_atoms(h.atoms)
    return C.disj(b, b2)


# -------------------------------------------------------------------- loop


def _keep_vars(prog: Program, cond, cfg: RefineConfig) -> set[str]:
    if cfg.keep_vars is KeepVars.ALL:
        return set(prog.variables)
    return lang.expr_vars(cond)


def amend(side: C.Blia, g: C.Blia, direction: Direction, keep: set[str]) -> C.Blia:
    if direction is Direction.EXPAND:
        return C.simplify(hull_or(side, g, keep))
    return C.simplify(C.conj(side, C.nnf(C.BNot(g))))


def dual_refine(prog: Program, loc: str, cfg: RefineConfig = RefineConfig()) -> RefineResult:
    cond = lang.site_condition(prog, loc)
    keep = _keep_vars(prog, cond, cfg)
    pos, neg, flags = initial_guess(prog, loc, cfg)
    scope = cfg.scope(prog)
    stages: list[str] = []
    history: list[Step] = []
    for it in range(cfg.max_iters):
        stages.append("v")
        m = {loc: (pos, neg)}
        try:
            verdict = validate(prog, m, scope)
        except BudgetExceeded as e:
            return RefineResult(loc, cond, pos, neg, Status.PARTIAL, it, tuple(stages), flags,
                                tuple(history), f"budget exceeded: {e}")
        if isinstance(verdict, Safe):
            return RefineResult(loc, cond, pos, neg, Status.EXACT, it + 1, tuple(stages), flags,
                                tuple(history))
        cex = verdict
        case = cex.case
        direction = Direction.EXPAND if case.expands else Direction.TRIM
        side = pos if case.side == "pos" else neg
        g = generalize_cex(side, cex, direction, prog, m, cfg)
        new = amend(side, g, direction, keep)
        history.append(Step(case, cex, g, side, new))
        log.debug("%s: %s -> %s", loc, case.value, C.to_text(new))
        if case.side == "pos":
            pos = new
            if cfg.dual_amend:
                neg = amend(neg, g, Direction.TRIM if direction is Direction.EXPAND else Direction.EXPAND, keep)
        else:
            neg = new
            if cfg.dual_amend:
                pos = amend(pos, g, Direction.TRIM if direction is Direction.EXPAND else Direction.EXPAND, keep)
        stages.append(case.code)
    return RefineResult(loc, cond, pos, neg, Status.PARTIAL, cfg.max_iters, tuple(stages), flags,
                        tuple(history), "iteration cap reached" if cfg.max_iters else "")


# ---------------------------------------------------------------- rewriting


def rewrite(prog: Program, results: Sequence[RefineResult], allow_partial: bool = False) -> Program:
    """Replace each refined site's condition by its positive side."""
    table: dict[str, C.Blia] = {}
    for r in results:
        if r.loc in table:
            raise ValueError(f"overlapping results for {r.loc}")
        if not r.exact and not allow_partial:
            raise ValueError(f"{r.loc} is partial; pass allow_partial to rewrite it anyway")
        table[r.loc] = r.b_pos
    known = {l for l, _ in lang.condition_sites(prog)}
    for l in table:
        if l not in known:
            raise KeyError(f"unknown location {l}")

    def fn(node: If):
        if node.loc in table:
            return If(C.to_boolexpr(table[node.loc]), node.then, node.orelse, node.loc)
        return node

    return lang.map_sites(prog, fn)


@dataclass(frozen=True)
class ProgramResult:
    program: Program  # normalised input
    results: tuple[RefineResult, ...]
    rewritten: Optional[Program]

    @property
    def all_exact(self) -> bool:
        return all(r.exact for r in self.results)


def refine_program(prog: Program, cfg: RefineConfig = RefineConfig(),
                   sites: Optional[Sequence[str]] = None,
                   allow_partial: bool = False) -> ProgramResult:
    """Refine every NLA site (or the listed ones), then check the combined map once."""
    prog = lang.normalize(prog)
    if sites is None:
        targets = [l for l, _ in lang.find_nla_sites(prog)]
    else:
        known = {l for l, _ in lang.condition_sites(prog)}
        for l in sites:
            if l not in known:
                raise KeyError(f"unknown location {l}")
        targets = list(sites)
    results = [dual_refine(prog, l, cfg) for l in targets]
    if results and all(r.exact for r in results):
        m = {r.loc: (r.b_pos, r.b_neg) for r in results}
        verdict = validate(prog, m, cfg.scope(prog))
        updated = []
        for r in results:
            stages = r.stages + ("v",)
            if isinstance(verdict, Counterexample) and verdict.loc == r.loc:
                r = replace(r, status=Status.PARTIAL, note="combined validation failed")
            updated.append(replace(r, stages=stages))
        results = updated
    rewritten = None
    if all(r.exact for r in results) or allow_partial:
        rewritten = rewrite(prog, results, allow_partial=allow_partial)
    return ProgramResult(prog, tuple(results), rewritten)
