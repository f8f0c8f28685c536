"""AST, parser and printer for the ``.imp`` mini language.

Programs are a list of ``int`` declarations followed by statements over
signed 64-bit integers.  Branch conditions of ``if`` and ``while`` carry
location labels ``L1, L2, ...`` assigned in pre-order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        if line:
            message = f"{line}:{col}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # "+", "-", "*"
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Neg:
    operand: "IntExpr"


IntExpr = Union[Const, Var, BinOp, Neg]


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Not:
    operand: "BoolExpr"


@dataclass(frozen=True)
class And:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Or:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Compare:
    op: str  # one of CMP_OPS
    left: IntExpr
    right: IntExpr


BoolExpr = Union[BoolConst, Not, And, Or, Compare]

CMP_OPS = ("<", "<=", "==", "!=", ">=", ">")

TRUE = BoolConst(True)
FALSE = BoolConst(False)


# ----------------------------------------------------------------- statements


@dataclass(frozen=True)
class Assign:
    name: str
    expr: IntExpr


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Break:
    pass


@dataclass(frozen=True)
class If:
    cond: BoolExpr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()
    loc: Optional[str] = None


@dataclass(frozen=True)
class While:
    cond: BoolExpr
    body: tuple["Stmt", ...]
    loc: Optional[str] = None


@dataclass(frozen=True)
class Snap:
    """Records the current state for ``loc`` on side ``pos`` or ``neg``."""

    loc: str
    side: str


@dataclass(frozen=True)
class ErrorStmt:
    """Halts execution reporting ``case`` at ``loc``."""

    case: str
    loc: str


Stmt = Union[Assign, Skip, Break, If, While, Snap, ErrorStmt]


@dataclass(frozen=True)
class Decl:
    name: str
    init: Optional[int]  # None marks a nondeterministic input

    @property
    def is_input(self) -> bool:
        return self.init is None


@dataclass(frozen=True)
class Program:
    decls: tuple[Decl, ...]
    body: tuple[Stmt, ...] = field(default=())

    @property
    def variables(self) -> list[str]:
        return [d.name for d in self.decls]

    @property
    def inputs(self) -> list[str]:
        return [d.name for d in self.decls if d.is_input]


# -------------------------------------------------------------------- lexing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>&&|\|\||==|!=|<=|>=|[-+*()<>{};=!@])
    """,
    re.VERBOSE,
)

KEYWORDS = {"int", "if", "else", "while", "skip", "break", "true", "false"}


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "op", "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            tokens.append(Token("kw" if m.group() in KEYWORDS else "ident", m.group(), line, col))
        elif kind in ("int", "op"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ------------------------------------------------------------------- parsing


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.declared: dict[str, Decl] = {}

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("op", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            found = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", t.line, t.col)
        return self.advance()

    def error(self, message: str) -> ParseError:
        t = self.peek()
        return ParseError(message, t.line, t.col)

    def ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        return self.advance()

    # program structure

    def program(self) -> Program:
        decls = []
        while self.at("int"):
            decls.append(self.decl())
        body = []
        while self.peek().kind != "eof":
            body.append(self.stmt())
        return Program(tuple(decls), tuple(body))

    def decl(self) -> Decl:
        self.expect("int")
        name_tok = self.ident()
        name = name_tok.text
        if name in self.declared:
            raise ParseError(f"duplicate declaration of {name!r}", name_tok.line, name_tok.col)
        init: Optional[int] = 0
        if self.at("="):
            self.advance()
            if self.at("*"):
                self.advance()
                init = None
            else:
                sign = 1
                if self.at("-"):
                    self.advance()
                    sign = -1
                t = self.peek()
                if t.kind != "int":
                    raise self.error("expected integer constant or '*'")
                self.advance()
                init = sign * int(t.text)
        self.expect(";")
        d = Decl(name, init)
        self.declared[name] = d
        return d

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        body = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise self.error("unterminated block")
            body.append(self.stmt())
        self.expect("}")
        return tuple(body)

    def stmt(self) -> Stmt:
        t = self.peek()
        if self.at("skip"):
            self.advance()
            self.expect(";")
            return Skip()
        if self.at("break"):
            self.advance()
            self.expect(";")
            return Break()
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.bexpr()
            self.expect(")")
            then = self.block()
            orelse: tuple[Stmt, ...] = ()
            if self.at("else"):
                self.advance()
                if self.at("if"):
                    orelse = (self.stmt(),)
                else:
                    orelse = self.block()
            return If(cond, then, orelse)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.bexpr()
            self.expect(")")
            return While(cond, self.block())
        if self.at("@"):
            return self.internal()
        if t.kind == "ident":
            name = self.use(self.advance())
            self.expect("=")
            expr = self.expr()
            self.expect(";")
            return Assign(name, expr)
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def internal(self) -> Stmt:
        self.expect("@")
        word = self.ident().text
        if word == "snap":
            loc = self.ident().text
            side = self.ident().text
            if side not in ("pos", "neg"):
                raise self.error("snapshot side must be pos or neg")
            self.expect(";")
            return Snap(loc, side)
        if word == "error":
            case = self.ident().text
            loc = self.ident().text
            self.expect(";")
            return ErrorStmt(case, loc)
        raise self.error(f"unknown internal statement @{word}")

    def use(self, tok: Token) -> str:
        if tok.text not in self.declared:
            raise ParseError(f"use of undeclared variable {tok.text!r}", tok.line, tok.col)
        return tok.text

    # boolean expressions

    def bexpr(self) -> BoolExpr:
        left = self.conjunction()
        while self.at("||"):
            self.advance()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> BoolExpr:
        left = self.bunary()
        while self.at("&&"):
            self.advance()
            left = And(left, self.bunary())
        return left

    def bunary(self) -> BoolExpr:
        if self.at("!"):
            self.advance()
            return Not(self.bunary())
        if self.at("true"):
            self.advance()
            return TRUE
        if self.at("false"):
            self.advance()
            return FALSE
        if self.at("(") and self._paren_is_boolean():
            self.advance()
            inner = self.bexpr()
            self.expect(")")
            return inner
        left = self.expr()
        t = self.peek()
        if t.kind != "op" or t.text not in CMP_OPS:
            raise self.error(f"expected comparison operator, found {t.text or 'end of input'!r}")
        self.advance()
        return Compare(t.text, left, self.expr())

    def _paren_is_boolean(self) -> bool:
        """Whether the parenthesis at the cursor opens a boolean expression."""
        depth = 0
        j = self.i
        while j < len(self.tokens):
            t = self.tokens[j]
            if t.kind == "op" and t.text == "(":
                depth += 1
            elif t.kind == "op" and t.text == ")":
                depth -= 1
                if depth == 0:
                    # "(e) CMP ..." means an arithmetic group
                    nxt = self.tokens[j + 1]
                    return not (nxt.kind == "op" and nxt.text in CMP_OPS + ("+", "-", "*"))
            elif depth >= 1 and (
                (t.kind == "op" and t.text in CMP_OPS + ("&&", "||", "!"))
                or (t.kind == "kw" and t.text in ("true", "false"))
            ):
                if depth == 1:
                    return True
            elif t.kind == "eof":
                return False
            j += 1
        return False

    # integer expressions

    def expr(self) -> IntExpr:
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> IntExpr:
        left = self.unary()
        while self.at("*"):
            self.advance()
            left = BinOp("*", left, self.unary())
        return left

    def unary(self) -> IntExpr:
        if self.at("-"):
            self.advance()
            if self.peek().kind == "int":
                return Const(-int(self.advance().text))
            return Neg(self.unary())
        t = self.peek()
        if t.kind == "int":
            self.advance()
            return Const(int(t.text))
        if t.kind == "ident":
            return Var(self.use(self.advance()))
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error(f"expected expression, found {t.text or 'end of input'!r}")


def parse(text: str) -> Program:
    """Parse a program and label its condition sites."""
    p = _Parser(text)
    prog = p.program()
    return label(prog)


def parse_bexpr(text: str, variables: Optional[list[str]] = None) -> BoolExpr:
    """Parse a standalone condition; ``variables`` restricts identifiers."""
    p = _Parser(text)
    names = variables if variables is not None else [
        t.text for t in p.tokens if t.kind == "ident"
    ]
    for n in names:
        p.declared.setdefault(n, Decl(n, 0))
    cond = p.bexpr()
    if p.peek().kind != "eof":
        raise p.error(f"trailing input {p.peek().text!r}")
    return cond


def parse_expr(text: str) -> IntExpr:
    p = _Parser(text)
    for t in p.tokens:
        if t.kind == "ident":
            p.declared.setdefault(t.text, Decl(t.text, 0))
    e = p.expr()
    if p.peek().kind != "eof":
        raise p.error(f"trailing input {p.peek().text!r}")
    return e


# ----------------------------------------------------------------- labelling


def label(prog: Program) -> Program:
    """Reassign ``L1, L2, ...`` to condition sites in pre-order.

    ``if`` conditions and ``while`` guards other than the literal ``true``
    are sites.
    """
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return f"L{counter[0]}"

    def stmts(body: tuple[Stmt, ...]) -> tuple[Stmt, ...]:
        return tuple(stmt(s) for s in body)

    def stmt(s: Stmt) -> Stmt:
        if isinstance(s, If):
            loc = fresh()
            return If(s.cond, stmts(s.then), stmts(s.orelse), loc)
        if isinstance(s, While):
            loc = None if s.cond == TRUE else fresh()
            return While(s.cond, stmts(s.body), loc)
        return s

    return Program(prog.decls, stmts(prog.body))


def normalize(prog: Program) -> Program:
    """Rewrite every ``while (e) {s}`` as ``while (true) { if (e) {s} else {break;} }``."""

    def stmts(body):
        return tuple(stmt(s) for s in body)

    def stmt(s):
        if isinstance(s, If):
            return If(s.cond, stmts(s.then), stmts(s.orelse), s.loc)
        if isinstance(s, While):
            body = stmts(s.body)
            if s.cond == TRUE:
                return While(TRUE, body, None)
            return While(TRUE, (If(s.cond, body, (Break(),)),), None)
        return s

    return label(Program(prog.decls, stmts(prog.body)))


def fold_loops(prog: Program) -> Program:
    """Inverse of ``normalize`` for loops of exactly the normalised shape.

    Labels are kept: the guard of the folded loop takes the label of the
    ``if`` it came from, which is also its pre-order position.
    """

    def stmts(body):
        return tuple(stmt(s) for s in body)

    def stmt(s):
        if isinstance(s, If):
            return If(s.cond, stmts(s.then), stmts(s.orelse), s.loc)
        if isinstance(s, While):
            body = stmts(s.body)
            if (s.cond == TRUE and len(body) == 1 and isinstance(body[0], If)
                    and body[0].orelse == (Break(),)):
                inner = body[0]
                return While(inner.cond, inner.then, inner.loc)
            return While(s.cond, body, s.loc)
        return s

    return Program(prog.decls, stmts(prog.body))


def iter_stmts(body: tuple[Stmt, ...]) -> Iterator[Stmt]:
    """Pre-order walk over statements."""
    for s in body:
        yield s
        if isinstance(s, If):
            yield from iter_stmts(s.then)
            yield from iter_stmts(s.orelse)
        elif isinstance(s, While):
            yield from iter_stmts(s.body)


def condition_sites(prog: Program) -> list[tuple[str, BoolExpr]]:
    out = []
    for s in iter_stmts(prog.body):
        if isinstance(s, (If, While)) and s.loc is not None:
            out.append((s.loc, s.cond))
    return out


def find_nla_sites(prog: Program) -> list[tuple[str, BoolExpr]]:
    """Sites whose condition contains a monomial of degree at least two."""
    return [(loc, c) for loc, c in condition_sites(prog) if bool_degree(c) >= 2]


def site_condition(prog: Program, loc: str) -> BoolExpr:
    for l, c in condition_sites(prog):
        if l == loc:
            return c
    raise KeyError(f"unknown location {loc}")


def map_sites(prog: Program, fn) -> Program:
    """Rebuild ``prog`` replacing each labelled ``if`` node ``s`` by ``fn(s)``.

    ``fn`` returns a statement or a tuple of statements; children are mapped
    before the parent.
    """

    def stmts(body):
        out: list[Stmt] = []
        for s in body:
            r = stmt(s)
            if isinstance(r, tuple):
                out.extend(r)
            else:
                out.append(r)
        return tuple(out)

    def stmt(s):
        if isinstance(s, If):
            node = If(s.cond, stmts(s.then), stmts(s.orelse), s.loc)
            return fn(node) if node.loc is not None else node
        if isinstance(s, While):
            return While(s.cond, stmts(s.body), s.loc)
        return s

    return Program(prog.decls, stmts(prog.body))


# -------------------------------------------------------------------- degree


def to_poly(e: IntExpr) -> dict[tuple[str, ...], int]:
    """Expand to monomials: sorted variable tuple -> coefficient."""
    if isinstance(e, Const):
        return {(): e.value} if e.value else {}
    if isinstance(e, Var):
        return {(e.name,): 1}
    if isinstance(e, Neg):
        return {m: -c for m, c in to_poly(e.operand).items()}
    a, b = to_poly(e.left), to_poly(e.right)
    out: dict[tuple[str, ...], int] = {}
    if e.op == "*":
        for ma, ca in a.items():
            for mb, cb in b.items():
                m = tuple(sorted(ma + mb))
                out[m] = out.get(m, 0) + ca * cb
    else:
        sign = 1 if e.op == "+" else -1
        out = dict(a)
        for m, c in b.items():
            out[m] = out.get(m, 0) + sign * c
    return {m: c for m, c in out.items() if c}


def degree(e: IntExpr) -> int:
    return max((len(m) for m in to_poly(e)), default=0)


def bool_degree(b: BoolExpr) -> int:
    if isinstance(b, BoolConst):
        return 0
    if isinstance(b, Not):
        return bool_degree(b.operand)
    if isinstance(b, (And, Or)):
        return max(bool_degree(b.left), bool_degree(b.right))
    return degree(BinOp("-", b.left, b.right))


def expr_vars(e) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Not)):
        return expr_vars(e.operand)
    if isinstance(e, BoolConst):
        return set()
    return expr_vars(e.left) | expr_vars(e.right)


# ------------------------------------------------------------------ printing

_PREC = {"+": 1, "-": 1, "*": 2}


def pretty_expr(e: IntExpr, prec: int = 0) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        if isinstance(e.operand, Var):
            return f"-{e.operand.name}"
        return f"-({pretty_expr(e.operand)})"
    p = _PREC[e.op]
    left = pretty_expr(e.left, p)
    right = pretty_expr(e.right, p + 1)
    text = f"{left} {e.op} {right}"
    return f"({text})" if p < prec else text


def pretty_bexpr(b: BoolExpr, prec: int = 0) -> str:
    if isinstance(b, BoolConst):
        return "true" if b.value else "false"
    if isinstance(b, Not):
        return f"!({pretty_bexpr(b.operand)})"
    if isinstance(b, Compare):
        return f"{pretty_expr(b.left)} {b.op} {pretty_expr(b.right)}"
    if isinstance(b, And):
        text = f"{pretty_bexpr(b.left, 2)} && {pretty_bexpr(b.right, 3)}"
        return f"({text})" if prec > 2 else text
    text = f"{pretty_bexpr(b.left, 1)} || {pretty_bexpr(b.right, 2)}"
    return f"({text})" if prec > 1 else text


def _pretty_block(body: tuple[Stmt, ...], indent: int, out: list[str]) -> None:
    pad = "  " * indent
    for s in body:
        if isinstance(s, Assign):
            out.append(f"{pad}{s.name} = {pretty_expr(s.expr)};")
        elif isinstance(s, Skip):
            out.append(f"{pad}skip;")
        elif isinstance(s, Break):
            out.append(f"{pad}break;")
        elif isinstance(s, Snap):
            out.append(f"{pad}@snap {s.loc} {s.side};")
        elif isinstance(s, ErrorStmt):
            out.append(f"{pad}@error {s.case} {s.loc};")
        elif isinstance(s, While):
            out.append(f"{pad}while ({pretty_bexpr(s.cond)}) {{")
            _pretty_block(s.body, indent + 1, out)
            out.append(f"{pad}}}")
        elif isinstance(s, If):
            out.append(f"{pad}if ({pretty_bexpr(s.cond)}) {{")
            _pretty_block(s.then, indent + 1, out)
            if s.orelse:
                out.append(f"{pad}}} else {{")
                _pretty_block(s.orelse, indent + 1, out)
            out.append(f"{pad}}}")
        else:  # pragma: no cover
            raise TypeError(s)


def pretty(prog: Program) -> str:
    out = []
    for d in prog.decls:
        init = "*" if d.init is None else str(d.init)
        out.append(f"int {d.name} = {init};")
    _pretty_block(prog.body, 0, out)
    return "\n".join(out) + "\n"


def strip_locs(prog: Program) -> Program:
    """Copy with every location label removed (for comparisons)."""

    def stmts(body):
        return tuple(stmt(s) for s in body)

    def stmt(s):
        if isinstance(s, If):
            return If(s.cond, stmts(s.then), stmts(s.orelse), None)
        if isinstance(s, While):
            return While(s.cond, stmts(s.body), None)
        return s

    return Program(prog.decls, stmts(prog.body))
