"""Concrete syntax of ``.plt`` files: tokenizer, recursive-descent parser and
pretty-printer.

A program file is a header followed by one expression::

    level STACK_OP = 6;
    level CP_TRY = 3;
    permissions [STACK_OP, STACK_OP];
    let: f := rec: f x := burn CP_TRY in f x in ...

Operator precedence, loosest first: ``;;`` (right-assoc), binding forms
(``let:``, ``if:``, ``rec:``, ``fun:``, ``burn``) which extend as far right as
possible, ``<-``, comparisons, additive, ``*``, prefix operators (``-`` ``!``
``Fst`` ``Snd`` ``InjL`` ``InjR`` ``SOME`` ``ref``), application, atoms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .multiset import Level, LevelMultiset
from .syntax import (
    FAA,
    Alloc,
    App,
    AtomicBlock,
    BinOp,
    Binder,
    Burn,
    CmpXchg,
    Expr,
    Fork,
    Free,
    Fst,
    Hole,
    If,
    InjL,
    InjLV,
    InjR,
    InjRV,
    Let,
    LitBool,
    LitInt,
    LitLoc,
    LitPoison,
    LitProph,
    LitUnit,
    Load,
    Match,
    NewProph,
    Pair,
    PairV,
    Rec,
    RecV,
    Resolve,
    Seq,
    Snd,
    Store,
    UnOp,
    Var,
    Xchg,
    free_vars,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0) -> None:
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg, self.line, self.col = msg, line, col


@dataclass
class ProgramFile:
    level_decls: list[tuple[str, Level]] = field(default_factory=list)
    init_perms: LevelMultiset = field(default_factory=LevelMultiset)
    main: Expr = field(default_factory=LitUnit)

    @property
    def levels(self) -> dict[str, Level]:
        return dict(self.level_decls)

    def level_names(self) -> dict[Level, str]:
        names: dict[Level, str] = {}
        for name, v in self.level_decls:
            names.setdefault(v, name)
        return names


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "then", "else", "in", "with", "end", "burn", "receive", "times", "atomic",
    "fork", "free", "ref", "AllocN", "CAS", "CmpXchg", "XCHG", "FAA", "newproph",
    "resolve", "at", "to", "Fst", "Snd", "InjL", "InjR", "NONE", "SOME", "level",
    "permissions", "_",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<kwcolon>(?:rec|fun|let|if|match):(?!=))
  | (?P<lit>\#(?:\(\)|true|false|poison|-?\d+|l\d+|p\d+))
  | (?P<qident>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<nat>\d+)
  | (?P<punct>:=|;;|=>|<-|<=|\+ₗ|[()\[\],;|!+\-*<=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # kw, lit, ident, nat, punct, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind, s = m.lastgroup, m.group()
        col = pos - line_start + 1
        if kind == "kwcolon":
            toks.append(Token("kw", s, line, col))
        elif kind == "qident":
            toks.append(Token("ident", s[1:-1], line, col))
        elif kind == "ident":
            toks.append(Token("kw" if s in KEYWORDS else "ident", s, line, col))
        elif kind != "ws":
            toks.append(Token(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_BINDING_KWS = {"let:", "if:", "rec:", "fun:", "burn"}
_PREFIX = {"-", "!", "Fst", "Snd", "InjL", "InjR", "SOME", "ref"}
_ATOM_START_KW = {"atomic", "fork", "free", "CAS", "CmpXchg", "XCHG", "FAA", "AllocN",
                  "newproph", "resolve", "NONE", "match:"}


class _Parser:
    def __init__(self, text: str, levels: Optional[dict[str, Level]] = None) -> None:
        self.toks = tokenize(text)
        self.i = 0
        self.levels = levels
        self.declared: list[tuple[str, Level]] = []

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("kw", "punct")

    def error(self, msg: str, tok: Optional[Token] = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def binder(self) -> Binder:
        if self.accept("_"):
            return None
        return self.ident()

    def level(self) -> Level:
        t = self.tok
        if t.kind == "nat":
            self.i += 1
            return int(t.text)
        name = self.ident()
        if self.levels is None or name not in self.levels:
            raise self.error(f"undeclared level {name!r}", t)
        return self.levels[name]

    # -- program -------------------------------------------------------------

    def program(self) -> ProgramFile:
        decls: list[tuple[str, Level]] = []
        self.levels = {}
        while self.at("level"):
            self.i += 1
            tok = self.tok
            name = self.ident()
            if name in self.levels:
                raise self.error(f"level {name!r} declared twice", tok)
            self.expect("=")
            nat = self.tok
            if nat.kind != "nat":
                raise self.error("expected a natural number")
            self.i += 1
            self.expect(";")
            self.levels[name] = int(nat.text)
            decls.append((name, int(nat.text)))
        self.declared = decls
        perms: list[Level] = []
        if self.accept("permissions"):
            self.expect("[")
            if not self.at("]"):
                perms.append(self.level())
                while self.accept(","):
                    perms.append(self.level())
            self.expect("]")
            self.expect(";")
        start = self.tok
        main = self.expr()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        fv = free_vars(main)
        if fv:
            raise ParseError(f"program is not closed: free variable(s) {', '.join(sorted(fv))}",
                             start.line, start.col)
        return ProgramFile(decls, LevelMultiset.of(perms), main)

    # -- expressions ---------------------------------------------------------

    def expr(self) -> Expr:
        lhs = self.store()
        if self.accept(";;"):
            return Seq(lhs, self.expr())
        return lhs

    def store(self) -> Expr:
        if self.tok.kind == "kw" and self.tok.text in _BINDING_KWS:
            return self.binding()
        lhs = self.cmp()
        if self.accept("<-"):
            return Store(lhs, self.store())
        return lhs

    def binding(self) -> Expr:
        t = self.tok
        self.i += 1
        if t.text in ("rec:", "fun:"):
            f = self.binder() if t.text == "rec:" else None
            params = [self.binder()]
            while not self.at(":="):
                params.append(self.binder())
            self.expect(":=")
            body = self.expr()
            for x in reversed(params[1:]):
                body = Rec(None, x, body)
            return Rec(f, params[0], body)
        if t.text == "let:":
            x = self.binder()
            self.expect(":=")
            bound = self.expr()
            self.expect("in")
            return Let(x, bound, self.expr())
        if t.text == "if:":
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            return If(c, a, self.expr())
        # burn
        cp = self.level()
        if self.accept("receive"):
            count = self.expr()
            self.expect("times")
            lower = self.level()
        else:
            count, lower = LitInt(0), self.default_lower(cp, t)
        self.expect("in")
        return Burn(self.expr(), cp, count, lower)

    def default_lower(self, cp: Level, tok: Token) -> Level:
        if cp == 0:
            raise self.error("a burn at level 0 cannot omit its receive clause", tok)
        return default_lower_level(cp, self.levels or {})

    def cmp(self) -> Expr:
        lhs = self.add()
        for op in ("=", "<=", "<"):
            if self.accept(op):
                return BinOp(op, lhs, self.add())
        return lhs

    def add(self) -> Expr:
        e = self.mul()
        while self.tok.kind == "punct" and self.tok.text in ("+", "-", "+ₗ"):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.mul())
        return e

    def mul(self) -> Expr:
        e = self.unary()
        while self.accept("*"):
            e = BinOp("*", e, self.unary())
        return e

    def unary(self) -> Expr:
        t = self.tok
        if t.kind in ("kw", "punct") and t.text in _PREFIX:
            self.i += 1
            e = self.unary()
            if t.text == "-":
                return UnOp("-", e)
            if t.text == "!":
                return Load(e)
            if t.text == "ref":
                return Alloc(LitInt(1), e)
            return {"Fst": Fst, "Snd": Snd, "InjL": InjL, "InjR": InjR, "SOME": InjR}[t.text](e)
        return self.app()

    def _starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("lit", "ident"):
            return True
        if t.kind == "punct":
            return t.text == "("
        return t.kind == "kw" and t.text in _ATOM_START_KW

    def app(self) -> Expr:
        e = self.atom()
        while self._starts_atom():
            e = App(e, self.atom())
        return e

    def args(self, n: int) -> list[Expr]:
        self.expect("(")
        out = [self.expr()]
        for _ in range(n - 1):
            self.expect(",")
            out.append(self.expr())
        self.expect(")")
        return out

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "lit":
            self.i += 1
            return _literal(t.text)
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        if self.accept("("):
            e = self.expr()
            while self.accept(","):
                e = Pair(e, self.expr())
            self.expect(")")
            return e
        kw = t.text if t.kind == "kw" else None
        if kw == "NONE":
            self.i += 1
            return InjL(LitUnit())
        if kw == "newproph":
            self.i += 1
            return NewProph()
        if kw == "atomic":
            self.i += 1
            return AtomicBlock(*self.args(1))
        if kw == "fork":
            self.i += 1
            return Fork(*self.args(1))
        if kw == "free":
            self.i += 1
            return Free(*self.args(1))
        if kw == "CAS":
            self.i += 1
            return Snd(CmpXchg(*self.args(3)))
        if kw == "CmpXchg":
            self.i += 1
            return CmpXchg(*self.args(3))
        if kw == "XCHG":
            self.i += 1
            return Xchg(*self.args(2))
        if kw == "FAA":
            self.i += 1
            return FAA(*self.args(2))
        if kw == "AllocN":
            self.i += 1
            return Alloc(*self.args(2))
        if kw == "resolve":
            self.i += 1
            e1 = self.atom()
            self.expect("at")
            e2 = self.atom()
            self.expect("to")
            return Resolve(e1, e2, self.atom())
        if kw == "match:":
            return self.match()
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def match(self) -> Expr:
        self.expect("match:")
        scrut = self.expr()
        self.expect("with")
        if self.accept("NONE"):
            x1: Binder = None
        else:
            self.expect("InjL")
            x1 = self.binder()
        self.expect("=>")
        left = self.expr()
        self.expect("|")
        if not self.accept("SOME"):
            self.expect("InjR")
        x2 = self.binder()
        self.expect("=>")
        right = self.expr()
        self.expect("end")
        return Match(scrut, x1, left, x2, right)


def _literal(text: str) -> Expr:
    body = text[1:]
    if body == "()":
        return LitUnit()
    if body in ("true", "false"):
        return LitBool(body == "true")
    if body == "poison":
        return LitPoison()
    if body[0] == "l":
        return LitLoc(int(body[1:]))
    if body[0] == "p":
        return LitProph(int(body[1:]))
    return LitInt(int(body))


def default_lower_level(cp: Level, levels: dict[str, Level]) -> Level:
    """Lower level used when ``receive`` is omitted: the lowest declared level
    below ``cp``, else 0."""
    below = [v for v in levels.values() if v < cp]
    return min(below) if below else 0


def parse(text: str) -> ProgramFile:
    return _Parser(text).program()


def parse_expr(text: str, levels: Optional[dict[str, Level]] = None) -> Expr:
    """Parse a bare expression (no header, closedness not required)."""
    p = _Parser(text, levels if levels is not None else {})
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return e


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*\Z")

# Precedence levels; a node printed where a tighter level is required gets
# parenthesised.
SEQ, STORE, CMP, ADD, MUL, PREFIX, APP, ATOM = range(8)


class Printer:
    def __init__(self, level_names: Optional[dict[Level, str]] = None,
                 levels: Optional[dict[str, Level]] = None) -> None:
        self.level_names = level_names or {}
        self.levels = levels or {}

    def ident(self, name: str) -> str:
        if _IDENT_RE.match(name) and name not in KEYWORDS:
            return name
        return f'"{name}"'

    def binder(self, b: Binder) -> str:
        return "_" if b is None else self.ident(b)

    def level(self, v: Level) -> str:
        return self.level_names.get(v, str(v))

    def expr(self, e: Expr, prec: int = SEQ) -> str:
        text, own = self._render(e)
        return f"({text})" if own < prec else text

    def _render(self, e: Expr) -> tuple[str, int]:
        p = self.expr
        if isinstance(e, LitInt):
            return f"#{e.n}", ATOM
        if isinstance(e, LitBool):
            return ("#true" if e.b else "#false"), ATOM
        if isinstance(e, LitUnit):
            return "#()", ATOM
        if isinstance(e, LitPoison):
            return "#poison", ATOM
        if isinstance(e, LitLoc):
            return f"#l{e.loc}", ATOM
        if isinstance(e, LitProph):
            return f"#p{e.pid}", ATOM
        if isinstance(e, Var):
            return self.ident(e.name), ATOM
        if isinstance(e, Hole):
            return "•", ATOM
        if isinstance(e, (Rec, RecV)):
            head = f"rec: {self.binder(e.f)}" if e.f is not None else "fun:"
            return f"{head} {self.binder(e.x)} := {p(e.body)}", SEQ
        if isinstance(e, (Pair, PairV)):
            return f"({p(e.left)}, {p(e.right)})", ATOM
        if isinstance(e, InjLV):
            return f"InjL {p(e.v, PREFIX)}", PREFIX
        if isinstance(e, InjRV):
            return f"InjR {p(e.v, PREFIX)}", PREFIX
        if isinstance(e, App):
            return f"{p(e.fn, APP)} {p(e.arg, ATOM)}", APP
        if isinstance(e, UnOp):
            return f"{e.op} {p(e.e, PREFIX)}", PREFIX
        if isinstance(e, BinOp):
            if e.op in ("=", "<", "<="):
                return f"{p(e.left, ADD)} {e.op} {p(e.right, ADD)}", CMP
            if e.op == "*":
                return f"{p(e.left, MUL)} * {p(e.right, PREFIX)}", MUL
            return f"{p(e.left, ADD)} {e.op} {p(e.right, MUL)}", ADD
        if isinstance(e, If):
            return f"if: {p(e.cond)} then {p(e.then)} else {p(e.else_)}", SEQ
        if isinstance(e, Let):
            return f"let: {self.binder(e.x)} := {p(e.bound)} in {p(e.body)}", SEQ
        if isinstance(e, Seq):
            return f"{p(e.first, STORE)};; {p(e.second)}", SEQ
        if isinstance(e, Fst):
            return f"Fst {p(e.e, PREFIX)}", PREFIX
        if isinstance(e, Snd):
            if isinstance(e.e, CmpXchg):
                c = e.e
                return f"CAS({p(c.loc)}, {p(c.expected)}, {p(c.new)})", ATOM
            return f"Snd {p(e.e, PREFIX)}", PREFIX
        if isinstance(e, InjL):
            return f"InjL {p(e.e, PREFIX)}", PREFIX
        if isinstance(e, InjR):
            return f"InjR {p(e.e, PREFIX)}", PREFIX
        if isinstance(e, Match):
            return (f"match: {p(e.scrut)} with InjL {self.binder(e.x1)} => {p(e.left)}"
                    f" | InjR {self.binder(e.x2)} => {p(e.right)} end"), ATOM
        if isinstance(e, Alloc):
            if e.count == LitInt(1):
                return f"ref {p(e.init, PREFIX)}", PREFIX
            return f"AllocN({p(e.count)}, {p(e.init)})", ATOM
        if isinstance(e, Free):
            return f"free({p(e.e)})", ATOM
        if isinstance(e, Load):
            return f"!{p(e.e, PREFIX)}", PREFIX
        if isinstance(e, Store):
            return f"{p(e.loc, CMP)} <- {p(e.value, STORE)}", STORE
        if isinstance(e, CmpXchg):
            return f"CmpXchg({p(e.loc)}, {p(e.expected)}, {p(e.new)})", ATOM
        if isinstance(e, Xchg):
            return f"XCHG({p(e.loc)}, {p(e.value)})", ATOM
        if isinstance(e, FAA):
            return f"FAA({p(e.loc)}, {p(e.delta)})", ATOM
        if isinstance(e, Fork):
            return f"fork({p(e.e)})", ATOM
        if isinstance(e, NewProph):
            return "newproph", ATOM
        if isinstance(e, Resolve):
            return f"resolve {p(e.e, ATOM)} at {p(e.proph, ATOM)} to {p(e.value, ATOM)}", ATOM
        if isinstance(e, Burn):
            head = f"burn {self.level(e.cp)}"
            implicit = (e.count == LitInt(0) and e.cp > 0
                        and e.lower == default_lower_level(e.cp, self.levels))
            if not implicit:
                head += f" receive {p(e.count)} times {self.level(e.lower)}"
            return f"{head} in {p(e.body)}", SEQ
        if isinstance(e, AtomicBlock):
            return f"atomic({p(e.e)})", ATOM
        raise TypeError(f"cannot print {type(e).__name__}")


def print_expr(e: Expr, level_names: Optional[dict[Level, str]] = None,
               levels: Optional[dict[str, Level]] = None) -> str:
    return Printer(level_names, levels).expr(e)


def print_program(p: ProgramFile) -> str:
    lines = [f"level {name} = {v};" for name, v in p.level_decls]
    names = p.level_names()
    if p.init_perms or lines:
        lines.append("permissions [" + ", ".join(names.get(v, str(v)) for v in p.init_perms) + "];")
    lines.append(Printer(names, p.levels).expr(p.main))
    return "\n".join(lines) + "\n"
