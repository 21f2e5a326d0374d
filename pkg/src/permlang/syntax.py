"""Abstract syntax of PermLang: values, expressions, substitution and
right-to-left evaluation contexts.

Values are expressions (``isinstance(e, Val)``), so a thread that has finished
is simply a thread whose expression is a ``Val``.  All nodes are immutable;
structural equality and hashing are provided by :class:`Expr`, with the hash
cached on first use because configurations are hashed constantly during
exploration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional

Binder = Optional[str]  # None is the anonymous binder "_"


def node(cls):
    """Declare an AST node: frozen, equality and hashing inherited from Expr."""
    return dataclass(frozen=True, eq=False)(cls)


class Expr:
    # Names of fields holding sub-expressions, in declaration order.
    _kids: tuple[str, ...] = ()
    __match_args__: tuple[str, ...] = ()

    def _key(self) -> tuple:
        return tuple(getattr(self, f) for f in self.__match_args__)

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return NotImplemented if not isinstance(other, Expr) else False
        return self._key() == other._key()

    def __ne__(self, other: object) -> bool:
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self) -> int:
        d = self.__dict__
        h = d.get("_hash")
        if h is None:
            h = hash((type(self).__name__,) + self._key())
            d["_hash"] = h
        return h

    def children(self) -> tuple[Expr, ...]:
        return tuple(getattr(self, f) for f in self._kids)


class Val(Expr):
    """Base class of runtime values."""


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


@node
class LitInt(Val):
    n: int


@node
class LitBool(Val):
    b: bool


@node
class LitUnit(Val):
    pass


@node
class LitPoison(Val):
    pass


@node
class LitLoc(Val):
    loc: int


@node
class LitProph(Val):
    pid: int


@node
class RecV(Val):
    f: Binder
    x: Binder
    body: Expr


@node
class PairV(Val):
    left: Val
    right: Val


@node
class InjLV(Val):
    v: Val


@node
class InjRV(Val):
    v: Val


UNIT = LitUnit()
TRUE = LitBool(True)
FALSE = LitBool(False)

# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@node
class Var(Expr):
    name: str


@node
class Rec(Expr):
    f: Binder
    x: Binder
    body: Expr
    _kids = ("body",)


@node
class App(Expr):
    fn: Expr
    arg: Expr
    _kids = ("fn", "arg")


UNOPS = ("-",)
BINOPS = ("+", "-", "*", "+ₗ", "=", "<", "<=")


@node
class UnOp(Expr):
    op: str
    e: Expr
    _kids = ("e",)


@node
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    _kids = ("left", "right")


@node
class If(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    _kids = ("cond", "then", "else_")


@node
class Pair(Expr):
    left: Expr
    right: Expr
    _kids = ("left", "right")


@node
class Fst(Expr):
    e: Expr
    _kids = ("e",)


@node
class Snd(Expr):
    e: Expr
    _kids = ("e",)


@node
class InjL(Expr):
    e: Expr
    _kids = ("e",)


@node
class InjR(Expr):
    e: Expr
    _kids = ("e",)


@node
class Match(Expr):
    """``match: scrut with InjL x1 => left | InjR x2 => right end``.

    Branches behave like one-argument functions: the head step turns the
    selected branch into a closure applied to the payload.
    """

    scrut: Expr
    x1: Binder
    left: Expr
    x2: Binder
    right: Expr
    _kids = ("scrut", "left", "right")


@node
class Let(Expr):
    x: Binder
    bound: Expr
    body: Expr
    _kids = ("bound", "body")


@node
class Seq(Expr):
    first: Expr
    second: Expr
    _kids = ("first", "second")


@node
class Alloc(Expr):
    count: Expr
    init: Expr
    _kids = ("count", "init")


@node
class Free(Expr):
    e: Expr
    _kids = ("e",)


@node
class Load(Expr):
    e: Expr
    _kids = ("e",)


@node
class Store(Expr):
    loc: Expr
    value: Expr
    _kids = ("loc", "value")


@node
class CmpXchg(Expr):
    loc: Expr
    expected: Expr
    new: Expr
    _kids = ("loc", "expected", "new")


@node
class Xchg(Expr):
    loc: Expr
    value: Expr
    _kids = ("loc", "value")


@node
class FAA(Expr):
    loc: Expr
    delta: Expr
    _kids = ("loc", "delta")


@node
class Fork(Expr):
    e: Expr
    _kids = ("e",)


@node
class NewProph(Expr):
    pass


@node
class Resolve(Expr):
    e: Expr
    proph: Expr
    value: Expr
    _kids = ("e", "proph", "value")


@node
class Burn(Expr):
    """``burn cp receive count times lower in body``."""

    body: Expr
    cp: int
    count: Expr
    lower: int
    _kids = ("body", "count")


@node
class AtomicBlock(Expr):
    e: Expr
    _kids = ("e",)


@node
class Hole(Expr):
    pass


HOLE = Hole()

# ---------------------------------------------------------------------------
# Generic traversal
# ---------------------------------------------------------------------------


def is_value(e: Expr) -> bool:
    return isinstance(e, Val)


def replace_kid(e: Expr, field: str, new: Expr) -> Expr:
    args = [new if f == field else getattr(e, f) for f in e.__match_args__]
    return type(e)(*args)


def map_children(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    """Rebuild ``e`` with ``fn`` applied to each sub-expression.

    Returns ``e`` itself when nothing changed, which keeps cached data on
    shared subtrees alive.
    """
    kids = e._kids
    if not kids:
        return e
    changed = False
    args = []
    for f in e.__match_args__:
        v = getattr(e, f)
        if f in kids:
            nv = fn(v)
            if nv is not v:
                changed = True
                v = nv
        args.append(v)
    return type(e)(*args) if changed else e


def walk(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal of expressions and nested values."""
    stack = [e]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(value_children(cur) if isinstance(cur, Val) else cur.children()))


def value_children(v: Val) -> tuple[Expr, ...]:
    if isinstance(v, RecV):
        return (v.body,)
    if isinstance(v, PairV):
        return (v.left, v.right)
    if isinstance(v, (InjLV, InjRV)):
        return (v.v,)
    return ()


def _binders_of(e: Expr, field: str) -> tuple[Binder, ...]:
    """Variables bound in sub-expression ``field`` of ``e``."""
    if isinstance(e, (Rec, RecV)):
        return (e.f, e.x)
    if isinstance(e, Let) and field == "body":
        return (e.x,)
    if isinstance(e, Match):
        if field == "left":
            return (e.x1,)
        if field == "right":
            return (e.x2,)
    return ()


def free_vars(e: Expr) -> frozenset[str]:
    d = e.__dict__
    fv = d.get("_fv")
    if fv is not None:
        return fv
    if isinstance(e, Var):
        fv = frozenset((e.name,))
    elif isinstance(e, RecV):
        fv = free_vars(e.body) - {e.f, e.x}
    elif isinstance(e, (PairV, InjLV, InjRV)):
        fv = frozenset().union(*(free_vars(c) for c in value_children(e)))
    else:
        acc: set[str] = set()
        for f in e._kids:
            sub = free_vars(getattr(e, f))
            bound = _binders_of(e, f)
            acc.update(sub.difference(bound) if bound else sub)
        fv = frozenset(acc)
    d["_fv"] = fv
    return fv


def is_closed(e: Expr) -> bool:
    return not free_vars(e)


def subst(x: Binder, v: Val, e: Expr) -> Expr:
    """Capture-avoiding substitution of value ``v`` for variable ``x``.

    Values are closed (up to their own binders), so substitution never enters
    them and capture cannot happen; binders shadow.
    """
    if x is None or isinstance(e, Val) or x not in free_vars(e):
        return e
    if isinstance(e, Var):
        return v
    if isinstance(e, Rec):
        return Rec(e.f, e.x, subst(x, v, e.body))
    if isinstance(e, Let):
        body = e.body if e.x == x else subst(x, v, e.body)
        return Let(e.x, subst(x, v, e.bound), body)
    if isinstance(e, Match):
        left = e.left if e.x1 == x else subst(x, v, e.left)
        right = e.right if e.x2 == x else subst(x, v, e.right)
        return Match(subst(x, v, e.scrut), e.x1, left, e.x2, right)
    return map_children(e, lambda c: subst(x, v, c))


# ---------------------------------------------------------------------------
# Evaluation contexts
# ---------------------------------------------------------------------------

# Context positions of each node type, in evaluation (right-to-left) order.
_CTX_FIELDS: dict[type, tuple[str, ...]] = {
    App: ("arg", "fn"),
    UnOp: ("e",),
    BinOp: ("right", "left"),
    If: ("cond",),
    Pair: ("right", "left"),
    Fst: ("e",),
    Snd: ("e",),
    InjL: ("e",),
    InjR: ("e",),
    Match: ("scrut",),
    Let: ("bound",),
    Seq: ("first",),
    Alloc: ("init", "count"),
    Free: ("e",),
    Load: ("e",),
    Store: ("value", "loc"),
    CmpXchg: ("new", "expected", "loc"),
    Xchg: ("value", "loc"),
    FAA: ("delta", "loc"),
    Resolve: ("value", "proph", "e"),
    Burn: ("count",),
}


def _hole_field(e: Expr) -> Optional[str]:
    """The context position to descend into, or None if ``e`` is a head redex."""
    for f in _CTX_FIELDS.get(type(e), ()):
        child = getattr(e, f)
        if not isinstance(child, Val):
            if f == "e" and isinstance(e, Resolve) and _hole_field(child) is None:
                # ResolveWith only wraps non-empty contexts; an inner head
                # redex is stepped together with the resolution.
                return None
            return f
    return None


@dataclass(frozen=True)
class Frame:
    """One single-hole layer: ``node`` has ``HOLE`` at ``field``."""

    node: Expr
    field: str

    def fill(self, e: Expr) -> Expr:
        return replace_kid(self.node, self.field, e)


@dataclass(frozen=True)
class EvalContext:
    frames: tuple[Frame, ...] = ()  # outermost first

    def fill(self, e: Expr) -> Expr:
        for fr in reversed(self.frames):
            e = fr.fill(e)
        return e

    def as_expr(self) -> Expr:
        return self.fill(HOLE)

    def __len__(self) -> int:
        return len(self.frames)


EMPTY_CONTEXT = EvalContext()


def decompose(e: Expr) -> Optional[tuple[EvalContext, Expr]]:
    """Split ``e`` into an evaluation context and its head redex.

    Returns None for values.  Stuck redexes decompose normally; head_step
    decides whether they can reduce.
    """
    if isinstance(e, Val):
        return None
    frames = []
    while True:
        f = _hole_field(e)
        if f is None:
            return EvalContext(tuple(frames)), e
        frames.append(Frame(replace_kid(e, f, HOLE), f))
        e = getattr(e, f)


def fill(k: EvalContext, e: Expr) -> Expr:
    return k.fill(e)
