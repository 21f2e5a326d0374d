"""Instrumented operational semantics: head steps, the big-step evaluator used
by atomic blocks, primitive steps, thread-pool steps and scheduled runs."""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence, Union

from .multiset import EMPTY, Level, LevelMultiset, mult_less
from .syntax import (
    FALSE,
    TRUE,
    UNIT,
    FAA,
    Alloc,
    App,
    AtomicBlock,
    BinOp,
    Burn,
    CmpXchg,
    Expr,
    Fork,
    Free,
    Fst,
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
    Val,
    Var,
    Xchg,
    decompose,
    subst,
)

DEFAULT_ATOMIC_FUEL = 10**6


# ---------------------------------------------------------------------------
# State and configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class State:
    """Shared global state.  ``heap`` must never be mutated in place.

    ``blocks`` records every allocation as ``(base, size)``; freed cells are
    removed from ``heap`` but their block stays, so ``next_loc`` is the
    allocation high-water mark.
    """

    heap: dict = field(default_factory=dict)
    prophs: frozenset = frozenset()
    perms: LevelMultiset = EMPTY
    next_loc: int = 0
    blocks: tuple = ()

    def __hash__(self) -> int:
        return hash((frozenset(self.heap.items()), self.prophs, self.perms, self.next_loc, self.blocks))

    def store(self, loc: int, v: Val) -> State:
        heap = dict(self.heap)
        heap[loc] = v
        return State(heap, self.prophs, self.perms, self.next_loc, self.blocks)

    def with_perms(self, perms: LevelMultiset) -> State:
        return State(self.heap, self.prophs, perms, self.next_loc, self.blocks)


@dataclass(frozen=True)
class Config:
    threads: tuple[Expr, ...]
    state: State

    def all_values(self) -> bool:
        return all(isinstance(t, Val) for t in self.threads)

    def runnable(self) -> list[int]:
        return [i for i, t in enumerate(self.threads) if not isinstance(t, Val)]


def initial_config(main: Expr, perms: Iterable[Level] = ()) -> Config:
    return Config((main,), State(perms=LevelMultiset.of(perms)))


@dataclass(frozen=True)
class Observation:
    proph: int
    result: Val
    payload: Val


# ---------------------------------------------------------------------------
# Step results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stepped:
    expr: Expr
    state: State
    observations: tuple[Observation, ...] = ()
    forks: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Stuck:
    reason: str
    detail: str = ""


class IsValue:
    def __repr__(self) -> str:
        return "IsValue"


IS_VALUE = IsValue()
StepResult = Union[Stepped, Stuck, IsValue]

# Machine-readable stuck reasons.
BURN_MISSING = "burn-missing-permission"
BURN_NOT_LOWER = "burn-level-not-lower"
BURN_NEGATIVE = "burn-negative-count"
BURN_BAD_COUNT = "burn-count-not-integer"
UNALLOCATED = "unallocated-location"
INCOMPARABLE = "incomparable-equality"
ATOMIC_STUCK = "atomic-block-stuck"
ATOMIC_UNSUPPORTED = "atomic-unsupported"
ATOMIC_FUEL = "atomic-fuel"
NOT_A_CLOSURE = "not-a-closure"
BAD_OPERAND = "bad-operand"
FREE_VARIABLE = "free-variable"
BAD_ALLOC = "alloc-nonpositive"
RESOLVE_INNER = "resolve-inner-not-value"


# ---------------------------------------------------------------------------
# Pure helpers shared by small- and big-step
# ---------------------------------------------------------------------------


def is_unboxed(v: Val) -> bool:
    if isinstance(v, (LitInt, LitBool, LitUnit, LitPoison, LitLoc, LitProph)):
        return True
    if isinstance(v, (InjLV, InjRV)):
        return isinstance(v.v, (LitInt, LitBool, LitUnit, LitPoison, LitLoc, LitProph))
    return False


def compare_safe(v1: Val, v2: Val) -> bool:
    return is_unboxed(v1) or is_unboxed(v2)


def eval_unop(op: str, v: Val) -> Union[Val, Stuck]:
    if op == "-" and isinstance(v, LitInt):
        return LitInt(-v.n)
    return Stuck(BAD_OPERAND, f"unary {op}")


def eval_binop(op: str, v1: Val, v2: Val) -> Union[Val, Stuck]:
    if op == "=":
        if not compare_safe(v1, v2):
            return Stuck(INCOMPARABLE)
        return LitBool(v1 == v2)
    if op == "+ₗ":
        if isinstance(v1, LitLoc) and isinstance(v2, LitInt) and v1.loc + v2.n >= 0:
            return LitLoc(v1.loc + v2.n)
        return Stuck(BAD_OPERAND, op)
    if isinstance(v1, LitInt) and isinstance(v2, LitInt):
        a, b = v1.n, v2.n
        if op == "+":
            return LitInt(a + b)
        if op == "-":
            return LitInt(a - b)
        if op == "*":
            return LitInt(a * b)
        if op == "<":
            return LitBool(a < b)
        if op == "<=":
            return LitBool(a <= b)
    return Stuck(BAD_OPERAND, op)


def beta(fn: Val, arg: Val) -> Union[Expr, Stuck]:
    if not isinstance(fn, RecV):
        return Stuck(NOT_A_CLOSURE)
    return subst(fn.x, arg, subst(fn.f, fn, fn.body))


def burn_perms(s: State, cp: Level, n: Val, lower: Level) -> Union[LevelMultiset, Stuck]:
    """New permission stock after burning ``cp`` for ``n`` copies of ``lower``."""
    if not isinstance(n, LitInt):
        return Stuck(BURN_BAD_COUNT)
    if n.n < 0:
        return Stuck(BURN_NEGATIVE)
    if not lower < cp:
        return Stuck(BURN_NOT_LOWER)
    rest = s.perms.remove(cp)
    if rest is None:
        return Stuck(BURN_MISSING, f"level {cp}")
    new = rest.insert_n(lower, n.n)
    assert mult_less(new, s.perms), "burn must shrink the permission stock"
    return new


def _loc(s: State, v: Val) -> Union[int, Stuck]:
    if isinstance(v, LitLoc) and v.loc in s.heap:
        return v.loc
    return Stuck(UNALLOCATED, repr(v))


# ---------------------------------------------------------------------------
# Head steps
# ---------------------------------------------------------------------------


def head_step(e: Expr, s: State, fuel: int = DEFAULT_ATOMIC_FUEL) -> StepResult:
    """One head reduction of redex ``e`` in state ``s``."""
    if isinstance(e, Val):
        return IS_VALUE
    if isinstance(e, Rec):
        return Stepped(RecV(e.f, e.x, e.body), s)
    if isinstance(e, App):
        r = beta(e.fn, e.arg)
        return r if isinstance(r, Stuck) else Stepped(r, s)
    if isinstance(e, UnOp):
        r = eval_unop(e.op, e.e)
        return r if isinstance(r, Stuck) else Stepped(r, s)
    if isinstance(e, BinOp):
        r = eval_binop(e.op, e.left, e.right)
        return r if isinstance(r, Stuck) else Stepped(r, s)
    if isinstance(e, If):
        if isinstance(e.cond, LitBool):
            return Stepped(e.then if e.cond.b else e.else_, s)
        return Stuck(BAD_OPERAND, "if")
    if isinstance(e, Pair):
        return Stepped(PairV(e.left, e.right), s)
    if isinstance(e, (Fst, Snd)):
        if isinstance(e.e, PairV):
            return Stepped(e.e.left if isinstance(e, Fst) else e.e.right, s)
        return Stuck(BAD_OPERAND, type(e).__name__)
    if isinstance(e, InjL):
        return Stepped(InjLV(e.e), s)
    if isinstance(e, InjR):
        return Stepped(InjRV(e.e), s)
    if isinstance(e, Match):
        v = e.scrut
        if isinstance(v, InjLV):
            return Stepped(App(RecV(None, e.x1, e.left), v.v), s)
        if isinstance(v, InjRV):
            return Stepped(App(RecV(None, e.x2, e.right), v.v), s)
        return Stuck(BAD_OPERAND, "match")
    if isinstance(e, Let):
        return Stepped(subst(e.x, e.bound, e.body), s)
    if isinstance(e, Seq):
        return Stepped(e.second, s)
    if isinstance(e, Var):
        return Stuck(FREE_VARIABLE, e.name)
    if isinstance(e, Burn):
        perms = burn_perms(s, e.cp, e.count, e.lower)
        if isinstance(perms, Stuck):
            return perms
        return Stepped(e.body, s.with_perms(perms))
    if isinstance(e, AtomicBlock):
        r = atomic_eval(e.e, s, fuel)
        if isinstance(r, Stuck):
            return Stuck(ATOMIC_STUCK, f"{r.reason}: {r.detail}" if r.detail else r.reason)
        return Stepped(r[0], r[1])
    if isinstance(e, Fork):
        return Stepped(UNIT, s, forks=(e.e,))
    if isinstance(e, NewProph):
        pid = 0
        while pid in s.prophs:
            pid += 1
        return Stepped(LitProph(pid), State(s.heap, s.prophs | {pid}, s.perms, s.next_loc, s.blocks))
    if isinstance(e, Resolve):
        if not isinstance(e.proph, LitProph):
            return Stuck(BAD_OPERAND, "resolve")
        inner = head_step(e.e, s, fuel)
        if not isinstance(inner, Stepped):
            return inner if isinstance(inner, Stuck) else Stuck(RESOLVE_INNER)
        if not isinstance(inner.expr, Val):
            return Stuck(RESOLVE_INNER)
        obs = inner.observations + (Observation(e.proph.pid, inner.expr, e.value),)
        return Stepped(inner.expr, inner.state, obs, inner.forks)
    return _heap_step(e, s)


def _heap_step(e: Expr, s: State) -> StepResult:
    if isinstance(e, Alloc):
        if not isinstance(e.count, LitInt) or e.count.n <= 0:
            return Stuck(BAD_ALLOC)
        base, z = s.next_loc, e.count.n
        heap = dict(s.heap)
        for i in range(z):
            heap[base + i] = e.init
        st = State(heap, s.prophs, s.perms, base + z, s.blocks + ((base, z),))
        return Stepped(LitLoc(base), st)
    if isinstance(e, Free):
        loc = _loc(s, e.e)
        if isinstance(loc, Stuck):
            return loc
        heap = dict(s.heap)
        del heap[loc]
        return Stepped(UNIT, State(heap, s.prophs, s.perms, s.next_loc, s.blocks))
    if isinstance(e, Load):
        loc = _loc(s, e.e)
        return loc if isinstance(loc, Stuck) else Stepped(s.heap[loc], s)
    if isinstance(e, Store):
        loc = _loc(s, e.loc)
        return loc if isinstance(loc, Stuck) else Stepped(UNIT, s.store(loc, e.value))
    if isinstance(e, CmpXchg):
        loc = _loc(s, e.loc)
        if isinstance(loc, Stuck):
            return loc
        cur = s.heap[loc]
        if not compare_safe(cur, e.expected):
            return Stuck(INCOMPARABLE, "CmpXchg")
        if cur == e.expected:
            return Stepped(PairV(cur, TRUE), s.store(loc, e.new))
        return Stepped(PairV(cur, FALSE), s)
    if isinstance(e, Xchg):
        loc = _loc(s, e.loc)
        if isinstance(loc, Stuck):
            return loc
        return Stepped(s.heap[loc], s.store(loc, e.value))
    if isinstance(e, FAA):
        loc = _loc(s, e.loc)
        if isinstance(loc, Stuck):
            return loc
        cur = s.heap[loc]
        if not (isinstance(cur, LitInt) and isinstance(e.delta, LitInt)):
            return Stuck(BAD_OPERAND, "FAA")
        return Stepped(cur, s.store(loc, LitInt(cur.n + e.delta.n)))
    return Stuck(BAD_OPERAND, type(e).__name__)


# ---------------------------------------------------------------------------
# Big-step evaluation for atomic blocks
# ---------------------------------------------------------------------------


class _AtomicStuck(Exception):
    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(reason)
        self.stuck = Stuck(reason, detail)


class _Fuel:
    __slots__ = ("left",)

    def __init__(self, left: int) -> None:
        self.left = left

    def tick(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise _AtomicStuck(ATOMIC_FUEL)


_ATOMIC_UNSUPPORTED = (Fork, Alloc, Free, NewProph, Resolve, CmpXchg, Xchg, FAA, AtomicBlock)


def atomic_eval(e: Expr, s: State, fuel: int = DEFAULT_ATOMIC_FUEL) -> Union[tuple[Val, State], Stuck]:
    """Deterministic big-step evaluation of the atomic sub-language.

    Premises are evaluated right to left, threading the state the same way
    the small-step contexts do.  ``fuel`` bounds the number of rule
    applications; running out is reported as ``atomic-fuel``.
    """
    counter = _Fuel(fuel)
    limit = sys.getrecursionlimit()
    try:
        sys.setrecursionlimit(max(limit, 20000))
        return _big(e, s, counter)
    except _AtomicStuck as exc:
        return exc.stuck
    except RecursionError:
        return Stuck(ATOMIC_FUEL, "host recursion limit")
    finally:
        sys.setrecursionlimit(limit)


def _ok(r):
    if isinstance(r, Stuck):
        raise _AtomicStuck(r.reason, r.detail)
    return r


def _big(e: Expr, s: State, fuel: _Fuel) -> tuple[Val, State]:
    fuel.tick()
    if isinstance(e, Val):
        return e, s
    if isinstance(e, Rec):
        return RecV(e.f, e.x, e.body), s
    if isinstance(e, _ATOMIC_UNSUPPORTED):
        raise _AtomicStuck(ATOMIC_UNSUPPORTED, type(e).__name__)
    if isinstance(e, UnOp):
        v, s1 = _big(e.e, s, fuel)
        return _ok(eval_unop(e.op, v)), s1
    if isinstance(e, BinOp):
        v2, s1 = _big(e.right, s, fuel)
        v1, s2 = _big(e.left, s1, fuel)
        return _ok(eval_binop(e.op, v1, v2)), s2
    if isinstance(e, Load):
        v, s1 = _big(e.e, s, fuel)
        return s1.heap[_ok(_loc(s1, v))], s1
    if isinstance(e, Store):
        w, s1 = _big(e.value, s, fuel)
        v, s2 = _big(e.loc, s1, fuel)
        # Allocation is checked in the state current at write time; atomic
        # blocks cannot allocate or free, so this agrees with the pre-state.
        loc = _ok(_loc(s2, v))
        return UNIT, s2.store(loc, w)
    if isinstance(e, Burn):
        n, s1 = _big(e.count, s, fuel)
        perms = _ok(burn_perms(s1, e.cp, n, e.lower))
        return _big(e.body, s1.with_perms(perms), fuel)
    if isinstance(e, App):
        arg, s1 = _big(e.arg, s, fuel)
        fn, s2 = _big(e.fn, s1, fuel)
        return _big(_ok(beta(fn, arg)), s2, fuel)
    if isinstance(e, If):
        c, s1 = _big(e.cond, s, fuel)
        if not isinstance(c, LitBool):
            raise _AtomicStuck(BAD_OPERAND, "if")
        return _big(e.then if c.b else e.else_, s1, fuel)
    if isinstance(e, Pair):
        v2, s1 = _big(e.right, s, fuel)
        v1, s2 = _big(e.left, s1, fuel)
        return PairV(v1, v2), s2
    if isinstance(e, (Fst, Snd)):
        v, s1 = _big(e.e, s, fuel)
        if not isinstance(v, PairV):
            raise _AtomicStuck(BAD_OPERAND, type(e).__name__)
        return (v.left if isinstance(e, Fst) else v.right), s1
    if isinstance(e, InjL):
        v, s1 = _big(e.e, s, fuel)
        return InjLV(v), s1
    if isinstance(e, InjR):
        v, s1 = _big(e.e, s, fuel)
        return InjRV(v), s1
    if isinstance(e, Match):
        v, s1 = _big(e.scrut, s, fuel)
        if isinstance(v, InjLV):
            return _big(subst(e.x1, v.v, e.left), s1, fuel)
        if isinstance(v, InjRV):
            return _big(subst(e.x2, v.v, e.right), s1, fuel)
        raise _AtomicStuck(BAD_OPERAND, "match")
    if isinstance(e, Let):
        v, s1 = _big(e.bound, s, fuel)
        return _big(subst(e.x, v, e.body), s1, fuel)
    if isinstance(e, Seq):
        _, s1 = _big(e.first, s, fuel)
        return _big(e.second, s1, fuel)
    if isinstance(e, Var):
        raise _AtomicStuck(FREE_VARIABLE, e.name)
    raise _AtomicStuck(ATOMIC_UNSUPPORTED, type(e).__name__)


# ---------------------------------------------------------------------------
# Primitive and thread-pool steps
# ---------------------------------------------------------------------------


def prim_step(e: Expr, s: State, fuel: int = DEFAULT_ATOMIC_FUEL) -> StepResult:
    d = decompose(e)
    if d is None:
        return IS_VALUE
    k, redex = d
    r = head_step(redex, s, fuel)
    if isinstance(r, Stepped):
        return Stepped(k.fill(r.expr), r.state, r.observations, r.forks)
    return r


@dataclass(frozen=True)
class ThreadStuck:
    tid: int
    reason: str
    detail: str = ""


class NoStep:
    def __repr__(self) -> str:
        return "NoStep"


NO_STEP = NoStep()


@dataclass(frozen=True)
class TraceEntry:
    step: int
    tid: int
    observations: tuple[Observation, ...] = ()


def tp_step(c: Config, tid: int, fuel: int = DEFAULT_ATOMIC_FUEL):
    """Step thread ``tid``: returns ``(Config, observations)``, ThreadStuck or NO_STEP."""
    if not 0 <= tid < len(c.threads):
        raise IndexError(f"thread {tid} does not exist")
    r = prim_step(c.threads[tid], c.state, fuel)
    if isinstance(r, IsValue):
        return NO_STEP
    if isinstance(r, Stuck):
        return ThreadStuck(tid, r.reason, r.detail)
    threads = c.threads[:tid] + (r.expr,) + c.threads[tid + 1 :] + r.forks
    return Config(threads, r.state), r.observations


# ---------------------------------------------------------------------------
# Scheduled runs
# ---------------------------------------------------------------------------


class Scheduler:
    def choose(self, runnable: Sequence[int]) -> Optional[int]:
        raise NotImplementedError


class RoundRobin(Scheduler):
    def __init__(self) -> None:
        self.last = -1

    def choose(self, runnable: Sequence[int]) -> Optional[int]:
        for tid in runnable:
            if tid > self.last:
                self.last = tid
                return tid
        self.last = runnable[0]
        return runnable[0]


class SeededRandom(Scheduler):
    def __init__(self, seed: int) -> None:
        self.rng = random.Random(seed)

    def choose(self, runnable: Sequence[int]) -> Optional[int]:
        return self.rng.choice(list(runnable))


class Script(Scheduler):
    """Replays an explicit list of thread ids; the run ends when it runs out."""

    def __init__(self, tids: Iterable[int]) -> None:
        self.it: Iterator[int] = iter(list(tids))

    def choose(self, runnable: Sequence[int]) -> Optional[int]:
        tid = next(self.it, None)
        if tid is not None and tid not in runnable:
            raise ValueError(f"scripted thread {tid} is not runnable")
        return tid


@dataclass
class AllValues:
    values: tuple[Val, ...]
    state: State
    trace: list[TraceEntry]
    config: Config


@dataclass
class RunStuck:
    trace: list[TraceEntry]
    tid: int
    reason: str
    detail: str
    config: Config


@dataclass
class BudgetExhausted:
    trace: list[TraceEntry]
    config: Config


Outcome = Union[AllValues, RunStuck, BudgetExhausted]


def run(c: Config, schedule: Scheduler, budget: int = 100_000, on_step=None) -> Outcome:
    """Run ``c`` under ``schedule`` for at most ``budget`` steps.

    ``on_step(before, after, tid)`` is called after every successful step.
    """
    trace: list[TraceEntry] = []
    for step in range(budget + 1):
        runnable = c.runnable()
        if not runnable:
            return AllValues(c.threads, c.state, trace, c)  # type: ignore[arg-type]
        if step == budget:
            break
        tid = schedule.choose(runnable)
        if tid is None:
            break
        r = tp_step(c, tid)
        if isinstance(r, ThreadStuck):
            trace.append(TraceEntry(step, tid))
            return RunStuck(trace, tid, r.reason, r.detail, c)
        after, obs = r
        trace.append(TraceEntry(step, tid, obs))
        if on_step is not None:
            on_step(c, after, tid)
        c = after
    return BudgetExhausted(trace, c)
