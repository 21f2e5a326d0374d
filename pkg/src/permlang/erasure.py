"""Erasure: strip Burns and unwrap atomic blocks left holding one instruction."""

from __future__ import annotations

from typing import Union

from .multiset import EMPTY
from .semantics import Config, State
from .syntax import (
    FAA,
    Alloc,
    App,
    AtomicBlock,
    Burn,
    CmpXchg,
    Expr,
    Fork,
    Free,
    InjLV,
    InjRV,
    Load,
    NewProph,
    PairV,
    RecV,
    Resolve,
    Store,
    Val,
    Var,
    Xchg,
    map_children,
    walk,
)

# Constructs that may write, or (App, Resolve, AtomicBlock) may reach code
# that writes.  A Burn count containing any of them is refused.
_EFFECTFUL = (Store, CmpXchg, Xchg, FAA, Alloc, Free, Fork, NewProph, App, Resolve, AtomicBlock)
_INSTRUCTIONS = (Load, Store, CmpXchg, Xchg, FAA)


class ErasureError(Exception):
    def __init__(self, burn: Burn, offending: Expr) -> None:
        super().__init__(
            f"refusing to erase burn at level {burn.cp}: its count expression contains "
            f"{type(offending).__name__}, which may have side effects"
        )
        self.burn = burn
        self.offending = offending


def _check_count(b: Burn) -> None:
    for sub in walk(b.count):
        if isinstance(sub, _EFFECTFUL):
            raise ErasureError(b, sub)


def is_single_instruction(e: Expr) -> bool:
    """A value, or one primitive heap instruction over values and variables."""
    if isinstance(e, Val):
        return True
    return isinstance(e, _INSTRUCTIONS) and all(isinstance(c, (Val, Var)) for c in e.children())


def erase_expr(e: Expr) -> Expr:
    if isinstance(e, Val):
        return erase_val(e)
    if isinstance(e, Burn):
        _check_count(e)
        return erase_expr(e.body)
    if isinstance(e, AtomicBlock):
        inner = erase_expr(e.e)
        if is_single_instruction(inner):
            return inner
        return e if inner is e.e else AtomicBlock(inner)
    return map_children(e, erase_expr)


def erase_val(v: Val) -> Val:
    if isinstance(v, RecV):
        body = erase_expr(v.body)
        return v if body is v.body else RecV(v.f, v.x, body)
    if isinstance(v, PairV):
        left, right = erase_val(v.left), erase_val(v.right)
        return v if (left is v.left and right is v.right) else PairV(left, right)
    if isinstance(v, InjLV):
        inner = erase_val(v.v)
        return v if inner is v.v else InjLV(inner)
    if isinstance(v, InjRV):
        inner = erase_val(v.v)
        return v if inner is v.v else InjRV(inner)
    return v


def erase_config(c: Config) -> Config:
    s = c.state
    heap = {loc: erase_val(v) for loc, v in s.heap.items()}
    return Config(
        tuple(erase_expr(t) for t in c.threads),
        State(heap, s.prophs, EMPTY, s.next_loc, s.blocks),
    )


def count_nodes(e: Expr, kind: Union[type, tuple]) -> int:
    return sum(1 for sub in walk(e) if isinstance(sub, kind))


def residual_atomic_blocks(e: Expr) -> list[AtomicBlock]:
    return [sub for sub in walk(e) if isinstance(sub, AtomicBlock)]
