"""The syntactic "enough burns" check and the two syntactic measures it relies
on: pseudo size and the number of unprotected applications."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

from .semantics import Config, State
from .syntax import (
    App,
    AtomicBlock,
    Burn,
    Expr,
    Hole,
    InjLV,
    InjRV,
    Match,
    NewProph,
    PairV,
    Rec,
    RecV,
    Val,
    Var,
)

UNPROTECTED_APP = "unprotected-app-in-body"
ILL_FORMED = "ill-formed"

Path = tuple[Union[str, int], ...]


@lru_cache(maxsize=1 << 18)
def pseudo_size(e: Expr) -> int:
    if isinstance(e, Val):
        return 0
    if isinstance(e, (Var, AtomicBlock, NewProph)):
        return 1
    if isinstance(e, Rec):
        return 1 + pseudo_size(e.body)
    # Match pays two: reducing it manufactures an application.
    base = 2 if isinstance(e, Match) else 1
    return base + sum(pseudo_size(c) for c in e.children())


@lru_cache(maxsize=1 << 18)
def nb_unprotected_apps(e: Expr) -> int:
    """Over-approximate the applications reachable without crossing a Burn.

    Function bodies are skipped; a Burn only exposes its count expression.
    Match counts as an application since its head step produces one.
    """
    if isinstance(e, (Val, Var, NewProph, Rec)):
        return 0
    if isinstance(e, Burn):
        return nb_unprotected_apps(e.count)
    own = 1 if isinstance(e, (App, Match)) else 0
    return own + sum(nb_unprotected_apps(c) for c in e.children())


@lru_cache(maxsize=1 << 18)
def enough_burns_expr(e: Expr) -> bool:
    if isinstance(e, Val):
        return enough_burns_val(e)
    if isinstance(e, (Var, NewProph)):
        return True
    if isinstance(e, Hole):
        return False
    if isinstance(e, Rec):
        return nb_unprotected_apps(e.body) == 0 and enough_burns_expr(e.body)
    if isinstance(e, Match):
        # Branches are function bodies, exactly like a Rec body.
        return (
            enough_burns_expr(e.scrut)
            and all(nb_unprotected_apps(b) == 0 and enough_burns_expr(b) for b in (e.left, e.right))
        )
    return all(enough_burns_expr(c) for c in e.children())


def enough_burns_val(v: Val) -> bool:
    if isinstance(v, RecV):
        return nb_unprotected_apps(v.body) == 0 and enough_burns_expr(v.body)
    if isinstance(v, PairV):
        return enough_burns_val(v.left) and enough_burns_val(v.right)
    if isinstance(v, (InjLV, InjRV)):
        return enough_burns_val(v.v)
    return True


def enough_burns_heap(s: State) -> bool:
    return all(enough_burns_val(v) for v in s.heap.values())


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: Path
    kind: str
    detail: str = ""

    def as_dict(self) -> dict:
        return {"path": list(self.path), "kind": self.kind, "detail": self.detail}


@dataclass
class CheckReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.as_dict() for v in self.violations]}


def _body_violation(body: Expr, path: Path, what: str, out: list[Violation]) -> None:
    n = nb_unprotected_apps(body)
    if n:
        out.append(Violation(path, UNPROTECTED_APP, f"{what} has {n} unprotected application(s)"))


def _collect(e: Expr, path: Path, out: list[Violation]) -> None:
    if enough_burns_expr(e):
        return
    if isinstance(e, Hole):
        out.append(Violation(path, ILL_FORMED, "evaluation-context hole"))
        return
    if isinstance(e, (Rec, RecV)):
        name = e.f or "<anonymous>"
        _body_violation(e.body, path, f"body of {name}", out)
        _collect(e.body, path + ("body",), out)
        return
    if isinstance(e, Match):
        _collect(e.scrut, path + ("scrut",), out)
        for f in ("left", "right"):
            branch = getattr(e, f)
            _body_violation(branch, path + (f,), f"match branch {f}", out)
            _collect(branch, path + (f,), out)
        return
    if isinstance(e, PairV):
        _collect(e.left, path + ("left",), out)
        _collect(e.right, path + ("right",), out)
        return
    if isinstance(e, (InjLV, InjRV)):
        _collect(e.v, path + ("v",), out)
        return
    for f in e._kids:
        _collect(getattr(e, f), path + (f,), out)


def check_expr(e: Expr, path: Path = ()) -> CheckReport:
    out: list[Violation] = []
    _collect(e, path, out)
    return CheckReport(out)


def enough_burns_cfg(c: Config) -> CheckReport:
    """Check every thread and every heap cell; violations carry AST paths."""
    out: list[Violation] = []
    for i, t in enumerate(c.threads):
        _collect(t, ("threads", i), out)
    for loc in sorted(c.state.heap):
        _collect(c.state.heap[loc], ("heap", loc), out)
    return CheckReport(out)


def cfg_ok(c: Config) -> bool:
    return all(enough_burns_expr(t) for t in c.threads) and enough_burns_heap(c.state)
