"""Exhaustive exploration of thread interleavings.

Per-thread steps are deterministic, so the only branching is the choice of
which runnable thread moves next.  States are deduplicated after relabelling
locations and prophecy ids in first-visit order.
"""

from __future__ import annotations

import hashlib
import os
import sys
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .burns import cfg_ok
from .measure import config_measure
from .multiset import triple_less
from .semantics import Config, ThreadStuck, tp_step
from .surface import print_expr
from .syntax import (
    Expr,
    InjLV,
    InjRV,
    LitLoc,
    LitProph,
    PairV,
    RecV,
    Val,
    map_children,
    value_children,
)

DEFAULT_MAX_STATES = 5_000_000


def default_max_states() -> int:
    env = os.environ.get("PERMLANG_MAX_STATES")
    return int(env) if env else DEFAULT_MAX_STATES


@dataclass
class ExploreOptions:
    max_states: Optional[int] = None
    max_depth: int = 1_000_000
    check_measure: bool = True
    check_enough_burns_each_step: bool = True
    dedup: bool = True
    keep_terminals: bool = False


@dataclass
class ExplorationReport:
    states_visited: int = 0
    edges: int = 0
    terminal_outcomes: Counter = field(default_factory=Counter)
    stuck_traces: list[tuple[list[int], str]] = field(default_factory=list)
    longest_path: int = 0
    measure_monotone: bool = True
    budget_hit: bool = False
    enough_burns_preserved: bool = True
    # A step back onto the current search path: some execution is infinite.
    cyclic: bool = False
    measure_violations: list[list[int]] = field(default_factory=list)
    terminals: list[Config] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return (not self.budget_hit and not self.stuck_traces and not self.cyclic
                and self.measure_monotone and self.enough_burns_preserved)

    def outcome_set(self) -> set:
        return set(self.terminal_outcomes)

    def as_dict(self) -> dict:
        return {
            "states_visited": self.states_visited,
            "edges": self.edges,
            "terminal_outcomes": [
                {"values": list(vals), "heap_digest": digest, "count": n}
                for (vals, digest), n in sorted(self.terminal_outcomes.items())
            ],
            "stuck_traces": [{"script": s, "reason": r} for s, r in self.stuck_traces],
            "longest_path": self.longest_path,
            "measure_monotone": self.measure_monotone,
            "budget_hit": self.budget_hit,
            "enough_burns_preserved": self.enough_burns_preserved,
            "cyclic": self.cyclic,
        }


# ---------------------------------------------------------------------------
# Canonicalisation
# ---------------------------------------------------------------------------


def _kids(e: Expr) -> tuple:
    return value_children(e) if isinstance(e, Val) else e.children()


def atoms(e: Expr) -> tuple:
    """Locations ``("l", n)`` and prophecies ``("p", n)`` of ``e``, distinct,
    in pre-order.  Cached on the node."""
    d = e.__dict__
    got = d.get("_atoms")
    if got is not None:
        return got
    if isinstance(e, LitLoc):
        got = (("l", e.loc),)
    elif isinstance(e, LitProph):
        got = (("p", e.pid),)
    else:
        kids = _kids(e)
        if not kids:
            got = ()
        elif len(kids) == 1:
            got = atoms(kids[0])
        else:
            seen: dict = {}
            for k in kids:
                for a in atoms(k):
                    seen.setdefault(a, None)
            got = tuple(seen)
    d["_atoms"] = got
    return got


def _rename(e: Expr, locs: dict, prophs: dict, memo: dict) -> Expr:
    if not atoms(e):
        return e
    got = memo.get(id(e))
    if got is not None:
        return got
    if isinstance(e, LitLoc):
        out: Expr = LitLoc(locs[e.loc])
    elif isinstance(e, LitProph):
        out = LitProph(prophs[e.pid])
    elif isinstance(e, RecV):
        out = RecV(e.f, e.x, _rename(e.body, locs, prophs, memo))
    elif isinstance(e, PairV):
        out = PairV(_rename(e.left, locs, prophs, memo), _rename(e.right, locs, prophs, memo))
    elif isinstance(e, InjLV):
        out = InjLV(_rename(e.v, locs, prophs, memo))
    elif isinstance(e, InjRV):
        out = InjRV(_rename(e.v, locs, prophs, memo))
    else:
        out = map_children(e, lambda k: _rename(k, locs, prophs, memo))
    memo[id(e)] = out
    return out


@dataclass(frozen=True)
class Canonical:
    threads: tuple
    heap: tuple
    prophs: frozenset
    perms: object

    def heap_digest(self) -> str:
        text = repr(self.heap)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def canonicalize(c: Config) -> Canonical:
    """Relabel allocation blocks and prophecies by first visit, keeping only
    the heap reachable from the threads."""
    s = c.state
    bases = [b for b, _ in s.blocks]
    sizes = dict(s.blocks)
    loc_map: dict[int, int] = {}
    proph_map: dict[int, int] = {}
    order: list[int] = []  # original block bases in visit order
    next_label = 0

    def visit(a) -> None:
        nonlocal next_label
        kind, n = a
        if kind == "p":
            if n not in proph_map:
                proph_map[n] = len(proph_map)
            return
        if n in loc_map:
            return
        i = bisect_right(bases, n) - 1
        if i >= 0 and n < bases[i] + sizes[bases[i]]:
            base, size = bases[i], sizes[bases[i]]
        else:
            base, size = n, 1
        for off in range(size):
            loc_map[base + off] = next_label + off
        next_label += size
        order.append(base)

    for t in c.threads:
        for a in atoms(t):
            visit(a)
    # Breadth-first over reachable blocks.
    i = 0
    cells: list[int] = []
    while i < len(order):
        base = order[i]
        i += 1
        size = sizes.get(base, 1)
        for off in range(size):
            loc = base + off
            v = s.heap.get(loc)
            if v is None:
                continue
            cells.append(loc)
            for a in atoms(v):
                visit(a)
    identity = all(k == v for k, v in loc_map.items()) and all(k == v for k, v in proph_map.items())
    if identity:
        threads = c.threads
        heap = tuple(sorted((loc, s.heap[loc]) for loc in cells))
    else:
        memo: dict = {}
        threads = tuple(_rename(t, loc_map, proph_map, memo) for t in c.threads)
        heap = tuple(sorted((loc_map[loc], _rename(s.heap[loc], loc_map, proph_map, memo)) for loc in cells))
    prophs = frozenset(proph_map[p] for p in s.prophs if p in proph_map)
    return Canonical(threads, heap, prophs, s.perms)


def outcome_of(c: Config) -> tuple[tuple[str, ...], str]:
    k = canonicalize(c)
    return tuple(print_expr(v) for v in k.threads), k.heap_digest()


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


class _Frame:
    __slots__ = ("key", "cfg", "tids", "idx", "best")

    def __init__(self, key, cfg: Config) -> None:
        self.key = key
        self.cfg = cfg
        self.tids = cfg.runnable()
        self.idx = 0
        self.best = 0


def explore(c: Config, opts: Optional[ExploreOptions] = None) -> ExplorationReport:
    opts = opts or ExploreOptions()
    max_states = opts.max_states if opts.max_states is not None else default_max_states()
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 20_000))
    try:
        return _explore(c, opts, max_states)
    finally:
        sys.setrecursionlimit(old_limit)


def _explore(c: Config, opts: ExploreOptions, max_states: int) -> ExplorationReport:
    rep = ExplorationReport()
    key_of = canonicalize if opts.dedup else (lambda cfg: object())
    # key -> longest path from that state, or None while it is on the stack
    visited: dict = {}
    path: list[int] = []

    def enter(key, cfg: Config) -> Optional[_Frame]:
        visited[key] = None
        rep.states_visited += 1
        if opts.check_enough_burns_each_step and not cfg_ok(cfg):
            rep.enough_burns_preserved = False
        if cfg.all_values():
            visited[key] = 0
            rep.terminal_outcomes[outcome_of(cfg)] += 1
            if opts.keep_terminals:
                rep.terminals.append(cfg)
            return None
        return _Frame(key, cfg)

    root_key = key_of(c)
    root = enter(root_key, c)
    frames = [root] if root is not None else []
    while frames:
        f = frames[-1]
        if f.idx == len(f.tids):
            frames.pop()
            visited[f.key] = f.best
            if frames:
                path.pop()
                parent = frames[-1]
                parent.best = max(parent.best, f.best + 1)
            continue
        tid = f.tids[f.idx]
        f.idx += 1
        r = tp_step(f.cfg, tid)
        if isinstance(r, ThreadStuck):
            rep.stuck_traces.append((path + [tid], r.reason))
            continue
        after, _ = r
        rep.edges += 1
        if opts.check_measure and not triple_less(config_measure(after), config_measure(f.cfg)):
            rep.measure_monotone = False
            rep.measure_violations.append(path + [tid])
        key = key_of(after)
        if key in visited:
            known = visited[key]
            if known is None:
                rep.cyclic = True
            else:
                f.best = max(f.best, known + 1)
            continue
        if len(visited) >= max_states or len(path) + 1 > opts.max_depth:
            rep.budget_hit = True
            continue
        child = enter(key, after)
        if child is None:
            f.best = max(f.best, 1)
        else:
            path.append(tid)
            frames.append(child)
    rep.longest_path = visited.get(root_key) or 0
    return rep
