"""Multisets of call-permission levels, the Dershowitz-Manna multiset order,
and the lexicographic order on configuration measures."""

from __future__ import annotations

import operator
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional

Level = int
LessThan = Callable[[Level, Level], bool]


@dataclass(frozen=True)
class LevelMultiset:
    """Immutable finite multiset of levels; ``items`` is sorted, counts > 0."""

    items: tuple[tuple[Level, int], ...] = ()

    @classmethod
    def of(cls, elems: Iterable[Level] = ()) -> LevelMultiset:
        return cls._from_counter(Counter(elems))

    @classmethod
    def _from_counter(cls, counts: Counter) -> LevelMultiset:
        return cls(tuple(sorted((k, n) for k, n in counts.items() if n > 0)))

    def counter(self) -> Counter:
        return Counter(dict(self.items))

    def count(self, x: Level) -> int:
        for k, n in self.items:
            if k == x:
                return n
        return 0

    def __contains__(self, x: object) -> bool:
        return any(k == x for k, _ in self.items)

    def __iter__(self) -> Iterator[Level]:
        for k, n in self.items:
            for _ in range(n):
                yield k

    def __len__(self) -> int:
        return sum(n for _, n in self.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    def distinct(self) -> list[Level]:
        return [k for k, _ in self.items]

    def __repr__(self) -> str:
        return "[" + ", ".join(map(str, self)) + "]"

    def __le__(self, other: LevelMultiset) -> bool:
        """Sub-multiset inclusion."""
        return all(other.count(k) >= n for k, n in self.items)

    def union(self, other: LevelMultiset) -> LevelMultiset:
        return LevelMultiset._from_counter(self.counter() + other.counter())

    def difference(self, other: LevelMultiset) -> LevelMultiset:
        return LevelMultiset._from_counter(self.counter() - other.counter())

    def meet(self, other: LevelMultiset) -> LevelMultiset:
        return LevelMultiset._from_counter(self.counter() & other.counter())

    def remove(self, x: Level) -> Optional[LevelMultiset]:
        if x not in self:
            return None
        c = self.counter()
        c[x] -= 1
        return LevelMultiset._from_counter(c)

    def insert_n(self, x: Level, n: int) -> LevelMultiset:
        if n < 0:
            raise ValueError("negative multiplicity")
        if n == 0:
            return self
        c = self.counter()
        c[x] += n
        return LevelMultiset._from_counter(c)

    def to_list(self) -> list[Level]:
        return list(self)


EMPTY = LevelMultiset()


def ms_union(a: LevelMultiset, b: LevelMultiset) -> LevelMultiset:
    return a.union(b)


def ms_remove(a: LevelMultiset, x: Level) -> Optional[LevelMultiset]:
    return a.remove(x)


def ms_contains(a: LevelMultiset, x: Level) -> bool:
    return x in a


def ms_insert_n(a: LevelMultiset, x: Level, n: int) -> LevelMultiset:
    return a.insert_n(x, n)


def ms_size(a: LevelMultiset) -> int:
    return len(a)


def mult1_less(a: LevelMultiset, b: LevelMultiset, lt: LessThan = operator.lt) -> bool:
    """One Dershowitz-Manna step: b = b0 + [y] and a = b0 + xs with every x < y."""
    for y in b.distinct():
        b0 = b.remove(y)
        assert b0 is not None
        if b0 <= a and all(lt(x, y) for x in a.difference(b0)):
            return True
    return False


def mult_less(a: LevelMultiset, b: LevelMultiset, lt: LessThan = operator.lt) -> bool:
    """Transitive closure of :func:`mult1_less`.

    Decided through the usual characterisation: after cancelling the common
    part, ``b`` keeps something and each remaining element of ``a`` is
    dominated by some remaining element of ``b``.
    """
    if a == b:
        return False
    common = a.meet(b)
    a_rest = a.difference(common)
    b_rest = b.difference(common)
    if not b_rest:
        return False
    tops = b_rest.distinct()
    return all(any(lt(x, y) for y in tops) for x in a_rest.distinct())


@dataclass(frozen=True)
class MeasureTriple:
    perms: LevelMultiset
    unprotected: int
    pseudo: int

    def as_dict(self) -> dict:
        return {"perms": self.perms.to_list(), "unprotected": self.unprotected, "pseudo": self.pseudo}


def triple_less(m1: MeasureTriple, m2: MeasureTriple) -> bool:
    """Lexicographic order: multiset order, then unprotected apps, then pseudo size."""
    if m1.perms != m2.perms:
        return mult_less(m1.perms, m2.perms)
    if m1.unprotected != m2.unprotected:
        return m1.unprotected < m2.unprotected
    return m1.pseudo < m2.pseudo
