"""Bundled example programs and what each one is expected to do."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..surface import ProgramFile, parse


@dataclass(frozen=True)
class Entry:
    name: str
    checks: bool  # passes the enough-burns check
    safe: bool  # exhaustive exploration finds no stuck state
    erasable: bool = True
    note: str = ""


ENTRIES = [
    Entry("trivial", True, True),
    Entry("omega", False, False, note="diverges"),
    Entry("landin_knot", False, False, note="diverges through the store"),
    Entry("faa_counter", True, True),
    Entry("countdown", True, True),
    Entry("mailbox", True, True),
    Entry("treiber", True, True),
    Entry("stack_push_push", True, True),
    Entry("stack_push_pop", True, True),
    Entry("atomic_load", True, True),
    Entry("effectful_count", True, True, erasable=False),
    Entry("missing_perms", True, False, note="second pusher lacks STACK_OP"),
]

BY_NAME = {e.name: e for e in ENTRIES}


def names() -> list[str]:
    return [e.name for e in ENTRIES]


def source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.plt").read_text(encoding="utf-8")


def load(name: str) -> ProgramFile:
    return parse(source(name))
