"""The configuration measure and a runtime monitor for its strict decrease."""

from __future__ import annotations

from dataclasses import dataclass

from .burns import nb_unprotected_apps, pseudo_size
from .multiset import MeasureTriple, triple_less
from .semantics import Config


def config_measure(c: Config) -> MeasureTriple:
    """(permission stock, unprotected applications, pseudo size) of ``c``.

    Heap cells contribute nothing: stored values measure zero on both
    syntactic components.
    """
    return MeasureTriple(
        c.state.perms,
        sum(nb_unprotected_apps(t) for t in c.threads),
        sum(pseudo_size(t) for t in c.threads),
    )


def assert_decrease(before: Config, after: Config) -> bool:
    return triple_less(config_measure(after), config_measure(before))


@dataclass(frozen=True)
class MeasureStep:
    step: int
    tid: int
    before: MeasureTriple
    after: MeasureTriple

    @property
    def decreased(self) -> bool:
        return triple_less(self.after, self.before)

    def as_dict(self) -> dict:
        return {
            "step": self.step,
            "tid": self.tid,
            "before": self.before.as_dict(),
            "after": self.after.as_dict(),
            "decreased": self.decreased,
        }


class MeasureTrace(list):
    """Recorder usable as ``run(..., on_step=trace.record)``."""

    def record(self, before: Config, after: Config, tid: int) -> None:
        self.append(MeasureStep(len(self), tid, config_measure(before), config_measure(after)))

    @property
    def monotone(self) -> bool:
        return all(s.decreased for s in self)
