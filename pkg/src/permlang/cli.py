"""Command-line interface: ``permlang check|run|explore|erase FILE``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .burns import enough_burns_cfg
from .erasure import ErasureError, erase_expr, residual_atomic_blocks
from .explorer import ExploreOptions, explore
from .measure import MeasureTrace
from .multiset import EMPTY
from .semantics import (
    AllValues,
    BudgetExhausted,
    RoundRobin,
    Scheduler,
    Script,
    SeededRandom,
    initial_config,
    run,
)
from .surface import ParseError, ProgramFile, Printer, parse, print_expr, print_program

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def _load(path: str) -> ProgramFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        return parse(text)
    except ParseError as exc:
        raise InputError(f"{path}:{exc}") from exc


def _scheduler(spec: str) -> Scheduler:
    if spec == "rr":
        return RoundRobin()
    kind, _, arg = spec.partition(":")
    if kind == "rand" and arg:
        try:
            return SeededRandom(int(arg))
        except ValueError:
            raise InputError(f"bad seed in schedule {spec!r}") from None
    if kind == "script" and arg:
        try:
            text = Path(arg).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise InputError(f"{arg}: {exc.strerror}") from exc
        try:
            tids = json.loads(text) if text.startswith("[") else [int(t) for t in text.replace(",", " ").split()]
        except ValueError:
            raise InputError(f"{arg}: expected a list of thread indices") from None
        return Script(tids)
    raise InputError(f"unknown schedule {spec!r} (use rr, rand:SEED or script:FILE)")


def cmd_check(args: argparse.Namespace) -> int:
    prog = _load(args.file)
    report = enough_burns_cfg(initial_config(prog.main, prog.init_perms))
    if args.json:
        print(json.dumps(report.as_dict(), indent=2))
    elif report.ok:
        print("ok: every function body has enough burns")
    else:
        for v in report.violations:
            path = "/".join(map(str, v.path)) or "<root>"
            print(f"{path}: {v.kind}: {v.detail}")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_run(args: argparse.Namespace) -> int:
    prog = _load(args.file)
    sched = _scheduler(args.schedule)
    trace = MeasureTrace() if args.trace_measure else None
    try:
        out = run(initial_config(prog.main, prog.init_perms), sched, args.steps,
                  on_step=trace.record if trace is not None else None)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    names = prog.level_names()
    printer = Printer(names, prog.levels)
    if trace is not None:
        for s in trace:
            mark = "" if s.decreased else "  NOT DECREASING"
            print(f"step {s.step} t{s.tid}: {s.before.perms} {s.before.unprotected} {s.before.pseudo}"
                  f" -> {s.after.perms} {s.after.unprotected} {s.after.pseudo}{mark}")
    if isinstance(out, AllValues):
        print(f"value {printer.expr(out.values[0])}")
        for i, v in enumerate(out.values[1:], start=1):
            print(f"thread {i}: {printer.expr(v)}")
        print(f"steps {len(out.trace)}")
        return EXIT_OK
    if isinstance(out, BudgetExhausted):
        print(f"budget exhausted after {len(out.trace)} steps")
        return EXIT_BUDGET
    print(f"stuck: thread {out.tid}: {out.reason}" + (f" ({out.detail})" if out.detail else ""))
    print("schedule " + json.dumps([t.tid for t in out.trace]))
    return EXIT_FAIL


def cmd_explore(args: argparse.Namespace) -> int:
    prog = _load(args.file)
    opts = ExploreOptions(
        max_states=args.max_states,
        check_measure=not args.no_measure_check,
        check_enough_burns_each_step=not args.no_burn_check,
    )
    if args.max_depth is not None:
        opts.max_depth = args.max_depth
    rep = explore(initial_config(prog.main, prog.init_perms), opts)
    doc = rep.as_dict()
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"states {rep.states_visited}, edges {rep.edges}, longest path {rep.longest_path}")
    print(f"terminal outcomes {len(rep.terminal_outcomes)}")
    for (vals, digest), n in sorted(rep.terminal_outcomes.items()):
        print(f"  [{', '.join(vals)}] heap {digest} x{n}")
    print(f"measure monotone {str(rep.measure_monotone).lower()}, "
          f"enough burns preserved {str(rep.enough_burns_preserved).lower()}")
    if rep.cyclic:
        print("cycle found: some execution is infinite")
    for script, reason in rep.stuck_traces[:10]:
        print(f"stuck ({reason}) after schedule {json.dumps(script)}")
    if len(rep.stuck_traces) > 10:
        print(f"... {len(rep.stuck_traces) - 10} more stuck traces")
    if rep.budget_hit:
        print("budget hit: exploration incomplete")
    if rep.stuck_traces or rep.cyclic or not rep.measure_monotone or not rep.enough_burns_preserved:
        return EXIT_FAIL
    return EXIT_BUDGET if rep.budget_hit else EXIT_OK


def cmd_erase(args: argparse.Namespace) -> int:
    prog = _load(args.file)
    try:
        erased = erase_expr(prog.main)
    except ErasureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    residual = residual_atomic_blocks(erased)
    if args.strict_heaplang and residual:
        print(f"error: {len(residual)} multi-instruction atomic block(s) remain", file=sys.stderr)
        for b in residual:
            print(f"  {print_expr(b)}", file=sys.stderr)
        return EXIT_FAIL
    text = print_program(ProgramFile([], EMPTY, erased))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="permlang", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the enough-burns check")
    p.add_argument("file")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="run under one schedule")
    p.add_argument("file")
    p.add_argument("--schedule", default="rr", help="rr, rand:SEED or script:FILE")
    p.add_argument("--steps", type=int, default=100_000, help="step budget")
    p.add_argument("--trace-measure", action="store_true", help="print the measure at every step")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explore", help="explore every interleaving")
    p.add_argument("file")
    p.add_argument("--max-states", type=int, default=None,
                   help="state budget (default $PERMLANG_MAX_STATES or 5000000)")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--no-measure-check", action="store_true")
    p.add_argument("--no-burn-check", action="store_true",
                   help="skip re-running the checker at every state")
    p.add_argument("--json", metavar="OUT", help="write the report as JSON")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("erase", help="strip burns")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.add_argument("--strict-heaplang", action="store_true",
                   help="fail if a multi-instruction atomic block remains")
    p.set_defaults(func=cmd_erase)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
