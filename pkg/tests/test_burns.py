import pytest

from permlang import corpus
from permlang.burns import (
    ILL_FORMED,
    UNPROTECTED_APP,
    check_expr,
    enough_burns_cfg,
    enough_burns_expr,
    enough_burns_heap,
    enough_burns_val,
    nb_unprotected_apps,
    pseudo_size,
)
from permlang.semantics import Config, State, initial_config
from permlang.surface import parse_expr
from permlang.syntax import HOLE, App, BinOp, LitInt, RecV, Var, subst

LEVELS = {"A": 2, "B": 1}

# (source, pseudo_size, nb_unprotected_apps, enough_burns_expr), each row
# worked out by hand from the definitions.
GOLDEN = [
    ("#5", 0, 0, True),
    ("x", 1, 0, True),
    ("#1 + #2", 1, 0, True),
    ("x + y", 3, 0, True),
    ("f x", 3, 1, True),
    ("(f x) (g y)", 7, 3, True),
    ("fun: x := x", 2, 0, True),
    ("fun: x := x x", 4, 0, False),
    ("rec: f x := f x", 4, 0, False),
    ("rec: f x := burn A in f x", 5, 0, True),
    ("burn A in f x", 4, 0, True),
    ("burn A receive f x times B in #1", 4, 1, True),
    ("match: x with InjL a => a | InjR b => b end", 5, 1, True),
    ("match: x with InjL a => f a | InjR b => b end", 7, 2, False),
    ("match: x with InjL a => burn A in f a | InjR b => b end", 8, 1, True),
    ("if: x then y else z", 4, 0, True),
    ("if: x then f y else z", 6, 1, True),
    ("let: x := #1 in x", 2, 0, True),
    ("let: x := f #1 in x", 4, 1, True),
    ("a;; b", 3, 0, True),
    ("atomic(f x)", 1, 1, True),
    ("atomic(fun: x := x x)", 1, 0, False),
    ("newproph", 1, 0, True),
    ("ref #0", 1, 0, True),
    ("!x", 2, 0, True),
    ("x <- fun: y := y y", 6, 0, False),
    ("fork(f x)", 4, 1, True),
    ("CAS(x, #0, #1)", 3, 0, True),
    ("(x, fun: y := y y)", 6, 0, False),
    ("InjL (f x)", 4, 1, True),
    ("fun: x := fun: y := f y", 5, 0, False),
    ("resolve (f x) at p to #1", 5, 1, True),
    ("- x", 2, 0, True),
    ("burn A receive #2 times B in fun: x := x x", 5, 0, False),
]


@pytest.mark.parametrize("src, size, nb, ok", GOLDEN)
def test_golden_table(src, size, nb, ok):
    e = parse_expr(src, LEVELS)
    assert pseudo_size(e) == size
    assert nb_unprotected_apps(e) == nb
    assert enough_burns_expr(e) == ok
    assert check_expr(e).ok == ok


def test_values():
    omega_v = RecV(None, "x", App(Var("x"), Var("x")))
    assert pseudo_size(omega_v) == 0
    assert nb_unprotected_apps(omega_v) == 0
    assert not enough_burns_val(omega_v)
    assert enough_burns_val(LitInt(5))


def test_heap():
    omega_v = RecV(None, "x", App(Var("x"), Var("x")))
    assert enough_burns_heap(State())
    assert enough_burns_heap(State({0: LitInt(1)}))
    assert not enough_burns_heap(State({0: omega_v}))
    report = enough_burns_cfg(Config((LitInt(0),), State({3: omega_v})))
    assert not report.ok and report.violations[0].path[:2] == ("heap", 3)


@pytest.mark.parametrize("name", ["omega", "landin_knot"])
def test_negative_examples_rejected(name):
    p = corpus.load(name)
    report = enough_burns_cfg(initial_config(p.main, p.init_perms))
    assert not report.ok
    assert all(v.kind == UNPROTECTED_APP for v in report.violations)


def test_omega_violation_points_at_binder():
    p = corpus.load("omega")
    report = enough_burns_cfg(initial_config(p.main))
    assert report.violations[0].path == ("threads", 0, "bound")


@pytest.mark.parametrize("name", [e.name for e in corpus.ENTRIES if e.checks])
def test_corpus_programs_pass(name):
    p = corpus.load(name)
    assert enough_burns_cfg(initial_config(p.main, p.init_perms)).ok


def test_values_only_config_ok():
    assert enough_burns_cfg(Config((LitInt(1), LitInt(2)), State())).ok


def test_hole_is_ill_formed():
    report = check_expr(BinOp("+", HOLE, LitInt(1)))
    assert [v.kind for v in report.violations] == [ILL_FORMED]


def test_nb_invariant_under_substitution():
    for src, *_ in GOLDEN:
        e = parse_expr(src, LEVELS)
        for v in (LitInt(3), RecV(None, "q", App(Var("q"), Var("q")))):
            assert nb_unprotected_apps(subst("x", v, e)) == nb_unprotected_apps(e)
            assert pseudo_size(subst("x", v, e)) <= pseudo_size(e)


def test_subst_preserves_enough_burns():
    good = RecV("f", "y", parse_expr("burn A in f y", LEVELS))
    for src, *_ in GOLDEN:
        e = parse_expr(src, LEVELS)
        if enough_burns_expr(e):
            assert enough_burns_expr(subst("x", good, e))
