import random

import pytest

from gen import UNSUPPORTED, base_state, rand_expr, rand_head_redex, with_unsupported
from oracles import small_step_eval
from permlang.multiset import EMPTY, LevelMultiset, mult_less
from permlang.semantics import (
    ATOMIC_FUEL,
    ATOMIC_STUCK,
    ATOMIC_UNSUPPORTED,
    BURN_MISSING,
    BURN_NEGATIVE,
    BURN_NOT_LOWER,
    INCOMPARABLE,
    IS_VALUE,
    NO_STEP,
    NOT_A_CLOSURE,
    UNALLOCATED,
    AllValues,
    BudgetExhausted,
    Config,
    Observation,
    RoundRobin,
    RunStuck,
    Script,
    SeededRandom,
    State,
    Stepped,
    Stuck,
    ThreadStuck,
    atomic_eval,
    head_step,
    initial_config,
    prim_step,
    run,
    tp_step,
)
from permlang.surface import parse_expr
from permlang.syntax import (
    FAA,
    FALSE,
    TRUE,
    UNIT,
    Alloc,
    App,
    AtomicBlock,
    BinOp,
    Burn,
    CmpXchg,
    Fork,
    Free,
    InjLV,
    InjRV,
    LitInt,
    LitLoc,
    LitProph,
    Load,
    Match,
    NewProph,
    PairV,
    Rec,
    RecV,
    Resolve,
    Store,
    Var,
    Xchg,
)

B = LitInt(42)


def perms(*levels):
    return State(perms=LevelMultiset.of(levels))


def heap(**cells):
    h = {int(k[1:]): v for k, v in cells.items()}
    n = max(h) + 1 if h else 0
    return State(h, frozenset(), EMPTY, n, tuple((i, 1) for i in sorted(h)))


# --- burns -----------------------------------------------------------------


def test_burn_mints_lower_permissions():
    r = head_step(Burn(B, 5, LitInt(3), 2), perms(5))
    assert isinstance(r, Stepped)
    assert r.expr == B
    assert r.state.perms == LevelMultiset.of([2, 2, 2])


def test_burn_missing_permission():
    r = head_step(Burn(B, 5, LitInt(3), 2), perms())
    assert isinstance(r, Stuck) and r.reason == BURN_MISSING


def test_burn_negative_count():
    r = head_step(Burn(B, 5, LitInt(-1), 2), perms(5))
    assert isinstance(r, Stuck) and r.reason == BURN_NEGATIVE


def test_burn_level_not_lower():
    r = head_step(Burn(B, 2, LitInt(1), 2), perms(2))
    assert isinstance(r, Stuck) and r.reason == BURN_NOT_LOWER


def test_burn_zero_count_just_consumes():
    r = head_step(Burn(B, 3, LitInt(0), 1), perms(3, 3))
    assert r.state.perms == LevelMultiset.of([3])


def test_burn_always_shrinks_stock():
    rng = random.Random(5)
    for _ in range(300):
        stock = [rng.randint(1, 4) for _ in range(rng.randint(1, 4))]
        cp = rng.choice(stock)
        lower = rng.randrange(cp)
        s = perms(*stock)
        r = head_step(Burn(B, cp, LitInt(rng.randint(0, 5)), lower), s)
        assert isinstance(r, Stepped)
        assert mult_less(r.state.perms, s.perms)


def test_only_burn_touches_perms():
    rng = random.Random(8)
    s = base_state()
    for _ in range(2000):
        e = rand_head_redex(rng)
        if isinstance(e, (Burn, AtomicBlock)):
            continue
        r = head_step(e, s)
        if isinstance(r, Stepped):
            assert r.state.perms == s.perms


# --- heap rules --------------------------------------------------------------


def test_cmpxchg_success_and_failure():
    s = heap(l0=LitInt(1))
    ok = head_step(CmpXchg(LitLoc(0), LitInt(1), LitInt(7)), s)
    assert ok.expr == PairV(LitInt(1), TRUE)
    assert ok.state.heap[0] == LitInt(7)
    bad = head_step(CmpXchg(LitLoc(0), LitInt(2), LitInt(7)), s)
    assert bad.expr == PairV(LitInt(1), FALSE)
    assert bad.state.heap[0] == LitInt(1)


def test_cmpxchg_incomparable():
    s = heap(l0=PairV(LitInt(1), LitInt(2)))
    r = head_step(CmpXchg(LitLoc(0), PairV(LitInt(1), LitInt(2)), UNIT), s)
    assert isinstance(r, Stuck) and r.reason == INCOMPARABLE


def test_equality_of_two_boxed_values_is_stuck():
    r = head_step(BinOp("=", PairV(UNIT, UNIT), PairV(UNIT, UNIT)), State())
    assert r == Stuck(INCOMPARABLE)


def test_equality_allows_injected_literals():
    r = head_step(BinOp("=", InjRV(LitLoc(3)), PairV(UNIT, UNIT)), State())
    assert r.expr == FALSE


def test_alloc_is_deterministic_and_records_blocks():
    s = heap(l0=UNIT)
    r = head_step(Alloc(LitInt(3), LitInt(9)), s)
    assert r.expr == LitLoc(1)
    assert [r.state.heap[i] for i in (1, 2, 3)] == [LitInt(9)] * 3
    assert r.state.next_loc == 4
    assert r.state.blocks[-1] == (1, 3)
    assert head_step(Alloc(LitInt(3), LitInt(9)), s) == r


def test_alloc_nonpositive_is_stuck():
    assert isinstance(head_step(Alloc(LitInt(0), UNIT), State()), Stuck)


def test_free_then_load_is_stuck():
    s = heap(l0=UNIT)
    r = head_step(Free(LitLoc(0)), s)
    assert 0 not in r.state.heap and r.state.next_loc == 1
    assert head_step(Load(LitLoc(0)), r.state).reason == UNALLOCATED
    # The freed cell is never reused.
    assert head_step(Alloc(LitInt(1), UNIT), r.state).expr == LitLoc(1)


def test_store_xchg_faa():
    s = heap(l0=LitInt(5))
    assert head_step(Store(LitLoc(0), LitInt(6)), s).state.heap[0] == LitInt(6)
    x = head_step(Xchg(LitLoc(0), LitInt(8)), s)
    assert x.expr == LitInt(5) and x.state.heap[0] == LitInt(8)
    f = head_step(FAA(LitLoc(0), LitInt(2)), s)
    assert f.expr == LitInt(5) and f.state.heap[0] == LitInt(7)
    assert head_step(Store(LitLoc(9), UNIT), s).reason == UNALLOCATED


def test_fork_returns_unit_and_forked_expr():
    e = BinOp("+", LitInt(1), LitInt(1))
    r = head_step(Fork(e), State())
    assert r.expr == UNIT and r.forks == (e,)


def test_newproph_least_unused():
    s = State(prophs=frozenset({0, 2}))
    r = head_step(NewProph(), s)
    assert r.expr == LitProph(1) and r.state.prophs == {0, 1, 2}


def test_resolve_records_observation():
    s = heap(l0=LitInt(3))
    r = head_step(Resolve(Load(LitLoc(0)), LitProph(0), LitInt(9)), s)
    assert r.expr == LitInt(3)
    assert r.observations == (Observation(0, LitInt(3), LitInt(9)),)


def test_resolve_inner_must_reach_value():
    inner = App(RecV(None, "x", BinOp("+", Var("x"), LitInt(1))), LitInt(1))
    r = head_step(Resolve(inner, LitProph(0), UNIT), State())
    assert isinstance(r, Stuck)


def test_match_steps_to_application():
    e = Match(InjLV(LitInt(1)), "a", Var("a"), "b", LitInt(0))
    r = head_step(e, State())
    assert r.expr == App(RecV(None, "a", Var("a")), LitInt(1))
    e = Match(InjRV(LitInt(1)), "a", Var("a"), "b", LitInt(0))
    assert head_step(e, State()).expr == App(RecV(None, "b", LitInt(0)), LitInt(1))


def test_not_a_closure():
    assert head_step(App(LitInt(1), UNIT), State()).reason == NOT_A_CLOSURE


def test_rec_beta_substitutes_self():
    f = RecV("f", "x", App(Var("f"), Var("x")))
    r = head_step(App(f, LitInt(1)), State())
    assert r.expr == App(f, LitInt(1))


def test_head_step_is_deterministic():
    rng = random.Random(3)
    s = base_state()
    for _ in range(500):
        e = rand_head_redex(rng)
        assert head_step(e, s) == head_step(e, s)


# --- atomic blocks -------------------------------------------------------------


def test_atomic_eval_arith():
    assert atomic_eval(BinOp("+", LitInt(1), LitInt(2)), State()) == (LitInt(3), State())


def test_atomic_eval_load():
    s = heap(l0=LitInt(4))
    assert atomic_eval(Load(LitLoc(0)), s) == (LitInt(4), s)


@pytest.mark.parametrize("make", UNSUPPORTED)
def test_atomic_eval_unsupported(make):
    r = atomic_eval(make(), base_state())
    assert isinstance(r, Stuck) and r.reason == ATOMIC_UNSUPPORTED


def test_atomic_burn_reads_count_first():
    # Count is read from l1 before the store to l0 happens.
    s = State({0: LitInt(0), 1: LitInt(2)}, frozenset(), LevelMultiset.of([5]), 2, ((0, 1), (1, 1)))
    v, s2 = atomic_eval(Burn(Store(LitLoc(0), LitInt(7)), 5, Load(LitLoc(1)), 2), s)
    assert v == UNIT
    assert s2.heap[0] == LitInt(7)
    assert s2.perms == LevelMultiset.of([2, 2])


def test_atomic_burn_negative_count():
    s = heap(l0=LitInt(-1)).with_perms(LevelMultiset.of([5]))
    r = atomic_eval(Burn(UNIT, 5, Load(LitLoc(0)), 2), s)
    assert r.reason == BURN_NEGATIVE


def test_atomic_fuel():
    omega = App(Rec("f", "x", App(Var("f"), Var("x"))), UNIT)
    assert atomic_eval(omega, State(), fuel=1000).reason == ATOMIC_FUEL


def test_atomic_block_stuck_wraps_reason():
    r = head_step(AtomicBlock(Fork(UNIT)), State())
    assert r.reason == ATOMIC_STUCK and ATOMIC_UNSUPPORTED in r.detail


def test_atomic_block_runs_in_one_step():
    e = parse_expr("atomic(let: x := #1 + #2 in if: x = #3 then #10 else #20)")
    r = prim_step(e, State())
    assert r.expr == LitInt(10)


def test_atomic_eval_agrees_with_small_step():
    rng = random.Random(11)
    compared = 0
    for _ in range(800):
        e = rand_expr(rng, 4)
        s = base_state()
        small = small_step_eval(e, s)
        big = atomic_eval(e, s, 20_000)
        if small is None or (isinstance(big, Stuck) and big.reason == ATOMIC_FUEL):
            continue
        compared += 1
        if isinstance(small, Stuck):
            assert isinstance(big, Stuck), e
            assert big.reason == small.reason, e
        else:
            assert big == small, e
    assert compared > 700


def test_unsupported_reached_first_is_stuck():
    rng = random.Random(12)
    for _ in range(200):
        e = with_unsupported(rng, rand_expr(rng, 2))
        r = atomic_eval(e, base_state())
        assert isinstance(r, Stuck)


# --- contexts and thread pools -------------------------------------------------


def test_prim_step_in_context():
    e = BinOp("+", LitInt(1), BinOp("+", LitInt(2), LitInt(3)))
    assert prim_step(e, State()).expr == BinOp("+", LitInt(1), LitInt(5))


def test_prim_step_value():
    assert prim_step(LitInt(1), State()) is IS_VALUE


def test_prim_step_context_preserves_stuck():
    e = BinOp("+", LitInt(1), Load(LitLoc(3)))
    assert prim_step(e, State()).reason == UNALLOCATED


def test_tp_step_appends_forks():
    e = BinOp("+", LitInt(1), LitInt(1))
    c, obs = tp_step(Config((Fork(e),), State()), 0)
    assert c.threads == (UNIT, e)
    assert obs == ()


def test_tp_step_value_and_stuck():
    c = Config((LitInt(1), Load(LitLoc(0))), State())
    assert tp_step(c, 0) is NO_STEP
    assert tp_step(c, 1) == ThreadStuck(1, UNALLOCATED, repr(LitLoc(0)))
    with pytest.raises(IndexError):
        tp_step(c, 2)


# --- runs ----------------------------------------------------------------------


def test_run_trivial():
    out = run(initial_config(parse_expr("#1 + #1")), RoundRobin())
    assert isinstance(out, AllValues) and out.values == (LitInt(2),)


def test_run_omega_exhausts_budget():
    omega = parse_expr("(rec: f x := f x) #()")
    out = run(initial_config(omega), RoundRobin(), 50)
    assert isinstance(out, BudgetExhausted) and len(out.trace) == 50


def test_run_burning_omega_gets_stuck():
    omega = parse_expr("(rec: f x := burn 1 in f x) #()")
    out = run(initial_config(omega, [1, 1, 1]), RoundRobin(), 1000)
    assert isinstance(out, RunStuck) and out.reason == BURN_MISSING


def test_round_robin_alternates():
    e = parse_expr("fork(#1 + #2 + #3);; #4 + #5 + #6")
    out = run(initial_config(e), RoundRobin())
    tids = [t.tid for t in out.trace]
    assert tids[:4] == [0, 1, 0, 1]


def test_seeded_random_is_reproducible():
    e = parse_expr("let: l := ref #0 in fork(l <- #1);; fork(l <- #2);; !l")
    a = run(initial_config(e), SeededRandom(7))
    b = run(initial_config(e), SeededRandom(7))
    assert [t.tid for t in a.trace] == [t.tid for t in b.trace]
    assert a.values == b.values


def test_script_replays_and_rejects_bad_tids():
    e = parse_expr("fork(#1 + #1);; #2")
    out = run(initial_config(e), Script([0, 1, 0]))
    assert isinstance(out, AllValues)
    with pytest.raises(ValueError):
        run(initial_config(e), Script([1]))
    short = run(initial_config(e), Script([0]))
    assert isinstance(short, BudgetExhausted)


def test_run_stack_corpus_round_robin():
    from permlang import corpus

    for name in ("stack_push_push", "stack_push_pop"):
        prog = corpus.load(name)
        out = run(initial_config(prog.main, prog.init_perms), RoundRobin())
        assert isinstance(out, AllValues), name
