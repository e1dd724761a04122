import io

import pytest

from wamlet.machine import INTERRUPT, Machine, PrologError
from wamlet.syntax import Struct, Var


@pytest.fixture
def m():
    return Machine()


def err(m, q):
    with pytest.raises(PrologError) as e:
        m.query(q)
    return e.value.term


def test_true_has_one_empty_solution(m):
    assert m.query("true") == [{}]


def test_member_order(m):
    assert m.query("member(X, [1,2,3])") == [{"X": 1}, {"X": 2}, {"X": 3}]


def test_solution_stream_can_be_closed_early(m):
    assert m.query("between(1, inf, X)", limit=3) == [{"X": 1}, {"X": 2}, {"X": 3}]
    assert not m.cps
    assert m.query("X = 1") == [{"X": 1}]


def test_indexed_call_creates_no_choicepoint(m):
    m.consult_text("p(a). p(b). p(c).")
    n = m.n_try
    assert m.query("p(b)") == [{}]
    assert m.n_try == n
    assert len(m.query("p(X)")) == 3
    assert m.n_try == n + 1


def test_empty_bucket_fails_without_entering(m):
    m = Machine(profile=True)
    m.consult_text("p(a). p(b).")
    assert m.query("p(f(1))") == []
    assert all(m.counters[c.entry_counter] == 0 for c in m.preds[("p", 1)].clauses)


def test_failed_call_restores_state(m):
    m.consult_text("q(X) :- X = f(A, B, C), A = B, C = 1, fail.\n"
                   "mk(L) :- length(L, 50), fail.\nmk(_).\n")
    goal = m.store.build_term(Struct("q", (Struct("g", (1,)),)), {})
    h, tr = len(m.heap), len(m.trail)
    assert list(m.solve(goal)) == []
    assert (len(m.heap), len(m.trail), m.cps, m.E) == (h, tr, [], None)
    goal = m.store.build_term(Struct("mk", (Var(),)), {})
    h = len(m.heap)
    gen = m.solve(goal)
    next(gen)
    assert len(m.heap) == h
    gen.close()


def test_last_call_runs_in_constant_local_space(m):
    m.consult_text("count(N, N) :- !.\ncount(I, N) :- I1 is I + 1, count(I1, N).")
    assert m.query("count(0, 100000)") == [{}]


def test_unknown_procedure_carries_callsite(m):
    m.consult_text("r(X) :-\n    q(X).\n", "t.pl")
    t = err(m, "r(1)")
    assert t.args[0] == Struct("existence_error", ("procedure", Struct("/", ("q", 1))))
    assert t.args[1].args[1] == Struct("callsite", ("t.pl", 2))


def test_catch_and_rethrow(m):
    m.consult_text("p(X) :- catch(q(X), oops(Y), X = caught(Y)).\n"
                   "q(_) :- throw(oops(1)).\n")
    assert m.query("p(X)") == [{"X": Struct("caught", (1,))}]
    assert err(m, "catch(throw(a), b, true)") == "a"


def test_catch_undoes_bindings(m):
    assert len(m.query("catch((X = 1, throw(e)), e, true), var(X)")) == 1


def test_arithmetic_overflow_is_an_error(m):
    t = err(m, "X is (1 << 59) * 4")
    assert t.args[0].name == "evaluation_error"
    assert m.query("X is 1 << 10") == [{"X": 1024}]


def test_integer_arithmetic_exact(m):
    lim = (1 << 60) - 1
    assert m.query(f"X is {lim} - 1 + 1") == [{"X": lim}]
    assert m.query("X is -7 // 2, Y is -7 mod 2") == [{"X": -3, "Y": 1}]
    t = err(m, "X is 1 // 0")
    assert t.args[0] == Struct("evaluation_error", ("zero_divisor",))


def test_interrupt_handler_runs_at_call_boundary(m):
    m.consult_text(":- dynamic(hits/1).\nhits(0).\n"
                   "bump :- retract(hits(N)), N1 is N + 1, assertz(hits(N1)).\n"
                   "loop(0) :- !.\nloop(N) :- N1 is N - 1, loop(N1).\n")
    assert m.query("on_interrupt(bump), '$set_timer'(40), loop(300), hits(H)") == [{"H": 1}]


def test_default_interrupt_throws(m):
    m.consult_text("loop(0) :- !.\nloop(N) :- N1 is N - 1, loop(N1).\n")
    assert m.query("catch(('$set_timer'(5), loop(100)), E, true)") == [{"E": "interrupt"}]


def test_interrupt_posted_twice_runs_once(m):
    m.consult_text(":- dynamic(hits/1).\nhits(0).\n"
                   "bump :- retract(hits(N)), N1 is N + 1, assertz(hits(N1)).\n")
    m.query("on_interrupt(bump)")
    m.post_event(INTERRUPT)
    m.post_event(INTERRUPT)
    assert m.query("true, hits(H)") == [{"H": 1}]


def test_freeze_goal_runs_before_next_goal(m):
    out = io.StringIO()
    m = Machine(out=out)
    m.query("freeze(X, write(woke)), X = 1, write(after)")
    assert out.getvalue() == "wokeafter"


def test_consing_loop_under_small_heap():
    m = Machine(heap_cells=4096, heap_margin=256)
    m.consult_text("build(0, []) :- !.\nbuild(N, [N|T]) :- N1 is N - 1, build(N1, T).\n"
                   "run(0) :- !.\nrun(K) :- build(200, L), length(L, 200), K1 is K - 1, run(K1).\n")
    assert m.query("run(200)") == [{}]
    assert m.gc_stats["collections"] > 0


def test_margin_boundary_is_strict():
    m = Machine(heap_cells=4096, heap_margin=256)
    m.heap.extend([0] * (m.heap_soft - len(m.heap)))
    m.event_flag = 0
    assert m.safe_point(0) is False
    assert m.gc_stats["collections"] == 0 and m.gc_stats["expansions"] == 0


def test_nested_solutions_are_reentrant(m):
    m.consult_text("inner(X) :- findall(Y, member(Y, [1,2,3]), L), sum_list(L, X).")
    r = m.query("findall(S, (member(_, [a,b]), inner(S)), L)")
    assert r[0]["L"] == Struct(".", (6, Struct(".", (6, "[]"))))


def test_merge_off_same_answers():
    src = "f(X, Y) :- Y is X * 3 + 1, Y > 4.\n"
    a, b = Machine(merge=True), Machine(merge=False)
    a.consult_text(src)
    b.consult_text(src)
    for q in ("f(1, Y)", "f(2, Y)", "f(0, 1)"):
        assert a.query(q) == b.query(q)
