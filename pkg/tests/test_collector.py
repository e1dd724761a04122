import random

from wamlet import collector
from wamlet.machine import Env, Machine
from wamlet.syntax import Struct, Var
from wamlet.termops import compare_terms
from wamlet.terms import int_cell

POISON = -12345


def garbage(m, n):
    for k in range(n):
        m.store.build_term(Struct("junk", (k, Var(), "x")), {})


def test_uninitialized_y_slot_not_scanned():
    m = Machine()
    m.consult_text("p(X) :- q(X), r(Y), s(Y, X).")
    cl = m.preds[("p", 1)].clauses[0]
    code = cl.linked or m.link(cl)
    sym = cl.code
    first_call = next(k for k, ins in enumerate(sym) if ins[0] == "call")
    nperm = cl.cc.nperm
    env = Env(None, None, 0, [POISON] * nperm, code)
    live = list(collector.live_slots(env, first_call + 1))
    assert len(live) < nperm
    # every slot is initialized once the second call has returned
    second_call = next(k for k, ins in enumerate(sym) if ins[0] == "call" and k > first_call)
    assert list(collector.live_slots(env, second_call + 1)) == list(range(nperm))


def test_poisoned_slots_never_marked():
    # collections during a run with uninitialized permanent slots must not crash
    m = Machine(heap_cells=2048, heap_margin=128)
    m.consult_text("p(0) :- !.\n"
                   "p(N) :- length(L, 40), q(L), r(Y), N1 is N - 1, s(Y), p(N1).\n"
                   "q(_). r(y). s(_).\n")
    assert m.query("p(300)") == [{}]
    assert m.gc_stats["collections"] > 0


def test_only_garbage():
    m = Machine()
    base = len(m.heap)
    garbage(m, 2000)
    before, after = collector.collect(m, 0)
    assert before > base + 5000
    assert after <= base


def test_no_garbage_keeps_everything():
    m = Machine()
    collector.collect(m, 0)
    roots = [m.store.build_term(Struct("f", (k, Struct("g", (Var(),)))), {}) for k in range(50)]
    before, after = collector.collect(m, 0, roots)
    before2, after2 = collector.collect(m, 0, roots)
    assert after2 == before2 == after


def test_variable_order_preserved():
    m = Machine()
    vs = []
    for _ in range(20):
        garbage(m, 5)
        vs.append(m.store.new_var())
    order = [[compare_terms(m.store, a, b) for b in vs] for a in vs]
    collector.collect(m, 0, vs)
    assert [[compare_terms(m.store, a, b) for b in vs] for a in vs] == order


def test_prolog_level_collection():
    m = Machine()
    rows = m.query("length(L, 1000), garbage_collect, statistics(garbage_collection, S)")
    assert len(rows) == 1
    assert m.gc_stats["collections"] >= 1


def test_first_breach_with_live_data_grows_heap():
    m = Machine(heap_cells=2048, heap_margin=128)
    roots = [m.store.make_list([int_cell(k) for k in range(1200)])]
    action = collector.policy(m, 0, roots)
    assert action in ("expand", "both")
    assert m.heap_cap == 4096
    # live data yields little, so the next breach expands without collecting
    roots.append(m.store.make_list([int_cell(k) for k in range(1200)]))
    assert collector.policy(m, 0, roots) == "expand"


def test_garbage_loop_stabilizes():
    m = Machine(heap_cells=4096, heap_margin=256)
    m.consult_text("loop(0) :- !.\nloop(N) :- length(L, 30), L = [a|_], N1 is N - 1, loop(N1).\n")
    assert m.query("loop(3000)") == [{}]
    assert m.gc_stats["collections"] > 5
    assert m.gc_stats["expansions"] == 0
    assert m.heap_cap == 4096


def test_value_trail_survives_collection():
    m = Machine()
    rows = m.query("create_mutable(f(old), M), ( update_mutable(g(new), M), garbage_collect, fail "
                   "; get_mutable(V, M) )")
    assert rows[0]["V"] == Struct("f", ("old",))


def test_random_survivors_intact():
    rng = random.Random(5)
    m = Machine()
    keep = []
    for k in range(300):
        t = Struct("n", (k, Struct("m", (rng.random(),)), "a"))
        c = m.store.build_term(t, {})
        if rng.random() < 0.3:
            keep.append((c, t))
    cells = [c for c, _ in keep]
    collector.collect(m, 0, cells)
    assert [m.store.to_host(c, {}) for c in cells] == [t for _, t in keep]
