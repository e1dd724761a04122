import random
import string

from wamlet.attvar import ensure_attvar
from wamlet.machine import WAKEUP, Machine
from wamlet.syntax import Struct, Var
from wamlet.terms import (
    ATTV_MARK, FLOAT_HDR, IMM, LIST, REF, STRUCT, CleanupEntry, TermStore, atom_cell,
    atom_name, int_cell, intern_atom, tag,
)


def test_intern_is_idempotent_and_injective():
    assert intern_atom("foo") == intern_atom("foo")
    assert intern_atom("foo") != intern_atom("bar")
    assert intern_atom("") == intern_atom("")


def test_intern_many_names():
    rng = random.Random(1)
    names = {"".join(rng.choices(string.ascii_letters, k=rng.randint(1, 12)))
             for _ in range(10_000)}
    ids = {n: intern_atom(n) for n in names}
    assert {n: intern_atom(n) for n in names} == ids
    assert len(set(ids.values())) == len(names)
    assert all(atom_name(atom_cell(n)) == n for n in list(names)[:200])


def test_deref_unbound_is_itself():
    s = TermStore()
    v = s.new_var()
    assert s.deref(v) == v
    assert s.deref(s.deref(v)) == s.deref(v)


def test_deref_chain_of_two():
    s = TermStore()
    v, w = s.new_var(), s.new_var()
    s.bind(v >> 2, w)
    s.bind(w >> 2, atom_cell("a"))
    assert s.deref(v) == atom_cell("a")


def test_deref_chain_of_100():
    s = TermStore()
    cells = [s.new_var() for _ in range(100)]
    for a, b in zip(cells, cells[1:]):
        s.bind(a >> 2, b)
    s.bind(cells[-1] >> 2, int_cell(7))
    c = s.deref(cells[0])
    assert tag(c) == IMM and c >> 3 == 7


def test_bind_then_undo():
    s = TermStore()
    v = s.new_var()
    s.HB = len(s.heap)  # as if a choicepoint had just been pushed
    mark = len(s.trail)
    s.bind(v >> 2, atom_cell("a"))
    assert s.deref(v) == atom_cell("a")
    s.undo_trail(mark)
    assert s.deref(v) == v


def test_bind_young_var_is_not_trailed():
    s = TermStore()
    s.HB = len(s.heap)
    v = s.new_var()
    s.bind(v >> 2, atom_cell("a"))
    assert s.trail == []


def test_bind_attvar_sets_event_flag():
    m = Machine()
    i = ensure_attvar(m, m.store.new_var())
    m.event_flag = 0
    m.store.bind(i, atom_cell("a"))
    assert m.event_flag & WAKEUP


def test_undo_value_reset_restores_cell_and_stamp():
    s = TermStore()
    h = len(s.heap)
    s.heap.extend((int_cell(1), int_cell(10)))
    s.trail.append((h, int_cell(1), int_cell(10)))
    s.heap[h], s.heap[h + 1] = int_cell(2), int_cell(11)
    s.undo_trail(0)
    assert s.heap[h:h + 2] == [int_cell(1), int_cell(10)]


def test_undo_returns_cleanup_goals():
    s = TermStore()
    a, b = s.new_var(), s.new_var()
    s.HB = len(s.heap)
    s.bind(a >> 2, int_cell(1))
    g = CleanupEntry(atom_cell("g"), 0)
    s.trail.append(g)
    s.bind(b >> 2, int_cell(2))
    found = s.undo_trail(0)
    assert found == [g]
    assert s.deref(a) == a and s.deref(b) == b


def test_random_binds_undo_to_snapshot():
    rng = random.Random(3)
    s = TermStore()
    cells = [s.new_var() for _ in range(200)]
    s.make_struct("f", cells[:3])
    s.HB = len(s.heap)
    snapshot = list(s.heap)
    for c in rng.sample(cells, 120):
        if s.deref(c) & 3 == REF:
            s.bind(s.deref(c) >> 2, int_cell(rng.randint(0, 9)))
    s.undo_trail(0)
    assert s.heap == snapshot


def test_build_term_shapes():
    s = TermStore()
    assert s.build_term("a") == atom_cell("a")
    x = Var("X")
    c = s.build_term(Struct("f", (x, x)))
    assert tag(c) == STRUCT
    a1, a2 = s.args_of(c)
    assert s.deref(a1) == s.deref(a2)
    f = s.build_term(3.14)
    assert tag(f) == STRUCT and s.heap[f >> 2] == FLOAT_HDR
    assert s.float_value(f) == 3.14
    lst = s.build_term(Struct(".", (1, "[]")))
    assert tag(lst) == LIST


def test_every_cell_has_a_known_tag():
    m = Machine()
    m.query("X = f(Y, [1,2|Z], 2.5, 'a b', g(Y)), copy_term(X, C)")
    assert all(c & 3 in (REF, STRUCT, LIST, IMM) or c == ATTV_MARK for c in m.heap)


def test_round_trip_through_host_terms():
    s = TermStore()
    x = Var("X")
    t = Struct("f", (x, Struct(".", (1, Struct(".", (2.5, "[]")))), "abc", -7, x))
    back = s.to_host(s.build_term(t))
    assert back.args[0] is back.args[4]
    assert back.args[1:4] == t.args[1:4]
