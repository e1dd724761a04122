import pytest
from support import SideChannel

from wamlet.machine import Machine, PrologError
from wamlet.syntax import Struct

HOOKS = """
guard:verify_attributes(_, Value, []) :- Value \\== b.
plain:verify_attributes(_, _, []).
"""


@pytest.fixture
def m():
    m = Machine()
    m.consult_text(HOOKS, "hooks.pl")
    return m


def test_put_get(m):
    assert m.query("put_attr(X, guard, v1), get_attr(X, guard, V)")[0]["V"] == "v1"


def test_put_is_undone_on_backtracking(m):
    rows = m.query("put_attr(X, plain, old), "
                   "( put_attr(X, plain, new), fail ; get_attr(X, plain, V) )")
    assert rows[0]["V"] == "old"


def test_del_attr(m):
    assert m.query("put_attr(X, plain, v), del_attr(X, plain), get_attr(X, plain, _)") == []
    assert len(m.query("put_attr(X, plain, v), del_attr(X, plain), X = 1")) == 1


def test_freeze_runs_once(m):
    side = SideChannel(m)
    m.query("freeze(X, '$log'(g)), X = 1, X = 1")
    assert side.log == ["g"]


def test_freeze_bound_runs_immediately(m):
    side = SideChannel(m)
    m.query("freeze(1, '$log'(g))")
    assert side.log == ["g"]


def test_freeze_suspension_order(m):
    side = SideChannel(m)
    m.query("freeze(X, '$log'(g1)), freeze(X, '$log'(g2)), X = a")
    assert side.log == ["g1", "g2"]


def test_frozen_goal_undone_by_backtracking(m):
    side = SideChannel(m)
    m.query("( freeze(X, '$log'(first)), fail ; X = 1 )")
    assert side.log == []


def test_plain_handler_behaves_like_unification(m):
    assert m.query("put_attr(X, plain, v), X = f(Y), Y = 1")[0]["X"] == Struct("f", (1,))


def test_guard_handler(m):
    assert m.query("put_attr(X, guard, v), X = b") == []
    assert len(m.query("put_attr(X, guard, v), X = a")) == 1


def test_failing_handler_inside_negation(m):
    assert len(m.query("put_attr(X, guard, v), \\+ X = b, var(X)")) == 1
    assert m.query("put_attr(X, guard, v), \\+ X = a") == []


def test_failing_handler_in_condition_takes_else(m):
    rows = m.query("put_attr(X, guard, v), ( X = b -> R = then ; R = else )")
    assert rows[0]["R"] == "else"


def test_attvar_to_attvar(m):
    side = SideChannel(m)
    m.consult_text("""
log:verify_attributes(V, Value, []) :-
    get_attr(V, log, A),
    ( attvar(Value), get_attr(Value, log, B) -> '$log'(A-B) ; '$log'(A-nonattr) ).
""")
    m.query("put_attr(X, log, x), put_attr(Y, log, y), X = Y")
    assert len(side.log) == 1
    assert side.log[0].name == "-"


def test_mutable_update(m):
    assert m.query("create_mutable(1, M), update_mutable(2, M), get_mutable(V, M)")[0]["V"] == 2


def test_mutable_restored_on_backtracking(m):
    rows = m.query("create_mutable(1, M), ( update_mutable(2, M), update_mutable(3, M), fail "
                   "; get_mutable(V, M) )")
    assert rows[0]["V"] == 1


def test_mutable_type_checks(m):
    assert len(m.query("create_mutable(a, M), mutable(M)")) == 1
    assert m.query("mutable(foo)") == []
    with pytest.raises(PrologError):
        m.query("update_mutable(1, foo)")


def test_mutable_is_not_ground(m):
    assert m.query("create_mutable(a, M), ground(M)") == []
