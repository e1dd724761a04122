import io

import pytest
from support import SideChannel

from wamlet.machine import Machine, PrologError
from wamlet.syntax import Struct, mklist


@pytest.fixture
def m():
    return Machine()


def one(m, q, name):
    rows = m.query(q)
    assert len(rows) == 1, rows
    return rows[0][name]


def error_formal(m, q):
    with pytest.raises(PrologError) as e:
        m.query(q)
    t = e.value.term
    return t.args[0] if isinstance(t, Struct) and t.name == "error" else t


# unification and comparison ---------------------------------------------------------

def test_cyclic_unify_terminates(m):
    assert len(m.query("X = f(X), Y = f(Y), X = Y")) == 1
    assert len(m.query("X = f(X, a), Y = f(Y, b), \\+ X = Y")) == 1


def test_failed_unify_undoes_bindings(m):
    assert len(m.query("\\+ f(A, A) = f(1, 2), var(A)")) == 1


def test_compare_standard_order(m):
    assert one(m, "compare(O, a, a)", "O") == "="
    assert one(m, "compare(O, X, Y)", "O") == "<"
    got = one(m, "msort([f(a), b, 1, 2.5], L)", "L")
    assert got == mklist([1, 2.5, "b", Struct("f", ("a",))])


def test_compare_cyclic_equal(m):
    assert one(m, "X = f(X), Y = f(Y), compare(O, X, Y)", "O") == "="
    assert one(m, "X = f(X, a), Y = f(Y, b), compare(O, X, Y)", "O") == "<"


# arithmetic ---------------------------------------------------------------------------

def test_arith_basics(m):
    assert one(m, "X is max(2+1, 2)", "X") == 3
    assert one(m, "X is 0+0", "X") == 0
    assert one(m, "X is 7/2", "X") == 3.5
    assert one(m, "X is 4/2", "X") == 2
    assert one(m, "X is abs(-3) + sign(-2)", "X") == 2
    assert one(m, "X is min(3, 2.5)", "X") == 2.5


def test_arith_errors(m):
    assert error_formal(m, "X is 1152921504606846975 + 1").name == "evaluation_error"
    assert error_formal(m, "X is foo + 1") == Struct("type_error", ("evaluable", Struct("/", ("foo", 0))))
    assert error_formal(m, "X is Y + 1") == "instantiation_error"


def test_dynamic_clause_uses_interpreted_arith():
    m = Machine()
    m.consult_text(":- dynamic(inc/2).\n")
    m.query("assertz((inc(X, Y) :- Y is max(X + 1, 0)))")
    assert one(m, "inc(4, Y)", "Y") == 5


# terms ------------------------------------------------------------------------------

def test_copy_term_sharing(m):
    c = one(m, "copy_term(f(X, Y, X), C)", "C")
    assert c.args[0] is c.args[2] and c.args[0] is not c.args[1]


def test_copy_cyclic(m):
    assert len(m.query("X = f(X, Z), copy_term(X, Y), Y = X")) == 1


def test_copy_attributed():
    m = Machine()
    m.consult_text("d:verify_attributes(_, _, []).")
    assert len(m.query("put_attr(X, d, 1), copy_term(X, Y), get_attr(Y, d, 1), Y \\== X")) == 1


def test_term_construction(m):
    assert one(m, "X =.. [f, 1, 2]", "X") == Struct("f", (1, 2))
    assert one(m, "arg(2, f(a, b), X)", "X") == "b"
    t = one(m, "functor(T, f, 2)", "T")
    assert t.name == "f" and len(t.args) == 2


def test_atoms_and_text(m):
    assert one(m, "atom_codes(abc, L)", "L") == mklist([97, 98, 99])
    assert one(m, "atom_length(hello, N)", "N") == 5
    assert len(m.query("atom_concat(X, Y, ab)")) == 3
    assert one(m, "number_codes(N, \"42\")", "N") == 42


def test_findall_and_sorting(m):
    assert one(m, "findall(X, member(X, [b, a]), L)", "L") == mklist(["b", "a"])
    assert one(m, "sort([c, a, b, a], L)", "L") == mklist(["a", "b", "c"])
    assert one(m, "keysort([b-1, a-2, b-0], L)", "L") == mklist(
        [Struct("-", ("a", 2)), Struct("-", ("b", 1)), Struct("-", ("b", 0))])


def test_write_family():
    out = io.StringIO()
    m = Machine(out=out)
    m.query("writeq('hello world'), nl, write(f(X, 'A')), nl, print([1, 2])")
    lines = out.getvalue().splitlines()
    assert lines[0] == "'hello world'"
    assert lines[1].startswith("f(_") and lines[1].endswith(",A)")
    assert lines[2] == "[1,2]"


# catch / throw / cleanup -------------------------------------------------------------

def test_catch_throw(m):
    assert m.query("catch(throw(x), x, true)") == [{}]
    assert error_formal(m, "catch(throw(x), y, _)") == "x"


def test_cleanup_immediate_on_det_success(m):
    side = SideChannel(m)
    m.query("call_cleanup(true, '$log'(c)), '$log'(after)")
    assert side.log == ["c", "after"]


def test_cleanup_at_cut(m):
    side = SideChannel(m)
    m.query("call_cleanup(member(X, [1, 2]), '$log'(c)), '$log'(got(X)), !, '$log'(cut)")
    assert side.log == [Struct("got", (1,)), "c", "cut"]


def test_cleanup_on_failure(m):
    side = SideChannel(m)
    assert m.query("call_cleanup(fail, '$log'(c)) ; '$log'(alt)") == [{}]
    assert side.log == ["c", "alt"]


def test_cleanup_before_recovery(m):
    side = SideChannel(m)
    m.query("catch(call_cleanup(throw(e), '$log'(c)), e, '$log'(recovered))")
    assert side.log == ["c", "recovered"]


def test_cleanup_exception_propagates(m):
    assert error_formal(m, "call_cleanup(true, throw(oops))") == "oops"


# profiling ---------------------------------------------------------------------------

def test_profile_data_and_reset():
    m = Machine(profile=True)
    m.consult_text("app([], L, L).\napp([H|T], L, [H|R]) :- app(T, L, R).\n"
                   "nrev([], []).\nnrev([H|T], R) :- nrev(T, RT), app(RT, [H], R).\n")
    rows = m.query("profile_data(D)")[0]["D"]
    zero = rows
    m.query("numlist(1, 30, L), nrev(L, _)")
    first = m.query("profile_data(D)")[0]["D"]
    m.query("profile_reset")
    assert m.query("profile_data(D)")[0]["D"] == zero
    m.query("numlist(1, 30, L), nrev(L, _)")
    assert m.query("profile_data(D)")[0]["D"] == first

    def entries(data, name, arity, clause):
        t = data
        while t != "[]":
            item, t = t.args
            (pi_k, n), _ = item.args[0].args, item.args[1]
            pi, k = pi_k.args
            if pi == Struct("/", (name, arity)) and k == clause:
                return n
        raise KeyError
    assert entries(first, "nrev", 2, 2) == 30
    assert entries(first, "app", 3, 2) == 30 * 29 // 2


# misc --------------------------------------------------------------------------------

def test_op_directive(m):
    m.consult_text(":- op(700, xfx, ===>).\nrule(a ===> b).\n")
    assert one(m, "rule(X ===> Y)", "Y") == "b"


def test_between_and_succ(m):
    assert [r["X"] for r in m.query("between(1, 3, X)")] == [1, 2, 3]
    assert one(m, "succ(X, 3)", "X") == 2
