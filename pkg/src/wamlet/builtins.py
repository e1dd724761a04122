"""Predicates implemented in Python.

Deterministic builtins are ``fn(m, x) -> bool``; the machine proceeds on
True and fails on False.  Control builtins take over the machine
themselves (they set ``code``/``p`` or enter another predicate) and are
registered with kind 1.
"""

from __future__ import annotations

import functools
import time

from . import arith, attvar
from .syntax import Struct
from .termops import compare_terms, copy_out, copy_term, instantiate, is_ground, term_variables
from .terms import (
    ATOM_SUB, FLOAT_HDR, FUNCTORS, INT_SUB, LIST, MAX_INT, NIL, REF, STRUCT, TRUE, Cell,
    CleanupEntry, atom_cell, atom_name, functor_word, int_cell,
)

DET: dict = {}
CTRL: dict = {}


def det(name, arity):
    def deco(fn):
        DET[(name, arity)] = fn
        return fn
    return deco


def ctrl(name, arity):
    def deco(fn):
        CTRL[(name, arity)] = fn
        return fn
    return deco


def install(m):
    for key, fn in DET.items():
        p = m.pred(key)
        p.builtin = (0, fn)
        p.defined = True
    for key, fn in attvar.BUILTINS.items():
        p = m.pred(key)
        p.builtin = (0, fn)
        p.defined = True
    for key, fn in CTRL.items():
        p = m.pred(key)
        p.builtin = (1, fn)
        p.defined = True


# -- error helpers ------------------------------------------------------------------

def _throw(formal):
    from .machine import PrologThrow
    return PrologThrow(formal)


def inst_error():
    return _throw("instantiation_error")


def type_error(kind, c):
    return _throw(Struct("type_error", (kind, Cell(c))))


def domain_error(kind, c):
    return _throw(Struct("domain_error", (kind, Cell(c))))


def is_var(c):
    return c & 3 == REF


def is_atom(c):
    return c & 7 == ATOM_SUB


def is_int(c):
    return c & 7 == INT_SUB


def is_callable(m, c):
    return is_atom(c) or c & 3 == LIST or (c & 3 == STRUCT and m.heap[c >> 2] != FLOAT_HDR)


def is_compound(m, c):
    return c & 3 == LIST or (c & 3 == STRUCT and m.heap[c >> 2] != FLOAT_HDR)


def need_int(m, c):
    c = m.deref(c)
    if is_var(c):
        raise inst_error()
    if not is_int(c):
        raise type_error("integer", c)
    return c >> 3


def need_atom(m, c):
    c = m.deref(c)
    if is_var(c):
        raise inst_error()
    if not is_atom(c):
        raise type_error("atom", c)
    return atom_name(c)


def need_callable(m, c):
    c = m.deref(c)
    if is_var(c):
        raise inst_error()
    if not is_callable(m, c):
        raise type_error("callable", c)
    return c


def list_items(m, c, partial_ok=False):
    """Elements of a proper list; errors for partial or improper lists."""
    items = []
    heap = m.heap
    c = m.deref(c)
    while c & 3 == LIST:
        i = c >> 2
        items.append(heap[i])
        c = m.deref(heap[i + 1])
    if c != NIL:
        if partial_ok:
            return None
        if is_var(c):
            raise inst_error()
        raise type_error("list", c)
    return items


def mk_compound(m, name, args):
    if name == "." and len(args) == 2:
        return m.store.make_list([args[0]], args[1])
    return m.store.make_struct(name, args)


def host(m, c):
    return m.store.to_host(c, {}, cyclic_ok=True)


def num_cell(m, v):
    return int_cell(v) if type(v) is int else m.store.make_float(v)


def functor_of(m, c):
    """(name, arity) of a dereferenced callable term."""
    if is_atom(c):
        return atom_name(c), 0
    if c & 3 == LIST:
        return ".", 2
    fid = m.heap[c >> 2] >> 3
    return FUNCTORS.names[fid], FUNCTORS.arities[fid]


def goal_args(m, c):
    if is_atom(c):
        return []
    return m.store.args_of(c)


# -- control ------------------------------------------------------------------------

_CONTROL = {(",", 2), (";", 2), ("->", 2), ("!", 0), ("\\+", 1)}


def _call_n(m, x, extra):
    g = need_callable(m, x[0])
    name, n = functor_of(m, g)
    args = goal_args(m, g) + list(x[1:1 + extra])
    key = (name, len(args))
    if key in _CONTROL:
        x[0] = mk_compound(m, name, args) if extra else g
        x[1] = int_cell(len(m.cps))
        return m.enter(m.interp)
    x[:len(args)] = args
    return m.enter(m.pred(key))


for _n in range(8):
    CTRL[("call", _n + 1)] = (lambda k: lambda m, x: _call_n(m, x, k))(_n)


def _proceed(m):
    m.code = m.cpc
    m.p = m.cpp


@ctrl("throw", 1)
def throw_(m, x):
    from .machine import _Ball
    c = m.deref(x[0])
    if is_var(c):
        raise inst_error()
    raise _Ball(copy_out(m.store, c))


@ctrl("$catch_enter", 3)
def catch_enter(m, x):
    from .machine import CATCH
    cp = m.push_cp(CATCH, 3, None, m.B0)
    if not m.unify(x[2], int_cell(cp.serial)):
        return m.fail()
    _proceed(m)


@ctrl("$catch_exit", 1)
def catch_exit(m, x):
    from .machine import CATCH, REACTIVATE
    serial = m.deref(x[0]) >> 3
    cps = m.cps
    if cps and cps[-1].serial == serial and cps[-1].kind == CATCH:
        m.pop_cp()
    else:
        for cp in reversed(cps):
            if cp.serial == serial:
                if cp.kind == CATCH and cp.active:
                    cp.active = False
                    r = m.push_cp(REACTIVATE, 0, None, m.B0)
                    r.data = cp
                break
    _proceed(m)


@ctrl("$cleanup_push", 2)
def cleanup_push(m, x):
    b0 = len(m.cps)
    if m.cps:
        m.cps[-1].c = True
    e = CleanupEntry(x[0], b0)
    m.trail.append(e)
    m.next_handle += 1
    m.cleanup_handles[m.next_handle] = e
    if not m.unify(x[1], int_cell(m.next_handle)):
        return m.fail()
    _proceed(m)


@ctrl("$cleanup_exit", 1)
def cleanup_exit(m, x):
    from .machine import CLEANUP, UNEXIT
    e = m.cleanup_handles.get(m.deref(x[0]) >> 3)
    if e is not None and not e.done:
        e.exited = True
        if len(m.cps) <= e.b0:
            # deterministic exit: run the cleanup at the next safe point
            m.cleanup_handles.pop(m.deref(x[0]) >> 3, None)
            m.cleanup_scan = True
            m.event_flag |= CLEANUP
            e.done = True
            m.pending_cleanups.append(copy_out(m.store, e.goal))
        else:
            for cp in m.cps[:e.b0]:
                cp.c = True
            u = m.push_cp(UNEXIT, 0, None, m.B0)
            u.data = e
    _proceed(m)


@ctrl("$verify_hook", 4)
def verify_hook(m, x):
    name = atom_name(m.deref(x[0]))
    p = m.preds.get((name + ":verify_attributes", 3))
    if p is not None and (p.clauses or p.dynamic is not None):
        x[0], x[1], x[2] = x[1], x[2], x[3]
        return m.enter(p)
    if not m.unify(x[3], NIL):
        return m.fail()
    _proceed(m)


@ctrl("$dyn_clauses", 3)
def dyn_clauses(m, x):
    """'$dyn_clauses'(Head, Body, Ref): enumerate matching dynamic clauses."""
    from .dyndb import DynPred
    from .machine import RETRY
    h = m.deref(x[0])
    if is_var(h):
        raise inst_error()
    if not is_callable(m, h):
        raise type_error("callable", h)
    name, n = functor_of(m, h)
    p = m.preds.get((name, n))
    if p is None or p.dynamic is None:
        if p is not None and (p.clauses or p.builtin is not None):
            raise _throw(Struct("permission_error", ("access", "private_procedure",
                                                     Struct("/", (name, n)))))
        return m.fail()
    dp = p.dynamic
    t = m.dyn.tick()
    key = m.arg_key(goal_args(m, h)[0]) if n else None
    cur = dp.start(key)
    c, cur = DynPred.advance(cur, t)
    if c is None:
        return m.fail()
    cp = m.push_cp(RETRY, 3, _dyn_step, m.B0)
    cp.stamp = t
    cp.data = (dp, c, cur, t)
    if _dyn_step(m, cp):
        _proceed(m)
    else:
        m.fail()


def _dyn_step(m, cp):
    """Try the next clause of a '$dyn_clauses' choicepoint."""
    from .dyndb import DynPred
    dp, c, cur, t = cp.data
    while c is not None:
        nxt, cur2 = DynPred.advance(cur, t)
        if nxt is None:
            m.pop_cp()
        else:
            cp.data = (dp, nxt, cur2, t)
        tr = len(m.trail)
        h = len(m.heap)
        if _dyn_match(m, dp, c):
            return True
        found = m.store.undo_trail(tr)
        if found:
            m.schedule_cleanups(found)
        del m.heap[h:]
        if nxt is None:
            return False
        c, cur = nxt, cur2
    return False


def _dyn_match(m, dp, c):
    heap = m.heap
    x = m.x
    root = instantiate(heap, c.bp)
    i = root >> 2
    hd = m.deref(x[0])
    args = goal_args(m, hd)
    for k in range(dp.arity):
        if not m.unify(args[k], heap[i + 1 + k]):
            return False
    if not m.unify(x[1], heap[i + 1 + dp.arity]):
        return False
    ref = m.store.make_struct("$ref", [int_cell(c.i), int_cell(c.j)])
    return m.unify(x[2], ref)


@ctrl("halt", 0)
def halt0(m, x):
    from .machine import Halt
    raise Halt(0)


@ctrl("halt", 1)
def halt1(m, x):
    from .machine import Halt
    raise Halt(need_int(m, x[0]))


@ctrl("$cut", 1)
def cut1(m, x):
    m.else_alt = None
    m.cut_to(m.deref(x[0]) >> 3)
    _proceed(m)


# -- simple control and unification -----------------------------------------------------

@det("true", 0)
def true_(m, x):
    return True


@det("otherwise", 0)
def otherwise(m, x):
    return True


@det("fail", 0)
def fail_(m, x):
    return False


@det("false", 0)
def false_(m, x):
    return False


@det("=", 2)
def unify_(m, x):
    return m.unify(x[0], x[1])


@det("\\=", 2)
def not_unify(m, x):
    tr = len(m.trail)
    h = len(m.heap)
    hb = m.store.HB
    m.store.HB = 1 << 62
    ok = m.unify(x[0], x[1])
    m.store.HB = hb
    m.store.undo_trail(tr)
    del m.heap[h:]
    m.pending_wake = []
    return not ok


def _cmp(m, a, b):
    return compare_terms(m.store, a, b)


@det("==", 2)
def eq(m, x):
    return _cmp(m, x[0], x[1]) == 0


@det("\\==", 2)
def neq(m, x):
    return _cmp(m, x[0], x[1]) != 0


@det("@<", 2)
def lt(m, x):
    return _cmp(m, x[0], x[1]) < 0


@det("@>", 2)
def gt(m, x):
    return _cmp(m, x[0], x[1]) > 0


@det("@=<", 2)
def le(m, x):
    return _cmp(m, x[0], x[1]) <= 0


@det("@>=", 2)
def ge(m, x):
    return _cmp(m, x[0], x[1]) >= 0


@det("compare", 3)
def compare(m, x):
    o = m.deref(x[0])
    if not is_var(o):
        if not is_atom(o):
            raise type_error("atom", o)
        if atom_name(o) not in ("<", "=", ">"):
            raise domain_error("order", o)
    r = _cmp(m, x[1], x[2])
    return m.unify(x[0], atom_cell("<" if r < 0 else ">" if r > 0 else "="))


# -- type tests ----------------------------------------------------------------------------

def _test(name, f):
    DET[(name, 1)] = lambda m, x: f(m, m.deref(x[0]))


_test("var", lambda m, c: is_var(c))
_test("nonvar", lambda m, c: not is_var(c))
_test("atom", lambda m, c: is_atom(c))
_test("integer", lambda m, c: is_int(c))
_test("float", lambda m, c: m.store.is_float(c))
_test("number", lambda m, c: is_int(c) or m.store.is_float(c))
_test("atomic", lambda m, c: c & 3 == 3 or m.store.is_float(c))
_test("compound", is_compound)
_test("callable", is_callable)
_test("is_list", lambda m, c: list_items(m, c, partial_ok=True) is not None)
_test("ground", lambda m, c: is_ground(m.store, c))


# -- arithmetic ---------------------------------------------------------------------------

@det("is", 2)
def is_(m, x):
    return m.unify(x[0], num_cell(m, arith.eval_cell(m.heap, x[1])))


def _arith_cmp(op):
    f = {"=:=": lambda a, b: a == b, "=\\=": lambda a, b: a != b, "<": lambda a, b: a < b,
         ">": lambda a, b: a > b, "=<": lambda a, b: a <= b, ">=": lambda a, b: a >= b}[op]
    DET[(op, 2)] = lambda m, x: f(arith.eval_cell(m.heap, x[0]), arith.eval_cell(m.heap, x[1]))


for _op in ("=:=", "=\\=", "<", ">", "=<", ">="):
    _arith_cmp(_op)


@det("succ", 2)
def succ(m, x):
    a = m.deref(x[0])
    if is_var(a):
        n = need_int(m, x[1])
        if n < 0:
            raise type_error("not_less_than_zero", m.deref(x[1]))
        if n == 0:
            return False
        return m.unify(a, int_cell(n - 1))
    n = need_int(m, a)
    if n < 0:
        raise type_error("not_less_than_zero", a)
    return m.unify(x[1], int_cell(arith.check_int(n + 1)))


@det("plus", 3)
def plus(m, x):
    a, b, c = (m.deref(v) for v in x[:3])
    if not is_var(a) and not is_var(b):
        return m.unify(c, int_cell(arith.check_int(need_int(m, a) + need_int(m, b))))
    if not is_var(a) and not is_var(c):
        return m.unify(b, int_cell(need_int(m, c) - need_int(m, a)))
    if not is_var(b) and not is_var(c):
        return m.unify(a, int_cell(need_int(m, c) - need_int(m, b)))
    raise inst_error()


# -- term construction --------------------------------------------------------------------

@det("functor", 3)
def functor_(m, x):
    t = m.deref(x[0])
    if not is_var(t):
        if is_compound(m, t):
            name, n = functor_of(m, t)
            return m.unify(x[1], atom_cell(name)) and m.unify(x[2], int_cell(n))
        return m.unify(x[1], t) and m.unify(x[2], int_cell(0))
    name = m.deref(x[1])
    n = m.deref(x[2])
    if is_var(name) or is_var(n):
        raise inst_error()
    if not is_int(n):
        raise type_error("integer", n)
    k = n >> 3
    if k < 0:
        raise domain_error("not_less_than_zero", n)
    if k > 255:
        raise _throw(Struct("representation_error", ("max_arity",)))
    if k == 0:
        if is_compound(m, name):
            raise type_error("atomic", name)
        return m.unify(t, name)
    if is_compound(m, name):
        raise type_error("atomic", name)
    if not is_atom(name):
        raise type_error("atom", name)
    args = [m.store.new_var() for _ in range(k)]
    return m.unify(t, mk_compound(m, atom_name(name), args))


@det("arg", 3)
def arg_(m, x):
    n = need_int(m, x[0])
    t = m.deref(x[1])
    if is_var(t):
        raise inst_error()
    if not is_compound(m, t):
        raise type_error("compound", t)
    args = m.store.args_of(t)
    if 1 <= n <= len(args):
        return m.unify(x[2], args[n - 1])
    return False


@det("=..", 2)
def univ(m, x):
    t = m.deref(x[0])
    if not is_var(t):
        if is_compound(m, t):
            name, _ = functor_of(m, t)
            lst = m.store.make_list([atom_cell(name)] + m.store.args_of(t))
        else:
            lst = m.store.make_list([t])
        return m.unify(x[1], lst)
    items = list_items(m, x[1])
    if not items:
        raise domain_error("non_empty_list", NIL)
    head = m.deref(items[0])
    if is_var(head):
        raise inst_error()
    if len(items) == 1:
        if is_compound(m, head):
            raise type_error("atomic", head)
        return m.unify(t, head)
    if not is_atom(head):
        raise type_error("atom" if not is_compound(m, head) else "atomic", head)
    return m.unify(t, mk_compound(m, atom_name(head), items[1:]))


@det("copy_term", 2)
def copy_term_(m, x):
    return m.unify(x[1], copy_term(m.store, x[0], attrs=True))


@det("term_variables", 2)
def term_variables_(m, x):
    return m.unify(x[1], m.store.make_list(term_variables(m.store, x[0])))


# -- atoms and strings ---------------------------------------------------------------

def _text(m, c, what="atom"):
    """Text of an atom, number, code list or char list; None for variables."""
    c = m.deref(c)
    if is_var(c):
        return None
    if is_atom(c):
        return atom_name(c)
    if is_int(c):
        return str(c >> 3)
    if m.store.is_float(c):
        from .writer import format_float
        return format_float(m.store.float_value(c))
    items = list_items(m, c, partial_ok=True)
    if items is None:
        raise type_error(what, c)
    out = []
    for it in items:
        it = m.deref(it)
        if is_var(it):
            raise inst_error()
        if is_int(it):
            code = it >> 3
            if not 0 <= code <= 0x10FFFF:
                raise _throw(Struct("representation_error", ("character_code",)))
            out.append(chr(code))
        elif is_atom(it) and len(atom_name(it)) == 1:
            out.append(atom_name(it))
        else:
            raise type_error("character", it)
    return "".join(out)


def _parse_number(m, s, culprit):
    from .reader import PrologSyntaxError, parse_term
    try:
        t = parse_term(s.strip() + " .").term
    except PrologSyntaxError:
        t = None
    if isinstance(t, Struct) and t.name == "-" and len(t.args) == 1 and isinstance(
            t.args[0], (int, float)) and s.strip().startswith("-"):
        t = -t.args[0]
    if isinstance(t, bool) or not isinstance(t, (int, float)):
        raise _throw(Struct("syntax_error", ("illegal_number",)))
    return t


def _codes(m, s):
    return m.store.make_list([int_cell(ord(ch)) for ch in s])


def _chars(m, s):
    return m.store.make_list([atom_cell(ch) for ch in s])


@det("atom_codes", 2)
def atom_codes(m, x):
    a = m.deref(x[0])
    if not is_var(a):
        if is_compound(m, a):
            raise type_error("atom", a)
        return m.unify(x[1], _codes(m, _text(m, a)))
    s = _text(m, x[1])
    if s is None:
        raise inst_error()
    return m.unify(a, atom_cell(s))


@det("atom_chars", 2)
def atom_chars(m, x):
    a = m.deref(x[0])
    if not is_var(a):
        if is_compound(m, a):
            raise type_error("atom", a)
        return m.unify(x[1], _chars(m, _text(m, a)))
    s = _text(m, x[1])
    if s is None:
        raise inst_error()
    return m.unify(a, atom_cell(s))


@det("char_code", 2)
def char_code(m, x):
    a = m.deref(x[0])
    if not is_var(a):
        if not is_atom(a) or len(atom_name(a)) != 1:
            raise type_error("character", a)
        return m.unify(x[1], int_cell(ord(atom_name(a))))
    n = need_int(m, x[1])
    return m.unify(a, atom_cell(chr(n)))


@det("atom_length", 2)
def atom_length(m, x):
    a = m.deref(x[0])
    if is_var(a):
        raise inst_error()
    if is_compound(m, a):
        raise type_error("atom", a)
    n = m.deref(x[1])
    if not is_var(n) and not is_int(n):
        raise type_error("integer", n)
    return m.unify(n, int_cell(len(_text(m, a))))


@det("number_codes", 2)
def number_codes(m, x):
    a = m.deref(x[0])
    s = _text(m, x[1]) if not is_var(m.deref(x[1])) else None
    if s is not None:
        return m.unify(a, num_cell(m, _parse_number(m, s, x[1])))
    if is_var(a):
        raise inst_error()
    return m.unify(x[1], _codes(m, _text(m, a)))


@det("number_chars", 2)
def number_chars(m, x):
    a = m.deref(x[0])
    s = _text(m, x[1]) if not is_var(m.deref(x[1])) else None
    if s is not None:
        return m.unify(a, num_cell(m, _parse_number(m, s, x[1])))
    if is_var(a):
        raise inst_error()
    return m.unify(x[1], _chars(m, _text(m, a)))


@det("atom_number", 2)
def atom_number(m, x):
    a = m.deref(x[0])
    if is_var(a):
        n = m.deref(x[1])
        if is_var(n):
            raise inst_error()
        return m.unify(a, atom_cell(_text(m, n)))
    try:
        v = _parse_number(m, need_atom(m, a), a)
    except Exception as e:  # not a number: plain failure
        if type(e).__name__ == "PrologThrow" and isinstance(e.formal, Struct) \
                and e.formal.name == "syntax_error":
            return False
        raise
    return m.unify(x[1], num_cell(m, v))


@det("atom_to_term", 3)
def atom_to_term(m, x):
    from .reader import parse_term
    s = _text(m, x[0])
    if s is None:
        raise inst_error()
    at = parse_term(s if s.rstrip().endswith(".") else s + " .", m.ops)
    vm: dict = {}
    t = m.store.build_term(at.term, vm)
    bindings = [m.store.make_struct("=", [atom_cell(name), vm[id(v)]])
                for name, v in at.varnames.items() if id(v) in vm]
    return m.unify(x[1], t) and m.unify(x[2], m.store.make_list(bindings))


@det("term_to_atom", 2)
def term_to_atom(m, x):
    from .writer import term_to_text
    t = m.deref(x[0])
    if is_var(t):
        return atom_to_term(m, [x[1], t, m.store.new_var()])
    return m.unify(x[1], atom_cell(term_to_text(host(m, t), ops=m.ops)))


@det("$atom_concat", 3)
def atom_concat(m, x):
    a = _text(m, x[0])
    b = _text(m, x[1])
    if a is not None and b is not None:
        return m.unify(x[2], atom_cell(a + b))
    c = _text(m, x[2])
    if c is None:
        raise inst_error()
    if a is not None:
        return c.startswith(a) and m.unify(x[1], atom_cell(c[len(a):]))
    if b is not None:
        return c.endswith(b) and m.unify(x[0], atom_cell(c[:len(c) - len(b)]))
    raise inst_error()  # enumeration of splits is done by '$atom_splits'


@det("$atom_splits", 2)
def atom_splits(m, x):
    c = _text(m, x[0])
    if c is None:
        raise inst_error()
    pairs = [m.store.make_struct("-", [atom_cell(c[:k]), atom_cell(c[k:])])
             for k in range(len(c) + 1)]
    return m.unify(x[1], m.store.make_list(pairs))


@det("upcase_atom", 2)
def upcase_atom(m, x):
    return m.unify(x[1], atom_cell(need_atom(m, x[0]).upper()))


@det("atomic_list_concat", 2)
def atomic_list_concat(m, x):
    parts = []
    for it in list_items(m, x[0]):
        s = _text(m, it)
        if s is None:
            raise inst_error()
        parts.append(s)
    return m.unify(x[1], atom_cell("".join(parts)))


# -- sorting --------------------------------------------------------------------------

def _sorted(m, items):
    key = functools.cmp_to_key(lambda a, b: _cmp(m, a, b))
    return sorted(items, key=key)


@det("msort", 2)
def msort(m, x):
    return m.unify(x[1], m.store.make_list(_sorted(m, list_items(m, x[0]))))


@det("sort", 2)
def sort(m, x):
    out = []
    for it in _sorted(m, list_items(m, x[0])):
        if not out or _cmp(m, out[-1], it) != 0:
            out.append(it)
    return m.unify(x[1], m.store.make_list(out))


@det("keysort", 2)
def keysort(m, x):
    items = list_items(m, x[0])
    pairs = []
    for it in items:
        it = m.deref(it)
        if is_var(it):
            raise inst_error()
        if not (it & 3 == STRUCT and m.heap[it >> 2] == functor_word("-", 2)):
            raise type_error("pair", it)
        pairs.append(it)
    key = functools.cmp_to_key(lambda a, b: _cmp(m, m.heap[(a >> 2) + 1],
                                                  m.heap[(b >> 2) + 1]))
    return m.unify(x[1], m.store.make_list(sorted(pairs, key=key)))


# -- findall bags ----------------------------------------------------------------------

@det("$bag_new", 1)
def bag_new(m, x):
    m.next_bag += 1
    m.bags[m.next_bag] = []
    return m.unify(x[0], int_cell(m.next_bag))


@det("$bag_add", 2)
def bag_add(m, x):
    m.bags[m.deref(x[0]) >> 3].append(copy_out(m.store, x[1]))
    return True


@det("$bag_collect", 2)
def bag_collect(m, x):
    bps = m.bags.pop(m.deref(x[0]) >> 3, [])
    items = [instantiate(m.heap, bp) for bp in bps]
    return m.unify(x[1], m.store.make_list(items))


@det("$bag_drop", 1)
def bag_drop(m, x):
    m.bags.pop(m.deref(x[0]) >> 3, None)
    return True


# -- the dynamic database ----------------------------------------------------------------

def _split_clause(m, c):
    c = m.deref(c)
    if is_var(c):
        raise inst_error()
    if c & 3 == STRUCT and m.heap[c >> 2] == functor_word(":-", 2):
        head = m.deref(m.heap[(c >> 2) + 1])
        body = m.deref(m.heap[(c >> 2) + 2])
    else:
        head, body = c, TRUE
    if is_var(head):
        raise inst_error()
    if not is_callable(m, head):
        raise type_error("callable", head)
    if not is_var(body) and not is_callable(m, body):
        raise type_error("callable", body)
    return head, body


def _dyn_pred(m, name, n, create=True):
    p = m.pred((name, n))
    if p.dynamic is None:
        if p.clauses or p.builtin is not None:
            raise _throw(Struct("permission_error", ("modify", "static_procedure",
                                                     Struct("/", (name, n)))))
        if not create:
            return None
        from .dyndb import DynPred
        p.dynamic = DynPred(name, n)
        p.defined = True
    return p


def do_assert(m, c, front):
    head, body = _split_clause(m, c)
    name, n = functor_of(m, head)
    p = _dyn_pred(m, name, n)
    h = len(m.heap)
    args = goal_args(m, head)
    key = m.arg_key(args[0]) if n else None
    cl = m.store.make_struct("$cl", list(args) + [body])
    bp = copy_out(m.store, cl, attrs=False)
    del m.heap[h:]
    return m.dyn.add(p.dynamic, bp, key, front)


def _ref(m, dc):
    return m.store.make_struct("$ref", [int_cell(dc.i), int_cell(dc.j)])


for _name, _front in (("assert", False), ("assertz", False), ("asserta", True)):
    DET[(_name, 1)] = (lambda f: lambda m, x: do_assert(m, x[0], f) is not None)(_front)
    DET[(_name, 2)] = (lambda f: lambda m, x: m.unify(x[1], _ref(m, do_assert(m, x[0], f))))(
        _front)


def _lookup_ref(m, c):
    c = m.deref(c)
    if is_var(c):
        raise inst_error()
    if not (c & 3 == STRUCT and m.heap[c >> 2] == functor_word("$ref", 2)):
        raise type_error("db_reference", c)
    i = m.deref(m.heap[(c >> 2) + 1]) >> 3
    j = m.deref(m.heap[(c >> 2) + 2]) >> 3
    dc = m.dyn.lookup(i, j)
    return c, dc


@det("erase", 1)
def erase(m, x):
    c, dc = _lookup_ref(m, x[0])
    if dc is None or not m.dyn.retract(dc):
        raise _throw(Struct("existence_error", ("db_reference", Cell(c))))
    return True


@det("$retract_ref", 1)
def retract_ref(m, x):
    c, dc = _lookup_ref(m, x[0])
    return dc is not None and m.dyn.retract(dc)


@det("instance", 2)
def instance(m, x):
    from .dyndb import INF
    c, dc = _lookup_ref(m, x[0])
    if dc is None or dc.death != INF:
        raise _throw(Struct("existence_error", ("db_reference", Cell(c))))
    root = instantiate(m.heap, dc.bp)
    args = m.store.args_of(root)
    head = atom_cell(dc.pred.name) if dc.pred.arity == 0 else mk_compound(
        m, dc.pred.name, args[:-1])
    return m.unify(x[1], m.store.make_struct(":-", [head, args[-1]]))


@det("$clause_parts", 3)
def clause_parts(m, x):
    head, body = _split_clause(m, x[0])
    return m.unify(x[1], head) and m.unify(x[2], body)


@det("$ensure_dynamic", 1)
def ensure_dynamic(m, x):
    h = need_callable(m, x[0])
    name, n = functor_of(m, h)
    _dyn_pred(m, name, n)
    return True


def _pred_specs(m, c):
    c = m.deref(c)
    if is_var(c):
        raise inst_error()
    if c & 3 == STRUCT and m.heap[c >> 2] in (functor_word(",", 2), functor_word("/", 2)) \
            and m.heap[c >> 2] == functor_word(",", 2):
        return _pred_specs(m, m.heap[(c >> 2) + 1]) + _pred_specs(m, m.heap[(c >> 2) + 2])
    if c & 3 == LIST or c == NIL:
        out = []
        for it in list_items(m, c):
            out += _pred_specs(m, it)
        return out
    if c & 3 == STRUCT and m.heap[c >> 2] == functor_word("/", 2):
        name = need_atom(m, m.heap[(c >> 2) + 1])
        n = need_int(m, m.heap[(c >> 2) + 2])
        return [(name, n)]
    raise type_error("predicate_indicator", c)


@det("dynamic", 1)
def dynamic(m, x):
    for name, n in _pred_specs(m, x[0]):
        _dyn_pred(m, name, n)
    return True


@det("discontiguous", 1)
def discontiguous(m, x):
    return True


@det("abolish", 1)
def abolish(m, x):
    for name, n in _pred_specs(m, x[0]):
        p = m.preds.get((name, n))
        if p is None:
            continue
        if p.dynamic is None and (p.clauses or p.builtin is not None):
            raise _throw(Struct("permission_error", ("modify", "static_procedure",
                                                     Struct("/", (name, n)))))
        if p.dynamic is not None:
            for dc in list(p.dynamic.clauses()):
                m.dyn.retract(dc)
    return True


# -- output ------------------------------------------------------------------------------

def _write(m, c, quoted, ignore_ops=False):
    from .writer import term_to_text
    m.out.write(term_to_text(host(m, c), quoted=quoted, ops=m.ops, ignore_ops=ignore_ops))
    return True


DET[("write", 1)] = lambda m, x: _write(m, x[0], False)
DET[("print", 1)] = lambda m, x: _write(m, x[0], False)
DET[("writeq", 1)] = lambda m, x: _write(m, x[0], True)
DET[("write_canonical", 1)] = lambda m, x: _write(m, x[0], True, True)


@det("nl", 0)
def nl(m, x):
    m.out.write("\n")
    return True


@det("tab", 1)
def tab(m, x):
    m.out.write(" " * int(arith.eval_cell(m.heap, x[0])))
    return True


@det("put_char", 1)
def put_char(m, x):
    m.out.write(need_atom(m, x[0]))
    return True


@det("flush_output", 0)
def flush_output(m, x):
    try:
        m.out.flush()
    except Exception:
        pass
    return True


def _format(m, fmt, args):
    from .writer import format_float, term_to_text
    out = []
    i = 0
    args = list(args)

    def nxt():
        if not args:
            raise _throw(Struct("format", ("not enough arguments",)))
        return args.pop(0)

    while i < len(fmt):
        ch = fmt[i]
        if ch != "~":
            out.append(ch)
            i += 1
            continue
        i += 1
        num = ""
        while i < len(fmt) and fmt[i].isdigit():
            num += fmt[i]
            i += 1
        if i < len(fmt) and fmt[i] == "*":
            num = str(need_int(m, nxt()))
            i += 1
        d = fmt[i]
        i += 1
        if d == "w" or d == "p":
            out.append(term_to_text(host(m, nxt()), quoted=False, ops=m.ops))
        elif d == "q":
            out.append(term_to_text(host(m, nxt()), quoted=True, ops=m.ops))
        elif d == "a":
            c = m.deref(nxt())
            out.append(_text(m, c) or "")
        elif d == "d":
            v = arith.eval_cell(m.heap, nxt())
            if type(v) is not int:
                raise type_error("integer", num_cell(m, v))
            if num and int(num) > 0:
                s = str(abs(v)).rjust(int(num) + 1, "0")
                s = s[:-int(num)] + "." + s[-int(num):]
                out.append(("-" if v < 0 else "") + s)
            else:
                out.append(str(v))
        elif d in "efg":
            v = float(arith.eval_cell(m.heap, nxt()))
            out.append(f"%.{num or 6}{d}" % v)
        elif d == "n":
            out.append("\n" * int(num or 1))
        elif d == "c":
            out.append(chr(need_int(m, nxt())) * int(num or 1))
        elif d == "s":
            out.append(_text(m, nxt()) or "")
        elif d == "i":
            nxt()
        elif d == "~":
            out.append("~")
        elif d == "t" or d == "|" or d == "+":
            pass
        else:
            raise _throw(Struct("format", (f"unknown directive ~{d}",)))
    m.out.write("".join(out))
    return True


@det("format", 1)
def format1(m, x):
    return _format(m, _text(m, x[0]) or "", [])


@det("format", 2)
def format2(m, x):
    a = m.deref(x[1])
    items = list_items(m, a, partial_ok=True)
    if items is None:
        items = [a]
    return _format(m, _text(m, x[0]) or "", items)


# -- system ----------------------------------------------------------------------------

@det("op", 3)
def op(m, x):
    p = need_int(m, x[0])
    t = need_atom(m, x[1])
    c = m.deref(x[2])
    names = [need_atom(m, it) for it in list_items(m, c)] if (c & 3 == LIST) else [
        need_atom(m, c)]
    for name in names:
        try:
            m.ops.add(p, t, name)
        except ValueError as e:
            raise _throw(_formal(e)) from None
        except PermissionError as e:
            raise _throw(_formal(e)) from None
    return True


def _formal(e):
    a = e.args[0] if e.args else ("domain_error", "operator_specifier")
    if isinstance(a, tuple):
        return Struct(a[0], a[1:])
    return a


@det("set_prolog_flag", 2)
def set_prolog_flag(m, x):
    name = need_atom(m, x[0])
    val = m.deref(x[1])
    if name == "unknown":
        v = need_atom(m, val)
        if v not in ("error", "fail", "warning"):
            raise domain_error("flag_value", val)
        m.flags["unknown"] = "fail" if v == "fail" else "error"
        return True
    raise domain_error("prolog_flag", m.deref(x[0]))


@det("current_prolog_flag", 2)
def current_prolog_flag(m, x):
    name = need_atom(m, x[0])
    if name == "bounded":
        return m.unify(x[1], atom_cell("true"))
    if name == "max_integer":
        return m.unify(x[1], int_cell(MAX_INT))
    if name == "min_integer":
        return m.unify(x[1], int_cell(-MAX_INT - 1))
    if name in m.flags:
        return m.unify(x[1], atom_cell(m.flags[name]))
    return False


@det("garbage_collect", 0)
def garbage_collect(m, x):
    from .collector import collect
    collect(m, 0)
    return True


@det("statistics", 2)
def statistics(m, x):
    key = need_atom(m, x[0])
    now = time.process_time() - m.start_time
    wall = time.time() - m.start_wall
    g = m.gc_stats
    if key in ("runtime", "process_cputime"):
        ms = int(now * 1000)
        v = [ms, ms - m.last_runtime]
        m.last_runtime = ms
    elif key in ("walltime", "real_time"):
        ms = int(wall * 1000)
        v = [ms, ms - m.last_walltime]
        m.last_walltime = ms
    elif key in ("heap", "global_stack"):
        v = [len(m.heap), max(0, m.heap_cap - len(m.heap))]
    elif key == "trail":
        v = [len(m.trail), 0]
    elif key == "choicepoints":
        v = [len(m.cps), 0]
    elif key == "garbage_collection":
        v = [g["collections"], g["reclaimed"], int(g["time"] * 1000)]
    elif key == "stack_shifts":
        v = [g["expansions"], 0, 0]
    elif key == "inferences":
        return m.unify(x[1], int_cell(m.ncalls))
    elif key == "dynamic":
        s = m.dyn.stats()
        v = [s["live"], s["registry"], s["reclaimed"]]
    elif key == "memory":
        s = m.mem.stats()
        v = [s["live_mems"], s["free_mems"], s["host_bytes"]]
    elif key == "choice_modes":
        v = [m.n_try, m.n_else]
    else:
        raise domain_error("statistics_key", m.deref(x[0]))
    return m.unify(x[1], m.store.make_list([int_cell(int(k)) for k in v]))


@det("statistics", 0)
def statistics0(m, x):
    g = m.gc_stats
    s = m.dyn.stats()
    m.out.write(
        f"heap: {len(m.heap)} cells (capacity {m.heap_cap})\n"
        f"trail: {len(m.trail)} entries, choicepoints: {len(m.cps)}\n"
        f"calls: {m.ncalls}, choicepoints pushed: {m.n_try}, else branches: {m.n_else}\n"
        f"gc: {g['collections']} collections, {g['reclaimed']} cells reclaimed, "
        f"{g['expansions']} expansions, {g['time']:.3f} s\n"
        f"dynamic: {s['live']} live clauses, {s['registry']} awaiting reclaim, "
        f"{s['reclaimed']} reclaimed\n")
    return True


@det("$set_interrupt_handler", 1)
def set_interrupt_handler(m, x):
    g = m.deref(x[0])
    m.interrupt_goal = None if is_var(g) else copy_out(m.store, g)
    return True


@det("$set_timer", 1)
def set_timer(m, x):
    m.set_timer(need_int(m, x[0]))
    return True


@det("profile_reset", 0)
def profile_reset(m, x):
    for i in range(len(m.counters)):
        m.counters[i] = 0
    return True


@det("profile_data", 1)
def profile_data(m, x):
    """List of Name/Arity-Clause-Entries-Exits for every profiled clause."""
    out = []
    for key, p in m.preds.items():
        for k, cl in enumerate(p.clauses):
            if cl.entry_counter is None:
                continue
            pi = m.store.make_struct("/", [atom_cell(key[0]), int_cell(key[1])])
            out.append(m.store.make_struct("-", [m.store.make_struct("-", [
                m.store.make_struct("-", [pi, int_cell(k + 1)]),
                int_cell(m.counters[cl.entry_counter])]), int_cell(m.counters[cl.exit_counter])]))
    return m.unify(x[0], m.store.make_list(out))


@det("consult", 1)
def consult(m, x):
    from .consult import consult_file
    consult_file(m, _text(m, x[0]))
    return True


@det("$dyn_reclaim", 0)
def dyn_reclaim(m, x):
    m.dyn.reclaim_dead()
    return True
