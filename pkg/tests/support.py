"""Drivers that run the engine and the oracles side by side."""

from __future__ import annotations

from wamlet.machine import Machine, PrologError
from wamlet.syntax import Struct, variant_key
from wamlet.writer import term_to_text


def clauses_text(clauses, ops=None) -> str:
    return "".join(term_to_text(cl, quoted=True, ops=ops) + " .\n" for cl in clauses)


def load(m, clauses, file="user"):
    errors: list = []
    m.consult_text(clauses_text(clauses, m.ops), file, errors)
    assert not errors, errors
    return m


def engine_solve(m, goal, limit=None):
    """Solutions of a host goal as goal instances plus the error formal."""
    h = len(m.heap)
    c = m.store.build_term(goal, {})
    sols = []
    err = None
    gen = m.solve(c, [c])
    try:
        for (val,) in gen:
            sols.append(m.store.to_host(val, {}, cyclic_ok=True))
            if limit is not None and len(sols) >= limit:
                break
    except PrologError as e:
        t = e.term
        err = t.args[0] if isinstance(t, Struct) and t.name == "error" else t
    finally:
        gen.close()
    del m.heap[h:]
    return sols, err


def keys(sols):
    return [variant_key(s) for s in sols]


class SideChannel:
    """Logging and counter builtins that survive backtracking."""

    def __init__(self, m):
        self.m = m
        self.log: list = []
        self.counters: list[int] = []
        from wamlet.terms import int_cell
        self._int = int_cell

        def log(m, x):
            self.log.append(m.store.to_host(x[0], {}))
            return True

        def new_counter(m, x):
            self.counters.append(0)
            return m.unify(x[0], int_cell(len(self.counters) - 1))

        def tick(m, x):
            k = m.deref(x[0]) >> 3
            self.counters[k] += 1
            return m.unify(x[1], int_cell(self.counters[k]))

        for name, fn in (("$log", log), ("$counter_new", new_counter)):
            m.pred((name, 1)).builtin = (0, fn)
        m.pred(("$counter_tick", 2)).builtin = (0, tick)

    def reset(self):
        self.log = []
        self.counters = []


def fresh_machine(**kw) -> Machine:
    return Machine(**kw)
