"""Reference resolution interpreter.

Deliberately simple: host terms, a binding dictionary with a trail,
occurs-free unification, clauses tried in textual order with no indexing,
and the clause list of each predicate frozen when it is called.  Cut is
modelled with frames.  When a ``!`` has run out of solutions for the rest
of its clause it sets ``cut_to`` to its frame; every generator between it
and the frame's owner then returns without trying alternatives, and the
owner clears the mark.

Only a small side-effect-free builtin set is understood.  Anything that
would need more (cyclic results, too deep a recursion, too many steps)
raises :class:`Skip` so the caller can record the case as not compared.
"""

from __future__ import annotations

import sys
from collections import Counter
from dataclasses import dataclass, field

from ..syntax import Struct, Var, conj_list, rename


class Skip(Exception):
    """The oracle cannot decide this case (depth, budget or cyclic term)."""


class DepthExceeded(Skip):
    pass


class PrologFault(Exception):
    """A Prolog error term raised by the interpreted program."""

    def __init__(self, formal):
        super().__init__(formal)
        self.formal = formal


@dataclass
class NaiveResult:
    solutions: list
    error: object = None
    counts: Counter = field(default_factory=Counter)


class _Frame:
    __slots__ = ()


TYPE_TESTS = {
    "var": lambda t: isinstance(t, Var),
    "nonvar": lambda t: not isinstance(t, Var),
    "atom": lambda t: isinstance(t, str),
    "number": lambda t: isinstance(t, (int, float)),
    "integer": lambda t: isinstance(t, int),
    "float": lambda t: isinstance(t, float),
    "atomic": lambda t: isinstance(t, (str, int, float)),
    "compound": lambda t: isinstance(t, Struct),
    "callable": lambda t: isinstance(t, (str, Struct)),
}

COMPARE = {
    "=:=": lambda a, b: a == b, "=\\=": lambda a, b: a != b,
    "<": lambda a, b: a < b, ">": lambda a, b: a > b,
    "=<": lambda a, b: a <= b, ">=": lambda a, b: a >= b,
}


def _idiv(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _mod(a, b):
    return a - b * (a // b)


EVAL2 = {
    "+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
    "//": _idiv, "mod": _mod, "min": min, "max": max,
}
EVAL1 = {"-": lambda a: -a, "abs": abs}


class Interpreter:
    def __init__(self, program, max_depth=12, budget=200_000):
        self.db: dict[tuple, list] = {}
        for cl in program:
            head, body = _split(cl)
            key = (head.name, len(head.args)) if isinstance(head, Struct) else (head, 0)
            self.db.setdefault(key, []).append((head, body))
        self.max_depth = max_depth
        self.budget = budget
        self.bind: dict[int, object] = {}
        self.trail: list[int] = []
        self.counts: Counter = Counter()
        self.cut_to = None

    # -- terms ---------------------------------------------------------------

    def deref(self, t):
        bind = self.bind
        while isinstance(t, Var):
            v = bind.get(id(t))
            if v is None:
                return t
            t = v
        return t

    def _tick(self, n=1):
        self.budget -= n
        if self.budget < 0:
            raise Skip("step budget")

    def unify(self, a, b) -> bool:
        stack = [(a, b)]
        while stack:
            self._tick()
            a, b = stack.pop()
            a = self.deref(a)
            b = self.deref(b)
            if a is b:
                continue
            if isinstance(a, Var):
                self.bind[id(a)] = b
                self.trail.append(a)
                continue
            if isinstance(b, Var):
                self.bind[id(b)] = a
                self.trail.append(b)
                continue
            if isinstance(a, Struct):
                if not (isinstance(b, Struct) and a.name == b.name and len(a.args) == len(b.args)):
                    return False
                stack.extend(zip(a.args, b.args))
                continue
            if isinstance(b, Struct) or type(a) is not type(b) or a != b:
                return False
        return True

    def undo(self, mark):
        trail = self.trail
        bind = self.bind
        while len(trail) > mark:
            del bind[id(trail.pop())]

    def resolve(self, t, path=()):
        """Fully dereferenced copy of ``t``; unbound variables stay shared."""
        t = self.deref(t)
        if isinstance(t, Struct):
            if id(t) in path:
                raise Skip("cyclic term")
            self._tick()
            path = path + (id(t),)
            return Struct(t.name, [self.resolve(a, path) for a in t.args])
        return t

    def identical(self, a, b) -> bool:
        stack = [(a, b)]
        while stack:
            self._tick()
            a, b = stack.pop()
            a = self.deref(a)
            b = self.deref(b)
            if a is b:
                continue
            if isinstance(a, Struct) and isinstance(b, Struct):
                if a.name != b.name or len(a.args) != len(b.args):
                    return False
                stack.extend(zip(a.args, b.args))
                continue
            if isinstance(a, Var) or isinstance(b, Var) or isinstance(a, Struct) \
                    or isinstance(b, Struct):
                return False
            if type(a) is not type(b) or a != b:
                return False
        return True

    def eval(self, t):
        self._tick()
        t = self.deref(t)
        if isinstance(t, Var):
            raise PrologFault("instantiation_error")
        if isinstance(t, (int, float)):
            return t
        if isinstance(t, Struct):
            if len(t.args) == 2 and t.name in EVAL2:
                a = self.eval(t.args[0])
                b = self.eval(t.args[1])
                if t.name in ("//", "mod"):
                    for v in (a, b):
                        if not isinstance(v, int):
                            raise PrologFault(Struct("type_error", ("integer", v)))
                    if b == 0:
                        raise PrologFault(Struct("evaluation_error", ("zero_divisor",)))
                return EVAL2[t.name](a, b)
            if len(t.args) == 1 and t.name in EVAL1:
                return EVAL1[t.name](self.eval(t.args[0]))
            raise PrologFault(Struct("type_error", ("evaluable", Struct("/", (t.name, len(t.args))))))
        raise PrologFault(Struct("type_error", ("evaluable", Struct("/", (t, 0)))))

    # -- execution -------------------------------------------------------------

    def run(self, cont):
        """Yield once per solution of the continuation ``cont``.

        ``cont`` is None or ``(goal, frame, depth, next)``.  Bindings made
        for a solution stay in place while the consumer looks at it and are
        undone before the generator returns.
        """
        if cont is None:
            yield
            return
        goal, frame, depth, nxt = cont
        self._tick()
        goal = self.deref(goal)
        if isinstance(goal, Var):
            raise PrologFault("instantiation_error")
        if isinstance(goal, str):
            name, args = goal, ()
        elif isinstance(goal, Struct):
            name, args = goal.name, goal.args
        else:
            raise PrologFault(Struct("type_error", ("callable", goal)))
        n = len(args)
        mark = len(self.trail)

        if n == 0 and name == "true":
            yield from self.run(nxt)
        elif n == 0 and name in ("fail", "false"):
            return
        elif n == 0 and name == "!":
            yield from self.run(nxt)
            if self.cut_to is None:
                self.cut_to = frame
        elif n == 2 and name == ",":
            yield from self.run((args[0], frame, depth, (args[1], frame, depth, nxt)))
        elif n == 2 and name == ";":
            left = self.deref(args[0])
            if isinstance(left, Struct) and left.name == "->" and len(left.args) == 2:
                yield from self._ite(left.args[0], left.args[1], args[1], frame, depth, nxt)
            else:
                yield from self.run((left, frame, depth, nxt))
                if self.cut_to is None:
                    yield from self.run((args[1], frame, depth, nxt))
        elif n == 2 and name == "->":
            yield from self._ite(args[0], args[1], "fail", frame, depth, nxt)
        elif n == 1 and name in ("\\+", "not"):
            found = False
            inner = _Frame()
            for _ in self.run((args[0], inner, depth, None)):
                found = True
                break
            self._release(inner)
            self.undo(mark)
            if not found:
                yield from self.run(nxt)
        elif n == 1 and name == "call":
            inner = _Frame()
            yield from self.run((args[0], inner, depth, nxt))
            self._release(inner)
        elif n == 2 and name == "=":
            if self.unify(args[0], args[1]):
                yield from self.run(nxt)
        elif n == 2 and name == "\\=":
            ok = self.unify(args[0], args[1])
            self.undo(mark)
            if not ok:
                yield from self.run(nxt)
        elif n == 2 and name in ("==", "\\=="):
            if self.identical(args[0], args[1]) == (name == "=="):
                yield from self.run(nxt)
        elif n == 1 and name in TYPE_TESTS:
            if TYPE_TESTS[name](self.deref(args[0])):
                yield from self.run(nxt)
        elif n == 2 and name == "is":
            if self.unify(args[0], self.eval(args[1])):
                yield from self.run(nxt)
        elif n == 2 and name in COMPARE:
            if COMPARE[name](self.eval(args[0]), self.eval(args[1])):
                yield from self.run(nxt)
        else:
            yield from self._user(goal, (name, n), args, depth, nxt)
        self.undo(mark)

    def _ite(self, c, t, e, frame, depth, nxt):
        mark = len(self.trail)
        inner = _Frame()
        gen = self.run((c, inner, depth, None))
        try:
            taken = next(gen, False) is None
        finally:
            gen.close()
        self._release(inner)
        if taken:
            yield from self.run((t, frame, depth, nxt))
        else:
            yield from self.run((e, frame, depth, nxt))
        self.undo(mark)

    def _user(self, goal, key, args, depth, nxt):
        clauses = self.db.get(key)
        if clauses is None:
            raise PrologFault(Struct("existence_error",
                                     ("procedure", Struct("/", key))))
        if depth >= self.max_depth:
            raise DepthExceeded(f"depth {depth}")
        snapshot = list(clauses)
        frame = _Frame()
        for k, (head, body) in enumerate(snapshot):
            mark = len(self.trail)
            mapping: dict = {}
            h = rename(head, mapping)
            b = rename(body, mapping)
            if self.unify(h, goal):
                self.counts[(key, k)] += 1
                yield from self.run((b, frame, depth + 1, nxt))
            self.undo(mark)
            if self.cut_to is not None:
                self._release(frame)
                return

    def _release(self, frame):
        if self.cut_to is frame:
            self.cut_to = None


def _split(cl):
    if isinstance(cl, Struct) and cl.name == ":-" and len(cl.args) == 2:
        return cl.args[0], cl.args[1]
    return cl, "true"


def naive_solve(program, goal, max_depth: int = 12, budget: int = 200_000,
                limit: int | None = None) -> NaiveResult:
    """Solutions of ``goal`` against ``program`` (a list of clause terms).

    Each solution is the goal instance with bindings applied.  A Prolog
    error after some solutions is reported in ``error`` (its formal part);
    solutions found before it are kept.  Raises :class:`Skip` when the
    depth bound or step budget is exceeded or a cyclic answer shows up.
    """
    it = Interpreter(program, max_depth, budget)
    sols = []
    err = None
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 20_000))
    try:
        top = _Frame()
        gen = it.run((goal, top, 0, None))
        try:
            for _ in gen:
                sols.append(it.resolve(goal))
                if limit is not None and len(sols) >= limit:
                    break
        except PrologFault as e:
            err = e.formal
        finally:
            gen.close()
    finally:
        sys.setrecursionlimit(old)
    return NaiveResult(sols, err, it.counts)


def program_keys(program):
    """Predicate keys defined by ``program``, in first-appearance order."""
    seen = {}
    for cl in program:
        head, _ = _split(cl)
        key = (head.name, len(head.args)) if isinstance(head, Struct) else (head, 0)
        seen.setdefault(key, None)
    return list(seen)


def body_goals(cl):
    return conj_list(_split(cl)[1])
