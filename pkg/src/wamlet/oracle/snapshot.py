"""Reference semantics for assert/retract under running enumerations.

A script is a list of actions::

    ("assertz", Fact)  ("asserta", Fact)  ("retract", Pattern)
    ("iter", Pattern, Subscript)

``iter`` enumerates the solutions of ``Pattern``; for each of the first
``SUB_LIMIT`` solutions it runs ``Subscript`` before moving on.  The
oracle copies the live clause list when a call starts and never looks at
the database again for that call, which is the whole point.

The observation log holds host terms: ``sol(Depth, Instance)`` per
solution, ``end(Depth)`` when an enumeration is exhausted, ``ret(P)`` or
``noret`` for each retract.
"""

from __future__ import annotations

from ..syntax import Struct, Var, mkconj, rename

SUB_LIMIT = 2


class _Clause:
    __slots__ = ("term", "alive")

    def __init__(self, term):
        self.term = term
        self.alive = True


def _key(t):
    return (t.name, len(t.args)) if isinstance(t, Struct) else (t, 0)


class _Unifier:
    def __init__(self):
        self.bind: dict[int, object] = {}
        self.trail: list = []

    def deref(self, t):
        while isinstance(t, Var) and id(t) in self.bind:
            t = self.bind[id(t)]
        return t

    def unify(self, a, b) -> bool:
        stack = [(a, b)]
        while stack:
            x, y = stack.pop()
            x, y = self.deref(x), self.deref(y)
            if x is y:
                continue
            if isinstance(x, Var):
                self.bind[id(x)] = y
                self.trail.append(x)
            elif isinstance(y, Var):
                self.bind[id(y)] = x
                self.trail.append(y)
            elif isinstance(x, Struct) and isinstance(y, Struct):
                if x.name != y.name or len(x.args) != len(y.args):
                    return False
                stack.extend(zip(x.args, y.args))
            elif isinstance(x, Struct) or isinstance(y, Struct):
                return False
            elif type(x) is not type(y) or x != y:
                return False
        return True

    def undo(self, mark):
        while len(self.trail) > mark:
            del self.bind[id(self.trail.pop())]

    def resolve(self, t):
        t = self.deref(t)
        if isinstance(t, Struct):
            return Struct(t.name, [self.resolve(a) for a in t.args])
        return t


def snapshot_dyn_oracle(script, initial=()) -> list:
    """Observation log of ``script`` run against snapshot semantics."""
    db: dict[tuple, list[_Clause]] = {}
    u = _Unifier()
    log: list = []

    def add(fact, front):
        chain = db.setdefault(_key(fact), [])
        rec = _Clause(rename(fact, {}))
        if front:
            chain.insert(0, rec)
        else:
            chain.append(rec)

    def visible(pattern):
        return [c for c in db.get(_key(pattern), []) if c.alive]

    def run(actions, depth):
        for act in actions:
            op = act[0]
            if op in ("assertz", "asserta"):
                add(u.resolve(act[1]), op == "asserta")
            elif op == "retract":
                pat = act[1]
                for rec in visible(pat):
                    mark = len(u.trail)
                    if rec.alive and u.unify(pat, rename(rec.term, {})):
                        rec.alive = False
                        log.append(Struct("ret", (u.resolve(pat),)))
                        u.undo(mark)
                        break
                    u.undo(mark)
                else:
                    log.append("noret")
            elif op == "iter":
                pat, sub = act[1], act[2]
                n = 0
                for rec in visible(pat):
                    mark = len(u.trail)
                    if u.unify(pat, rename(rec.term, {})):
                        log.append(Struct("sol", (depth, u.resolve(pat))))
                        n += 1
                        if n <= SUB_LIMIT:
                            run(sub, depth + 1)
                    u.undo(mark)
                log.append(Struct("end", (depth,)))
            else:
                raise ValueError(f"unknown script action {op!r}")

    for fact in initial:
        add(fact, False)
    run(script, 0)
    return log


def script_goal(script, log="$log", new_counter="$counter_new",
                tick="$counter_tick"):
    """The same script as one Prolog goal (host term).

    The goal needs three side-channel builtins: ``log/1`` records an
    observation, ``new_counter/1`` returns a fresh counter id and
    ``tick/2`` increments a counter and returns its new value; none of
    them may be undone by backtracking.
    """
    def lg(t):
        return Struct(log, (t,))

    def build(actions, depth):
        goals = []
        for act in actions:
            op = act[0]
            if op in ("assertz", "asserta"):
                goals.append(Struct(op, (rename(act[1], {}),)))
            elif op == "retract":
                pat = rename(act[1], {})
                goals.append(Struct(";", (Struct("->", (Struct("retract", (pat,)),
                                                        lg(Struct("ret", (pat,))))),
                                          lg("noret"))))
            elif op == "iter":
                pat = rename(act[1], {})
                c, n = Var("C"), Var("N")
                loop = mkconj([pat, lg(Struct("sol", (depth, pat))), Struct(tick, (c, n)),
                               Struct(";", (Struct("->", (Struct("=<", (n, SUB_LIMIT)),
                                                          build(act[2], depth + 1))),
                                            "true")),
                               "fail"])
                goals.append(Struct(",", (Struct(new_counter, (c,)),
                                          Struct(";", (loop, lg(Struct("end", (depth,))))))))
        return mkconj(goals)

    return build(script, 0)


def linear_script(tokens, pred="p"):
    """Turn a flat token sequence into a nested script.

    Tokens: ``("z", k)`` assertz p(k), ``("a", k)`` asserta p(k),
    ``("r", None)`` retract p(_), ``("r", k)`` retract p(k), ``("i", None)``
    enumerate p(X) with the remaining tokens as the body, ``("i", k)``
    enumerate p(k).
    """
    out: list = []
    cur = out
    for op, k in tokens:
        arg = Var("_") if k is None else k
        if op == "z":
            cur.append(("assertz", Struct(pred, (arg,))))
        elif op == "a":
            cur.append(("asserta", Struct(pred, (arg,))))
        elif op == "r":
            cur.append(("retract", Struct(pred, (arg,))))
        elif op == "i":
            sub: list = []
            cur.append(("iter", Struct(pred, (Var("X") if k is None else k,)), sub))
            cur = sub
        else:
            raise ValueError(op)
    return out
