"""Brute-force first-argument candidate sets."""

from __future__ import annotations

from ..syntax import Struct, Var


def _principal(t):
    if isinstance(t, Struct):
        if t.name == "." and len(t.args) == 2:
            return ("list",)
        return ("struct", t.name, len(t.args))
    if isinstance(t, float):
        return ("float", t.hex())
    if isinstance(t, int):
        return ("int", t)
    return ("atom", t)


def first_arg(t):
    if isinstance(t, Struct) and t.name == ":-" and len(t.args) == 2:
        t = t.args[0]
    return t.args[0] if isinstance(t, Struct) and t.args else None


def could_match(head_arg, call_arg) -> bool:
    """Whether the two terms agree at the principal functor.

    A variable on either side agrees with anything.  Arguments below the
    principal functor are not looked at: a one-level index can only
    promise this much, and deeper mismatches are left to unification.
    """
    if isinstance(head_arg, Var) or isinstance(call_arg, Var):
        return True
    return _principal(head_arg) == _principal(call_arg)


def unifiable(a, b) -> bool:
    """Full occurs-free unifiability of two host terms (fresh bindings)."""
    bind: dict[int, object] = {}

    def deref(t):
        while isinstance(t, Var) and id(t) in bind:
            t = bind[id(t)]
        return t

    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = deref(x), deref(y)
        if x is y:
            continue
        if isinstance(x, Var):
            bind[id(x)] = y
        elif isinstance(y, Var):
            bind[id(y)] = x
        elif isinstance(x, Struct) and isinstance(y, Struct):
            if x.name != y.name or len(x.args) != len(y.args):
                return False
            stack.extend(zip(x.args, y.args))
        elif isinstance(x, Struct) or isinstance(y, Struct):
            return False
        elif type(x) is not type(y) or x != y:
            return False
    return True


def candidate_oracle(clauses, call) -> list[int]:
    """Indices of ``clauses`` whose first head argument can match ``call``'s.

    A call with an unbound (or missing) first argument selects every
    clause.
    """
    arg = call.args[0] if isinstance(call, Struct) and call.args else None
    if arg is None or isinstance(arg, Var):
        return list(range(len(clauses)))
    return [k for k, cl in enumerate(clauses) if could_match(first_arg(cl), arg)]


def unifiable_subset(clauses, call) -> list[int]:
    """Clauses whose first head argument fully unifies with the call's."""
    arg = call.args[0] if isinstance(call, Struct) and call.args else None
    if arg is None:
        return list(range(len(clauses)))
    return [k for k, cl in enumerate(clauses) if unifiable(first_arg(cl), arg)]
