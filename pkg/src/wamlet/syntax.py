"""Host-side term model used by the reader, the compiler and the oracles.

Atoms are plain ``str``, integers are ``int``, floats are ``float``.
Variables and compound terms get the two small classes below.  Variables
compare by identity: two ``Var`` objects with the same name are still
distinct variables unless they are the same object.
"""

from __future__ import annotations

from typing import Iterator

NIL = "[]"


class Var:
    __slots__ = ("name",)

    def __init__(self, name: str = "_"):
        self.name = name

    def __repr__(self):
        return f"Var({self.name!r})"


class Struct:
    __slots__ = ("name", "args")

    def __init__(self, name: str, args):
        self.name = name
        self.args = tuple(args)

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, len(self.args))

    def __eq__(self, other):
        return (
            isinstance(other, Struct)
            and self.name == other.name
            and self.args == other.args
        )

    def __hash__(self):
        return hash((self.name, self.args))

    def __repr__(self):
        return f"Struct({self.name!r}, {list(self.args)!r})"


def is_atom(t) -> bool:
    return isinstance(t, str)


def is_number(t) -> bool:
    return isinstance(t, (int, float)) and not isinstance(t, bool)


def is_callable(t) -> bool:
    return isinstance(t, (str, Struct))


def functor_of(t) -> tuple[str, int]:
    if isinstance(t, Struct):
        return t.name, len(t.args)
    return t, 0


def mklist(items, tail=NIL):
    out = tail
    for x in reversed(list(items)):
        out = Struct(".", (x, out))
    return out


def unlist(t):
    """Split a list term into (items, tail)."""
    items = []
    while isinstance(t, Struct) and t.name == "." and len(t.args) == 2:
        items.append(t.args[0])
        t = t.args[1]
    return items, t


def conj_list(body) -> list:
    out = []
    stack = [body]
    while stack:
        t = stack.pop()
        if isinstance(t, Struct) and t.name == "," and len(t.args) == 2:
            stack.append(t.args[1])
            stack.append(t.args[0])
        else:
            out.append(t)
    return out


def mkconj(goals):
    goals = list(goals)
    if not goals:
        return "true"
    out = goals[-1]
    for g in reversed(goals[:-1]):
        out = Struct(",", (g, out))
    return out


def iter_vars(t) -> Iterator[Var]:
    """Variables of ``t`` in depth-first left-to-right order, with repeats."""
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            yield t
        elif isinstance(t, Struct):
            stack.extend(reversed(t.args))


def term_vars(t) -> list[Var]:
    seen = set()
    out = []
    for v in iter_vars(t):
        if id(v) not in seen:
            seen.add(id(v))
            out.append(v)
    return out


def rename(t, mapping: dict):
    """Copy ``t`` replacing variables through ``mapping`` (keyed by id)."""
    if isinstance(t, Var):
        return mapping.setdefault(id(t), Var(t.name))
    if isinstance(t, Struct):
        return Struct(t.name, [rename(a, mapping) for a in t.args])
    return t


def variant_key(t):
    """Hashable canonical form: variables numbered by first occurrence."""
    numbering: dict[int, int] = {}

    def walk(t):
        if isinstance(t, Var):
            return ("$VAR", numbering.setdefault(id(t), len(numbering)))
        if isinstance(t, Struct):
            return (t.name,) + tuple(walk(a) for a in t.args)
        if isinstance(t, float):
            return ("$FLT", t)
        if isinstance(t, int):
            return ("$INT", t)
        return ("$ATM", t)

    return walk(t)
