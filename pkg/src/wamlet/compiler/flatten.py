"""Replace disjunctions, if-then-else and negation by anonymous predicates.

Each construct becomes a call to a fresh predicate whose clauses are the
branches and whose arguments are the variables the construct shares with
the rest of the clause.  A cut inside a branch must cut the *enclosing*
clause, so the enclosing clause captures its cut level with
``'$get_level'(L)`` and the branch calls ``'$cut'(L)`` instead.
"""

from __future__ import annotations

from collections import Counter

from ..syntax import Struct, Var, iter_vars, mkconj


def _is(t, name, arity):
    return isinstance(t, Struct) and t.name == name and len(t.args) == arity


def is_control(g) -> bool:
    return _is(g, ";", 2) or _is(g, "->", 2) or _is(g, "\\+", 1)


def _has_cut(t) -> bool:
    """A cut that is transparent at this level (not inside call/N etc.)."""
    if t == "!":
        return True
    if _is(t, ",", 2) or _is(t, ";", 2):
        return _has_cut(t.args[0]) or _has_cut(t.args[1])
    if _is(t, "->", 2):
        return _has_cut(t.args[1])
    return False


def _opaque(g):
    """Wrap a goal whose cuts must stay local (if-conditions, negation)."""
    return Struct("call", (g,)) if _contains_cut(g) else g


def _contains_cut(t) -> bool:
    if t == "!":
        return True
    if _is(t, ",", 2) or _is(t, ";", 2) or _is(t, "->", 2):
        return _contains_cut(t.args[0]) or _contains_cut(t.args[1])
    return False


def _replace_cuts(t, level: Var):
    if t == "!":
        return Struct("$cut", (level,))
    if _is(t, ",", 2) or _is(t, ";", 2):
        return Struct(t.name, (_replace_cuts(t.args[0], level), _replace_cuts(t.args[1], level)))
    if _is(t, "->", 2):
        return Struct("->", (_opaque(t.args[0]), _replace_cuts(t.args[1], level)))
    if _is(t, "\\+", 1):
        return Struct("\\+", (_opaque(t.args[0]),))
    return t


class AnonNamer:
    """Hands out ``Parent$disjN`` names, unique per parent name."""

    def __init__(self):
        self.counts: Counter = Counter()

    def fresh(self, parent: str, tag: str = "disj") -> str:
        self.counts[(parent, tag)] += 1
        return f"{parent}${tag}{self.counts[(parent, tag)]}"


class _AtomGoal(str):
    """An atom goal with an identity of its own, so it can carry a line."""

    __slots__ = ()


def located_atom(a: str, lines: dict, parent, k: int):
    ln = lines.get((id(parent), k))
    if ln is None:
        return a
    g = _AtomGoal(a)
    lines[id(g)] = ln
    return g


def _goal_list(body, lines):
    out = []
    stack = [(body, None, 0)]
    while stack:
        t, parent, k = stack.pop()
        if _is(t, ",", 2):
            stack.append((t.args[1], t, 2))
            stack.append((t.args[0], t, 1))
        else:
            out.append(located_atom(t, lines, parent, k) if isinstance(t, str) else t)
    return out


def flatten_disjunction(head, body, parent: str, namer: AnonNamer, lines: dict | None = None,
                        line: int = 0):
    """Flatten one clause body.

    Returns ``(goals, anon_clauses)`` where ``goals`` is the new body as a
    goal list and every anonymous clause is a ``(clause_term, line)`` pair.
    ``lines`` maps ``id(goal)`` to a source line and is extended for the
    goals this function creates.
    """
    lines = lines if lines is not None else {}
    goals = _goal_list(body, lines)
    out_goals = []
    anon = []

    # transparent cuts inside constructs need the clause's own cut level
    if any(is_control(g) and _has_cut(g) for g in goals):
        level = Var("$level")
        new = []
        for g in goals:
            if is_control(g):
                g2 = _replace_cuts(g, level)
                lines[id(g2)] = lines.get(id(g), line)
                g = g2
            new.append(g)
        get = Struct("$get_level", (level,))
        lines[id(get)] = line
        goals = [get] + new

    # occurrence counts over the whole clause, for shared-variable detection
    total = Counter(id(v) for v in iter_vars(head))
    for g in goals:
        total.update(id(v) for v in iter_vars(g))

    for g in goals:
        if not is_control(g):
            out_goals.append(g)
            continue
        gline = lines.get(id(g), line)
        inside = Counter(id(v) for v in iter_vars(g))
        shared = []
        seen = set()
        for v in iter_vars(g):
            if id(v) not in seen and total[id(v)] > inside[id(v)]:
                shared.append(v)
            seen.add(id(v))
        tag = "not" if _is(g, "\\+", 1) else "disj"
        name = namer.fresh(parent, tag)
        call = Struct(name, shared) if shared else name
        if isinstance(call, Struct):
            lines[id(call)] = gline
        out_goals.append(call)
        for branch in _branches(g):
            clause = Struct(":-", (call, branch)) if branch != "true" else call
            anon.append((clause, gline))
    return out_goals, anon


def _branches(g):
    """Clause bodies for the anonymous predicate replacing ``g``."""
    if _is(g, "\\+", 1):
        return [mkconj([_opaque(g.args[0]), "!", "fail"]), "true"]
    if _is(g, "->", 2):
        return [mkconj([_opaque(g.args[0]), "!", g.args[1]])]
    # a chain a ; b ; c becomes one clause per alternative; an if-then-else
    # alternative keeps its cut, which also discards the later ones
    out = []
    while _is(g, ";", 2):
        left, g = g.args
        if _is(left, "->", 2):
            out.append(mkconj([_opaque(left.args[0]), "!", left.args[1]]))
        else:
            out.append(left)
    if _is(g, "->", 2):
        g = mkconj([_opaque(g.args[0]), "!", g.args[1]])
    out.append(g)
    return out
