"""Random inputs for the differential drivers.

Everything takes an explicit ``random.Random`` so cases can be replayed
from a seed.
"""

from __future__ import annotations

from ..syntax import Struct, Var

ATOMS = ("a", "b", "c")
INTS = (0, 1, 2)


class _Clause:
    def __init__(self, rng):
        self.rng = rng
        self.vars = [Var(f"V{k}") for k in range(rng.randint(1, 4))]

    def var(self):
        return self.rng.choice(self.vars)

    def term(self, depth=2):
        r = self.rng.random()
        if depth <= 0 or r < 0.55:
            r2 = self.rng.random()
            if r2 < 0.45:
                return self.var()
            if r2 < 0.75:
                return self.rng.choice(ATOMS)
            return self.rng.choice(INTS)
        if r < 0.7:
            return Struct("f", (self.term(depth - 1),))
        if r < 0.85:
            return Struct("g", (self.term(depth - 1), self.term(depth - 1)))
        return Struct(".", (self.term(depth - 1), self.term(depth - 1)))


def random_program(rng, prefix="p", max_preds=6, max_clauses=4, max_arity=2):
    """A side-effect-free program and a list of goals to run against it.

    Returns ``(clauses, goals)`` as host terms.  Predicates are named
    ``{prefix}0``, ``{prefix}1``, ...; every predicate gets at least one
    clause.
    """
    npreds = rng.randint(1, max_preds)
    arities = [rng.randint(0, max_arity) for _ in range(npreds)]
    names = [f"{prefix}{k}" for k in range(npreds)]

    def call(cl, k):
        a = arities[k]
        return Struct(names[k], [cl.term(1) for _ in range(a)]) if a else names[k]

    def goal(cl, depth):
        r = rng.random()
        if r < 0.34:
            # bias towards later predicates so recursion is not the norm
            k = rng.randrange(npreds)
            return call(cl, k)
        if r < 0.48:
            return Struct("=", (cl.var(), cl.term()))
        if r < 0.52:
            return Struct("\\=", (cl.var(), cl.term()))
        if r < 0.60:
            return "!"
        if r < 0.66 and depth > 0:
            return Struct(";", (body(cl, depth - 1), body(cl, depth - 1)))
        if r < 0.72 and depth > 0:
            return Struct(";", (Struct("->", (body(cl, depth - 1), body(cl, depth - 1))),
                                body(cl, depth - 1)))
        if r < 0.76 and depth > 0:
            return Struct("\\+", (body(cl, depth - 1),))
        if r < 0.78 and depth > 0:
            return Struct("call", (body(cl, depth - 1),))
        if r < 0.82:
            return Struct(rng.choice(("var", "nonvar", "atom", "integer", "compound")),
                          (cl.var(),))
        if r < 0.86:
            return Struct("is", (cl.var(), Struct("+", (cl.var(), rng.choice(INTS)))))
        if r < 0.89:
            return Struct(rng.choice(("<", ">=", "=:=")), (cl.var(), rng.choice(INTS)))
        if r < 0.92:
            return Struct(rng.choice(("==", "\\==")), (cl.var(), cl.term(1)))
        if r < 0.95:
            return "fail"
        return "true"

    def body(cl, depth):
        n = rng.randint(1, 3)
        goals = [goal(cl, depth) for _ in range(n)]
        out = goals[-1]
        for g in reversed(goals[:-1]):
            out = Struct(",", (g, out))
        return out

    clauses = []
    for k in range(npreds):
        for _ in range(rng.randint(1, max_clauses)):
            cl = _Clause(rng)
            a = arities[k]
            head = Struct(names[k], [cl.term(2) for _ in range(a)]) if a else names[k]
            if rng.random() < 0.35:
                clauses.append(head)
            else:
                clauses.append(Struct(":-", (head, body(cl, 2))))
    goals = []
    for _ in range(2):
        k = rng.randrange(npreds)
        a = arities[k]
        gv = _Clause(rng)
        if a:
            goals.append(Struct(names[k], [gv.term(1) if rng.random() < 0.3 else Var(f"Q{i}")
                                           for i in range(a)]))
        else:
            goals.append(names[k])
    return clauses, goals


# -- logical update view scripts ----------------------------------------------------

def random_tokens(rng, length, alphabet="zari", consts=4):
    out = []
    for pos in range(length):
        op = rng.choice(alphabet)
        if op in "za":
            out.append((op, pos))
        elif op == "r":
            out.append((op, None if rng.random() < 0.6 else rng.randrange(consts)))
        else:
            out.append((op, None if rng.random() < 0.8 else rng.randrange(consts)))
    return out


# -- first-argument indexing -----------------------------------------------------

def random_first_args(rng, n):
    """Heads for an index probe: a mix of variables, constants and functors."""
    def arg():
        r = rng.random()
        if r < 0.2:
            return Var("A")
        if r < 0.4:
            return rng.choice(ATOMS + ("[]",))
        if r < 0.55:
            return rng.choice(INTS + (-1, 1 << 58))
        if r < 0.62:
            return rng.choice((0.5, 1.0, -2.25))
        if r < 0.78:
            return Struct(rng.choice(("f", "g")), (rng.choice(ATOMS),))
        if r < 0.86:
            return Struct("f", (Var("B"), Var("C")))
        return Struct(".", (rng.choice(INTS), "[]"))
    return [arg() for _ in range(n)]


# -- rational trees ------------------------------------------------------------------

def random_graph(rng, nodes=8, cycle_p=0.3, leaf_p=0.3):
    """A term graph as ``{node: (name, [child nodes]) or ('$leaf', value)}``.

    Child edges point forward, except that with probability ``cycle_p``
    an edge points back to an ancestor or to the node itself, making the
    represented tree rational.  Node 0 is the root.
    """
    g = {}
    for i in range(nodes):
        if i == nodes - 1 or rng.random() < leaf_p:
            g[i] = ("$leaf", rng.choice(ATOMS + INTS))
            continue
        arity = rng.randint(1, 3)
        kids = []
        for _ in range(arity):
            if rng.random() < cycle_p:
                kids.append(rng.randint(0, i))
            else:
                kids.append(rng.randint(i + 1, nodes - 1))
        g[i] = (rng.choice(("f", "g")), kids)
    return g
