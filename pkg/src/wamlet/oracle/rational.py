"""Equality of rational trees given as node graphs, by bisimulation.

Used as ground truth for unification and comparison on cyclic terms: two
graphs denote the same infinite tree iff the greatest relation pairing
their roots and closed under "same label, pairwise related children"
exists.  Unification of two graphs without variables succeeds exactly
when the trees are equal.
"""

from __future__ import annotations


def same_tree(g1, r1, g2, r2) -> bool:
    assumed = set()
    stack = [(r1, r2)]
    while stack:
        a, b = stack.pop()
        if (a, b) in assumed:
            continue
        assumed.add((a, b))
        na, nb = g1[a], g2[b]
        if na[0] == "$leaf" or nb[0] == "$leaf":
            if na != nb:
                return False
            continue
        if na[0] != nb[0] or len(na[1]) != len(nb[1]):
            return False
        stack.extend(zip(na[1], nb[1]))
    return True


def unfold(g, root, depth):
    """Finite prefix of the tree at ``root`` as nested tuples, cut at ``depth``."""
    n = g[root]
    if n[0] == "$leaf":
        return n
    if depth == 0:
        return ("...",)
    return (n[0],) + tuple(unfold(g, k, depth - 1) for k in n[1])
