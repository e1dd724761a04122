"""Unification, standard order, and Cheney-style copying on the heap.

Both ``unify`` and ``compare_terms`` terminate on rational trees: before
descending into argument ``i`` of two compounds ``p`` and ``q`` whose
arguments are themselves compounds, the cell holding ``p[i]`` is pointed
at ``q[i]``, so a cycle that leads back to ``p`` sees an identical pair.
All such redirections are undone before returning.
"""

from __future__ import annotations

from .terms import (
    ATOM_SUB, ATOMS, ATTV_MARK, FLOAT_HDR, FUNCTORS, IMM, INT_SUB, LIST, MUTABLE_FW, REF,
    STRUCT, bits_float,
)


class Blueprint:
    """A term copied off the heap: cells relative to index 0; root in slot 0."""

    __slots__ = ("cells",)

    def __init__(self, cells):
        self.cells = cells

    def __len__(self):
        return len(self.cells)


def instantiate(heap: list, bp: Blueprint) -> int:
    """Copy a blueprint onto the heap; returns the root cell."""
    base = len(heap)
    off = base << 2
    heap.extend([c if c & 3 == 3 else c + off for c in bp.cells])
    return heap[base]


def copy_out(store, c: int, attrs: bool = True) -> Blueprint:
    """Cheney copy of the term at ``c`` into a blueprint.

    Sharing and cycles are preserved.  Attributed variables are copied as
    fresh attributed variables when ``attrs`` is true, else as plain ones.
    """
    heap = store.heap
    out = [0]
    fwd_var: dict[int, int] = {}
    fwd_blk: dict[int, int] = {}
    slots = [0]
    srcs = [c]
    k = 0
    while k < len(slots):
        t = slots[k]
        c = srcs[k]
        k += 1
        # dereference
        while c & 3 == 0:
            v = heap[c >> 2]
            if v == c:
                break
            c = v
        tg = c & 3
        if tg == IMM:
            out[t] = c
            continue
        i = c >> 2
        if tg == REF:
            j = fwd_var.get(i)
            if j is not None:
                out[t] = j << 2
                continue
            if attrs and heap[i - 1] == ATTV_MARK:
                j = len(out) + 1
                out.extend([ATTV_MARK, j << 2, 0, 0])
                fwd_var[i] = j
                slots.append(j + 1)
                srcs.append(heap[i + 1])
                slots.append(j + 2)
                srcs.append(heap[i + 2])
                out[t] = j << 2
            else:
                fwd_var[i] = t
                out[t] = t << 2
            continue
        j = fwd_blk.get(i)
        if j is not None:
            out[t] = (j << 2) | tg
            continue
        j = len(out)
        fwd_blk[i] = j
        if tg == LIST:
            out.extend((0, 0))
            slots.append(j)
            srcs.append(heap[i])
            slots.append(j + 1)
            srcs.append(heap[i + 1])
        else:
            w = heap[i]
            if w == FLOAT_HDR:
                out.extend((w, heap[i + 1]))
            else:
                n = FUNCTORS.arities[w >> 3]
                out.append(w)
                out.extend([0] * n)
                for a in range(n):
                    slots.append(j + 1 + a)
                    srcs.append(heap[i + 1 + a])
        out[t] = (j << 2) | tg
    return Blueprint(out)


def copy_term(store, c: int, attrs: bool = True) -> int:
    return instantiate(store.heap, copy_out(store, c, attrs))


# -- unification ---------------------------------------------------------------

def _bind_vars(store, a: int, b: int) -> None:
    """Bind two distinct unbound variables (both dereferenced)."""
    heap = store.heap
    ia = a >> 2
    ib = b >> 2
    aa = heap[ia - 1] == ATTV_MARK
    ab = heap[ib - 1] == ATTV_MARK
    if aa and not ab:
        store.bind(ib, a)
    elif ab and not aa:
        store.bind(ia, b)
    elif ia > ib:
        store.bind(ia, b)  # younger points to older
    else:
        store.bind(ib, a)


def unify(store, a: int, b: int, budget: list | None = None) -> bool:
    """General unification with trailing; terminates on cyclic terms.

    ``budget`` is an optional one-element list counting down steps; it is
    used by tests that check termination.
    """
    heap = store.heap
    stack = [(a, b)]
    redirects = []
    ok = True
    while stack:
        a, b = stack.pop()
        if budget is not None:
            budget[0] -= 1
            if budget[0] < 0:
                raise RuntimeError("unification step budget exhausted")
        while a & 3 == 0:
            v = heap[a >> 2]
            if v == a:
                break
            a = v
        while b & 3 == 0:
            v = heap[b >> 2]
            if v == b:
                break
            b = v
        if a == b:
            continue
        ta = a & 3
        tb = b & 3
        if ta == REF:
            if tb == REF:
                _bind_vars(store, a, b)
            else:
                store.bind(a >> 2, b)
            continue
        if tb == REF:
            store.bind(b >> 2, a)
            continue
        if ta != tb or ta == IMM:
            ok = False
            break
        i = a >> 2
        j = b >> 2
        if ta == LIST:
            n = 2
            pa = i
            pb = j
        else:
            w = heap[i]
            if w != heap[j]:
                ok = False
                break
            if w == FLOAT_HDR:
                if heap[i + 1] != heap[j + 1]:
                    ok = False
                    break
                continue
            n = FUNCTORS.arities[w >> 3]
            pa = i + 1
            pb = j + 1
        for k in range(n - 1, -1, -1):
            x = heap[pa + k]
            y = heap[pb + k]
            if _deref_tag(heap, x) in (STRUCT, LIST) and _deref_tag(heap, y) in (STRUCT, LIST):
                redirects.append((pa + k, x))
                heap[pa + k] = y
            stack.append((x, y))
    for idx, old in reversed(redirects):
        heap[idx] = old
    return ok


def _deref_tag(heap, c):
    while c & 3 == 0:
        v = heap[c >> 2]
        if v == c:
            return REF
        c = v
    return c & 3


# -- standard order --------------------------------------------------------------

def _class(store, c):
    """Order class: 0 var, 1 number, 2 atom, 3 compound."""
    t = c & 3
    if t == REF:
        return 0
    if t == IMM:
        return 2 if c & 7 == ATOM_SUB else 1
    if t == STRUCT and store.heap[c >> 2] == FLOAT_HDR:
        return 1
    return 3


def _num(store, c):
    if c & 3 == IMM:
        return c >> 3
    return bits_float(store.heap[(c >> 2) + 1] >> 3)


def compare_terms(store, a: int, b: int, budget: list | None = None) -> int:
    """-1, 0 or 1 by the standard order of terms."""
    heap = store.heap
    stack = [(a, b)]
    redirects = []
    result = 0
    deref = store.deref
    while stack:
        a, b = stack.pop()
        if budget is not None:
            budget[0] -= 1
            if budget[0] < 0:
                raise RuntimeError("comparison step budget exhausted")
        a = deref(a)
        b = deref(b)
        if a == b:
            continue
        ca = _class(store, a)
        cb = _class(store, b)
        if ca != cb:
            result = -1 if ca < cb else 1
            break
        if ca == 0:
            result = -1 if a < b else 1
            break
        if ca == 1:
            x = _num(store, a)
            y = _num(store, b)
            if x != y:
                result = -1 if x < y else 1
                break
            fa = isinstance(x, float)
            fb = isinstance(y, float)
            if fa != fb:
                result = -1 if fa else 1
                break
            continue
        if ca == 2:
            x = ATOMS.names[a >> 3]
            y = ATOMS.names[b >> 3]
            result = -1 if x < y else 1
            break
        na, fa, pa = _compound(heap, a)
        nb, fb, pb = _compound(heap, b)
        if na != nb:
            result = -1 if na < nb else 1
            break
        if fa != fb:
            result = -1 if fa < fb else 1
            break
        for k in range(na - 1, -1, -1):
            x = heap[pa + k]
            y = heap[pb + k]
            if _deref_tag(heap, x) in (STRUCT, LIST) and _deref_tag(heap, y) in (STRUCT, LIST):
                redirects.append((pa + k, x))
                heap[pa + k] = y
            stack.append((x, y))
    for idx, old in reversed(redirects):
        heap[idx] = old
    return result


def _compound(heap, c):
    """(arity, name, first-arg index) of a dereferenced compound."""
    if c & 3 == LIST:
        return 2, ".", c >> 2
    w = heap[c >> 2]
    fid = w >> 3
    return FUNCTORS.arities[fid], FUNCTORS.names[fid], (c >> 2) + 1


# -- misc ------------------------------------------------------------------------

def is_ground(store, c: int) -> bool:
    """Ground test; mutable terms are never ground."""
    heap = store.heap
    seen = set()
    stack = [c]
    while stack:
        c = store.deref(stack.pop())
        t = c & 3
        if t == REF:
            return False
        if t == IMM or c in seen:
            continue
        seen.add(c)
        i = c >> 2
        if t == LIST:
            stack.append(heap[i])
            stack.append(heap[i + 1])
            continue
        w = heap[i]
        if w == FLOAT_HDR:
            continue
        if w == MUTABLE_FW:
            return False
        for k in range(FUNCTORS.arities[w >> 3]):
            stack.append(heap[i + 1 + k])
    return True


def term_variables(store, c: int) -> list[int]:
    """Unbound variables of a term in depth-first, left-to-right order."""
    heap = store.heap
    seen_blk = set()
    seen_var = set()
    out = []
    stack = [c]
    while stack:
        c = store.deref(stack.pop())
        t = c & 3
        if t == REF:
            if c not in seen_var:
                seen_var.add(c)
                out.append(c)
            continue
        if t == IMM or c in seen_blk:
            continue
        seen_blk.add(c)
        i = c >> 2
        if t == LIST:
            stack.append(heap[i + 1])
            stack.append(heap[i])
            continue
        w = heap[i]
        if w == FLOAT_HDR:
            continue
        n = FUNCTORS.arities[w >> 3]
        for k in range(n - 1, -1, -1):
            stack.append(heap[i + 1 + k])
    return out


def int_value(c: int):
    return c >> 3 if c & 7 == INT_SUB else None
