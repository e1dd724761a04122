"""Tagged-cell heap, atom and functor tables, trail.

A cell is a Python int.  The two low bits carry the tag::

    REF    ...00   payload = heap index (self reference = unbound)
    STRUCT ...01   payload = index of a functor word
    LIST   ...10   payload = index of the head cell (tail follows)
    IMM    ...11   third bit: 0 = small integer, 1 = atom id

Every word that is not a pointer is IMM-tagged: functor words reuse the
atom layout with a functor id, float payload words reuse the integer
layout with raw IEEE-754 bits, and the attributed-variable marker is the
int ``-1``.  Relocating a block of cells therefore means adjusting exactly
the cells whose tag is not IMM.
"""

from __future__ import annotations

import struct

from .syntax import Struct, Var

REF, STRUCT, LIST, IMM = 0, 1, 2, 3
INT_BITS = 3  # tag + discriminator
ATOM_SUB = 7
INT_SUB = 3

FIXNUM_BITS = 61
MAX_INT = (1 << (FIXNUM_BITS - 1)) - 1
MIN_INT = -(1 << (FIXNUM_BITS - 1))

ATTV_MARK = -1  # word preceding the value cell of an attributed variable


class AtomTable:
    def __init__(self):
        self.ids: dict[str, int] = {}
        self.names: list[str] = []

    def intern(self, name: str) -> int:
        i = self.ids.get(name)
        if i is None:
            i = self.ids[name] = len(self.names)
            self.names.append(name)
        return i

    def __len__(self):
        return len(self.names)


class FunctorTable:
    def __init__(self):
        self.ids: dict[tuple[str, int], int] = {}
        self.names: list[str] = []
        self.arities: list[int] = []

    def intern(self, name: str, arity: int) -> int:
        key = (name, arity)
        i = self.ids.get(key)
        if i is None:
            i = self.ids[key] = len(self.names)
            self.names.append(name)
            self.arities.append(arity)
        return i


ATOMS = AtomTable()
FUNCTORS = FunctorTable()

# fid 0 is the reserved box functor for floats: one payload word follows
FLOAT_FID = FUNCTORS.intern("$float", 1)
FLOAT_HDR = (FLOAT_FID << 3) | ATOM_SUB


def intern_atom(name: str) -> int:
    return ATOMS.intern(name)


def atom_cell(name: str) -> int:
    return (ATOMS.intern(name) << 3) | ATOM_SUB


def functor_word(name: str, arity: int) -> int:
    return (FUNCTORS.intern(name, arity) << 3) | ATOM_SUB


def int_cell(v: int) -> int:
    if not MIN_INT <= v <= MAX_INT:
        raise OverflowError(v)
    return (v << 3) | INT_SUB


def float_bits(f: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", f))[0]


def bits_float(b: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", b))[0]


def tag(c: int) -> int:
    return c & 3


def is_atom(c: int) -> bool:
    return c & 7 == ATOM_SUB


def is_int(c: int) -> bool:
    return c & 7 == INT_SUB


def atom_name(c: int) -> str:
    return ATOMS.names[c >> 3]


def fid_of(word: int) -> int:
    return word >> 3


NIL = atom_cell("[]")
TRUE = atom_cell("true")
FAIL = atom_cell("fail")
EMPTY_BLOCK = atom_cell("{}")
DOT_FW = functor_word(".", 2)
COMMA_FW = functor_word(",", 2)
CALL1_FW = functor_word("call", 1)
MUTABLE_FW = functor_word("$mutable", 2)


class Cell:
    """Wraps a heap cell inside a host term handed to ``build_term``."""

    __slots__ = ("c",)

    def __init__(self, c: int):
        self.c = c

    def __repr__(self):
        return f"Cell({self.c})"


class CleanupEntry:
    """Trail entry holding a call_cleanup goal."""

    __slots__ = ("goal", "exited", "done", "b0")

    def __init__(self, goal: int, b0: int):
        self.goal = goal
        self.exited = False
        self.done = False
        self.b0 = b0  # choicepoint count when call_cleanup was entered


class TermStore:
    """Heap and trail plus the primitive operations on them."""

    def __init__(self):
        # heap[0] is a sentinel so that every variable has a predecessor word
        self.heap: list[int] = [NIL]
        self.trail: list = []
        self.HB = 0  # heap mark of the newest choicepoint
        self.attvar_bound = None  # callback(var_index, value)

    # -- construction --------------------------------------------------------

    def new_var(self) -> int:
        h = len(self.heap)
        c = h << 2
        self.heap.append(c)
        return c

    def make_float(self, f: float) -> int:
        heap = self.heap
        h = len(heap)
        heap.append(FLOAT_HDR)
        heap.append((float_bits(f) << 3) | INT_SUB)
        return (h << 2) | STRUCT

    def make_struct(self, name: str, args) -> int:
        heap = self.heap
        h = len(heap)
        heap.append(functor_word(name, len(args)))
        heap.extend(args)
        return (h << 2) | STRUCT

    def make_list(self, items, tail=NIL) -> int:
        out = tail
        heap = self.heap
        for x in reversed(items):
            h = len(heap)
            heap.append(x)
            heap.append(out)
            out = (h << 2) | LIST
        return out

    def number_cell(self, v) -> int:
        if isinstance(v, float):
            return self.make_float(v)
        return int_cell(v)

    def build_term(self, t, varmap: dict | None = None) -> int:
        """Put the host term ``t`` on the heap and return its root cell.

        ``varmap`` maps ``id(Var)`` to cells and is extended in place, so
        several terms can share variables.
        """
        if varmap is None:
            varmap = {}
        heap = self.heap
        if isinstance(t, Cell):
            return t.c
        if isinstance(t, Var):
            c = varmap.get(id(t))
            if c is None:
                c = varmap[id(t)] = self.new_var()
            return c
        if isinstance(t, str):
            return atom_cell(t)
        if isinstance(t, bool):
            raise TypeError("bool is not a Prolog term")
        if isinstance(t, int):
            return int_cell(t)
        if isinstance(t, float):
            return self.make_float(t)
        if isinstance(t, Struct):
            if t.name == "." and len(t.args) == 2:
                # iterative over the spine so long lists do not recurse
                spine = []
                while isinstance(t, Struct) and t.name == "." and len(t.args) == 2:
                    spine.append(t.args[0])
                    t = t.args[1]
                h = len(heap)
                heap.extend([0] * (2 * len(spine)))
                for k, item in enumerate(spine):
                    heap[h + 2 * k] = self.build_term(item, varmap)
                    if k + 1 < len(spine):
                        heap[h + 2 * k + 1] = ((h + 2 * k + 2) << 2) | LIST
                heap[h + 2 * len(spine) - 1] = self.build_term(t, varmap)
                return (h << 2) | LIST
            n = len(t.args)
            h = len(heap)
            heap.append(functor_word(t.name, n))
            heap.extend([0] * n)
            for i, a in enumerate(t.args):
                heap[h + 1 + i] = self.build_term(a, varmap)
            return (h << 2) | STRUCT
        raise TypeError(f"cannot build term from {t!r}")

    # -- access --------------------------------------------------------------

    def deref(self, c: int) -> int:
        heap = self.heap
        while c & 3 == 0:
            v = heap[c >> 2]
            if v == c:
                return c
            c = v
        return c

    def is_attvar(self, c: int) -> bool:
        """``c`` is a dereferenced unbound variable with attributes."""
        i = c >> 2
        return c & 3 == REF and i > 0 and self.heap[i - 1] == ATTV_MARK

    def functor(self, c: int):
        """(name, arity) of a dereferenced non-variable cell."""
        t = c & 3
        if t == STRUCT:
            w = self.heap[c >> 2]
            fid = w >> 3
            if fid == FLOAT_FID:
                return self.float_value(c), 0
            return FUNCTORS.names[fid], FUNCTORS.arities[fid]
        if t == LIST:
            return ".", 2
        if c & 7 == ATOM_SUB:
            return ATOMS.names[c >> 3], 0
        return c >> 3, 0

    def float_value(self, c: int) -> float:
        return bits_float(self.heap[(c >> 2) + 1] >> 3)

    def is_float(self, c: int) -> bool:
        return c & 3 == STRUCT and self.heap[c >> 2] == FLOAT_HDR

    def number_value(self, c: int):
        if c & 7 == INT_SUB:
            return c >> 3
        if c & 3 == STRUCT and self.heap[c >> 2] == FLOAT_HDR:
            return self.float_value(c)
        return None

    def args_of(self, c: int) -> list[int]:
        """Argument cells of a dereferenced compound."""
        heap = self.heap
        if c & 3 == LIST:
            i = c >> 2
            return [heap[i], heap[i + 1]]
        i = c >> 2
        n = FUNCTORS.arities[heap[i] >> 3]
        return heap[i + 1:i + 1 + n]

    def arg_addr(self, c: int) -> int:
        """Heap index of the first argument of a dereferenced compound."""
        return (c >> 2) if c & 3 == LIST else (c >> 2) + 1

    # -- binding and trail ---------------------------------------------------

    def bind(self, v: int, value: int) -> None:
        """Bind the unbound variable at heap index ``v``."""
        heap = self.heap
        heap[v] = value
        if v < self.HB:
            self.trail.append(v)
        if heap[v - 1] == ATTV_MARK and self.attvar_bound is not None:
            self.attvar_bound(v, value)

    def undo_trail(self, mark: int) -> list:
        """Undo entries above ``mark``; return cleanup entries met, in order."""
        trail = self.trail
        heap = self.heap
        found = []
        while len(trail) > mark:
            e = trail.pop()
            if type(e) is int:
                if e < len(heap):
                    heap[e] = e << 2
            elif type(e) is tuple:
                idx, old, old_stamp = e
                if idx < len(heap):
                    heap[idx] = old
                    if old_stamp is not None:
                        heap[idx + 1] = old_stamp
            else:
                found.append(e)
        return found

    # -- conversion back to host terms ---------------------------------------

    def to_host(self, c: int, varmap: dict | None = None, cyclic_ok: bool = False):
        """Convert a heap term into host terms.

        Cycles raise ValueError unless ``cyclic_ok``, in which case the
        back edge is written as the atom ``...``.
        """
        if varmap is None:
            varmap = {}
        heap = self.heap
        active: set[int] = set()

        def walk(c, depth):
            c = self.deref(c)
            t = c & 3
            if t == REF:
                v = varmap.get(c)
                if v is None:
                    v = varmap[c] = Var(f"_G{c >> 2}")
                return v
            if t == IMM:
                if c & 7 == ATOM_SUB:
                    return ATOMS.names[c >> 3]
                return c >> 3
            if t == STRUCT and heap[c >> 2] == FLOAT_HDR:
                return self.float_value(c)
            if c in active:
                if cyclic_ok:
                    return "..."
                raise ValueError("cyclic term")
            if t == LIST:
                # iterate along the spine
                items = []
                seen = []
                while True:
                    if c in active:
                        if cyclic_ok:
                            break
                        raise ValueError("cyclic term")
                    active.add(c)
                    seen.append(c)
                    i = c >> 2
                    items.append(walk(heap[i], depth + 1))
                    c = self.deref(heap[i + 1])
                    if c & 3 != LIST:
                        break
                tail = "..." if c in active else walk(c, depth + 1)
                for s in seen:
                    active.discard(s)
                out = tail
                for x in reversed(items):
                    out = Struct(".", (x, out))
                return out
            active.add(c)
            i = c >> 2
            fid = heap[i] >> 3
            n = FUNCTORS.arities[fid]
            args = [walk(heap[i + 1 + k], depth + 1) for k in range(n)]
            active.discard(c)
            return Struct(FUNCTORS.names[fid], args)

        return walk(c, 0)
