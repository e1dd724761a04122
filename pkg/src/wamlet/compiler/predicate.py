"""Predicate containers: clause chains, first-argument index, else patching.

A static predicate keeps its clauses in source order plus a hash index
from first-argument key to the sublist of clauses that can match it.
Variable-headed clauses belong to every sublist, merged in source order,
so a bucket is always an ordered subsequence of the full chain.
"""

from __future__ import annotations

from ..terms import FLOAT_FID, FUNCTORS, atom_cell, float_bits, int_cell
from .instructions import ELSE_OPS, FAIL, NEXT, X0_FORMS, else_label, with_else

LIST_KEY = 1 << 71
STRUCT_BASE = 1 << 70
FLOAT_BASE = 1 << 72


def runtime_key(host_key):
    """Index key in cell space for a host-level key; None stays None."""
    if host_key is None:
        return None
    kind = host_key[0]
    if kind == "c":
        v = host_key[1]
        return atom_cell(v) if isinstance(v, str) else int_cell(v)
    if kind == "F":
        return FLOAT_BASE + float_bits(host_key[1])
    _, name, n = host_key
    if name == "." and n == 2:
        return LIST_KEY
    fid = FUNCTORS.intern(name, n)
    assert fid != FLOAT_FID
    return STRUCT_BASE + fid


class Clause:
    __slots__ = ("cc", "code", "key", "guard", "needs_skip", "linked", "number",
                 "entry_counter", "exit_counter")

    def __init__(self, cc, code, number):
        self.cc = cc
        self.code = code
        self.key = runtime_key(cc.index_key)
        self.number = number
        self.linked = None
        self.entry_counter = None
        self.exit_counter = None
        self.guard = False
        self.needs_skip = False
        self.analyse(cc_arity(cc))

    def analyse(self, arity):
        self.guard, self.needs_skip = guard_shape(self.code, arity)

    def eligible(self, skip: bool) -> bool:
        """Can be entered without a choicepoint, relying on else branches."""
        return self.guard and (skip or not self.needs_skip)


def cc_arity(cc) -> int:
    return cc.key[1]


def _arg_safe(reg, arity) -> bool:
    return reg[0] == "y" or reg[1] >= arity


def guard_shape(code, arity):
    """``(is_guard, needs_skip)`` for a clause's code.

    A guard prefix runs up to the first ``cut`` and only tests: it never
    binds, never overwrites argument registers, and its else labels all go
    to the next clause.  Failing inside it can therefore resume with the
    next candidate clause directly.
    """
    has_else = False
    needs_skip = False
    unify_mode = None  # "read" after a skipped x0 structure, "write" after put_structure
    for i, ins in enumerate(code):
        op = ins[0]
        if op == "cut" and ins[1] is None:
            return has_else, needs_skip
        if op in X0_FORMS:
            if i != 0:
                return False, False
            needs_skip = True
            if op in ("get_structure_x0", "get_list_x0"):
                unify_mode = "read"
            continue
        if op.startswith("unify_"):
            if unify_mode is None:
                return False, False
            if op == "unify_void":
                continue
            if op == "unify_variable":
                if not _arg_safe(ins[1], arity):
                    return False, False
                continue
            if unify_mode == "write" and op in ("unify_value", "unify_constant", "unify_large"):
                continue
            return False, False
        if op == "allocate" or op == "counter":
            continue
        unify_mode = None
        if op in ELSE_OPS:
            if else_label(ins) != NEXT:
                return False, False
            has_else = True
            continue
        if op.startswith(("first_", "later_", "binop_")):
            continue
        if op in ("store_x_variable", "store_y_variable", "get_level"):
            if not _arg_safe(ins[1], arity):
                return False, False
            continue
        if op in ("get_variable", "get_x_variable"):
            if not _arg_safe(ins[1], arity):
                return False, False
            continue
        if op in ("put_variable", "put_value", "put_unsafe_value", "put_constant", "put_nil",
                  "put_large", "put_structure", "put_list"):
            if not _arg_safe(ins[-1], arity):
                return False, False
            if op == "put_variable" and not _arg_safe(ins[1], arity):
                return False, False
            if op in ("put_structure", "put_list"):
                unify_mode = "write"
            continue
        return False, False
    return False, False


def patch_else(code: list) -> list:
    """Point every FAIL else label of ``code`` at the next clause."""
    out = []
    for ins in code:
        if ins[0] in ELSE_OPS and else_label(ins) == FAIL:
            ins = with_else(ins, NEXT)
        out.append(ins)
    return out


class Pred:
    """A predicate: static clause chain with index, or a dynamic store."""

    def __init__(self, name: str, arity: int):
        self.name = name
        self.arity = arity
        self.key = (name, arity)
        self.clauses: list[Clause] = []
        self.index: dict = {}
        self.var_clauses: list[Clause] = []
        self.dynamic = None  # DynPred when dynamic
        self.builtin = None  # (kind, fn) for engine escapes
        self.defined = False
        self.file = None

    def __repr__(self):
        return f"<Pred {self.name}/{self.arity}>"

    def add_clause(self, cc, patch: bool = True) -> Clause:
        if patch and self.clauses:
            prev = self.clauses[-1]
            prev.code = patch_else(prev.code)
            prev.analyse(self.arity)
            prev.linked = None
        cl = Clause(cc, list(cc.code), len(self.clauses))
        self.clauses.append(cl)
        self.defined = True
        if cl.key is None:
            self.var_clauses.append(cl)
            for bucket in self.index.values():
                bucket.append(cl)
        else:
            bucket = self.index.get(cl.key)
            if bucket is None:
                bucket = self.index[cl.key] = list(self.var_clauses)
            bucket.append(cl)
        return cl

    def candidates(self, key):
        """Clause list to try for a call whose x0 has index key ``key``."""
        if key is None:
            return self.clauses
        bucket = self.index.get(key)
        if bucket is None:
            return self.var_clauses
        return bucket
