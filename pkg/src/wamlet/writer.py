"""Canonical term writer: quotes atoms when needed and honours operators.

Floats use the shortest decimal form that reads back to the same value
(``repr``), always with a fraction or exponent so they stay floats.
"""

from __future__ import annotations

import math

from .reader import DEFAULT_OPS, OpTable, SYMBOL_CHARS
from .syntax import Struct, Var

_DEFAULT = OpTable(DEFAULT_OPS)
_SOLO_ATOMS = {"[]", "!", ";", "{}", ","}


def format_float(f: float) -> str:
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    s = repr(f)
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    elif "e" in s and "." not in s:
        mant, exp = s.split("e")
        s = mant + ".0e" + exp
    return s


def atom_needs_quotes(a: str) -> bool:
    if a == "":
        return True
    if a in _SOLO_ATOMS:
        return a == ","
    c = a[0]
    if "a" <= c <= "z":
        return not all(ch.isalnum() and ch.isascii() or ch == "_" for ch in a)
    if all(ch in SYMBOL_CHARS for ch in a):
        return False
    return True


def quote_atom(a: str) -> str:
    out = []
    for ch in a:
        if ch == "'":
            out.append("\\'")
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        else:
            out.append(ch)
    return "'" + "".join(out) + "'"


def fmt_atom(a: str, quoted: bool = True) -> str:
    if quoted and atom_needs_quotes(a):
        return quote_atom(a)
    return a


class Writer:
    def __init__(self, ops: OpTable | None = None, quoted: bool = True,
                 ignore_ops: bool = False, max_depth: int = 0):
        self.ops = ops or _DEFAULT
        self.quoted = quoted
        self.ignore_ops = ignore_ops
        self.max_depth = max_depth
        self.varnames: dict[int, str] = {}

    def var_name(self, v: Var) -> str:
        n = self.varnames.get(id(v))
        if n is None:
            n = self.varnames[id(v)] = v.name if v.name.startswith("_G") else f"_{len(self.varnames)}"
        return n

    def write(self, t, prec: int = 1200, depth: int = 0) -> str:
        if self.max_depth and depth > self.max_depth:
            return "..."
        if isinstance(t, Var):
            return self.var_name(t)
        if isinstance(t, bool):
            raise TypeError(t)
        if isinstance(t, int):
            return str(t)
        if isinstance(t, float):
            return format_float(t)
        if isinstance(t, str):
            s = fmt_atom(t, self.quoted)
            if prec < 1200 and self.ops.is_op(t) and t not in ("[]", "{}"):
                p = max([v[0] for v in (self.ops.prefix.get(t), self.ops.infix.get(t),
                                        self.ops.postfix.get(t)) if v] or [0])
                if p > prec:
                    return "(" + s + ")"
            return s
        if not isinstance(t, Struct):
            return repr(t)
        if t.name == "." and len(t.args) == 2:
            return self.write_list(t, depth)
        if t.name == "{}" and len(t.args) == 1 and not self.ignore_ops:
            return "{" + self.write(t.args[0], 1200, depth + 1) + "}"
        if t.name == "$VAR" and len(t.args) == 1 and isinstance(t.args[0], int):
            n = t.args[0]
            return chr(ord("A") + n % 26) + (str(n // 26) if n >= 26 else "")
        if not self.ignore_ops:
            s = self.write_op(t, prec, depth)
            if s is not None:
                return s
        args = ",".join(self.write(a, 999, depth + 1) for a in t.args)
        return f"{fmt_atom(t.name, self.quoted)}({args})"

    def write_list(self, t, depth):
        items = []
        while isinstance(t, Struct) and t.name == "." and len(t.args) == 2:
            items.append(self.write(t.args[0], 999, depth + 1))
            t = t.args[1]
        s = "[" + ",".join(items)
        if t != "[]":
            s += "|" + self.write(t, 999, depth + 1)
        return s + "]"

    def operand(self, a, prec: int, depth: int) -> str:
        # an operator atom next to an operator is always bracketed
        if isinstance(a, str) and self.ops.is_op(a) and a not in ("[]", "{}"):
            return "(" + fmt_atom(a, self.quoted) + ")"
        return self.write(a, prec, depth)

    def write_op(self, t: Struct, prec: int, depth: int):
        name = t.name
        qn = fmt_atom(name, self.quoted)
        if len(t.args) == 2 and name in self.ops.infix:
            p, typ = self.ops.infix[name]
            lp = p - 1 if typ[0] == "x" else p
            rp = p - 1 if typ[2] == "x" else p
            left = self.operand(t.args[0], lp, depth + 1)
            right = self.operand(t.args[1], rp, depth + 1)
            if name == ",":
                s = f"{left},{right}"
            elif name[0].isalpha() or name in ("->", ":-", "-->"):
                s = f"{left} {qn} {right}"
            else:
                s = f"{left}{qn}{right}"
                # keep symbol-char operators from gluing onto neighbours
                if left and left[-1] in SYMBOL_CHARS or right and right[0] in SYMBOL_CHARS:
                    s = f"{left} {qn} {right}"
            return f"({s})" if p > prec else s
        if len(t.args) == 1 and name in self.ops.prefix and name not in ("-", "+") or (
            len(t.args) == 1 and name in ("-", "+") and name in self.ops.prefix
        ):
            p, typ = self.ops.prefix[name]
            ap = p - 1 if typ == "fx" else p
            a = t.args[0]
            arg = self.operand(a, ap, depth + 1)
            if name in ("-", "+") and (isinstance(a, (int, float))):
                s = f"{qn}({arg})"
            elif name[0].isalpha() or arg[:1] in SYMBOL_CHARS or arg[:1] == "(" or (
                qn[-1:] in SYMBOL_CHARS and arg[:1] in SYMBOL_CHARS
            ):
                s = f"{qn} {arg}"
            else:
                s = f"{qn}{arg}"
            return f"({s})" if p > prec else s
        if len(t.args) == 1 and name in self.ops.postfix:
            p, typ = self.ops.postfix[name]
            ap = p - 1 if typ == "xf" else p
            s = f"{self.operand(t.args[0], ap, depth + 1)}{qn}"
            return f"({s})" if p > prec else s
        return None


def term_to_text(t, quoted: bool = True, ops: OpTable | None = None,
                 ignore_ops: bool = False, varnames: dict | None = None) -> str:
    w = Writer(ops, quoted=quoted, ignore_ops=ignore_ops)
    if varnames:
        w.varnames.update(varnames)
    return w.write(t)
