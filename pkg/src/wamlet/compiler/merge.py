"""Peephole merge pass.

The table is small and fixed:

* ``later_constant k`` followed by ``binop_OP``  ->  ``binop_OP_imm k``
* ``later_constant k`` followed by a comparison ->  ``CMP_imm k,L``
* ``get_variable x(n),x(a)``                    ->  ``get_x_variable x(n),x(a)``
"""

from __future__ import annotations

from .instructions import BINOP_NAMES, CMP_NAMES


def merge_pass(code: list) -> list:
    out = []
    i = 0
    n = len(code)
    while i < n:
        ins = code[i]
        op = ins[0]
        if op == "later_constant" and i + 1 < n:
            nxt = code[i + 1]
            if nxt[0] in BINOP_NAMES:
                out.append((nxt[0] + "_imm", ins[1]))
                i += 2
                continue
            if nxt[0] in CMP_NAMES:
                out.append((nxt[0] + "_imm", ins[1], nxt[1]))
                i += 2
                continue
        if op == "get_variable" and ins[1][0] == "x":
            out.append(("get_x_variable", ins[1], ins[2]))
            i += 1
            continue
        out.append(ins)
        i += 1
    return out
