"""Symbolic VM instructions and their printed notation.

An instruction is a tuple ``(opcode, *operands)``.  Operand conventions:

* registers are ``("x", n)`` or ``("y", n)`` and print as ``x(n)``;
* constants are host atoms/integers, floats for the ``*_large`` forms;
* functors and predicates are ``(name, arity)`` and print as ``name/arity``
  (a linked predicate object prints the same way);
* else labels are ``FAIL`` or ``NEXT``.  ``NEXT`` means "the entry of the
  following clause" and is what :func:`patch_else` installs.
"""

from __future__ import annotations

from ..writer import fmt_atom, format_float

FAIL = "fail"
NEXT = "next"

TEST_KINDS = ("var", "nonvar", "atom", "number", "integer", "float", "atomic",
              "compound", "callable")

BINOPS = {
    "+": "add", "-": "subtract", "*": "multiply", "/": "divide",
    "//": "idivide", "mod": "mod", "min": "minimum", "max": "maximum",
}
COMPARISONS = {
    "=:=": "equal_to", "<": "less_than", ">": "greater_than",
    "=\\=": "not_equal_to", ">=": "not_less_than", "=<": "not_greater_than",
}
BINOP_NAMES = tuple("binop_" + v for v in BINOPS.values())
CMP_NAMES = tuple(COMPARISONS.values())

X0_FORMS = {
    "get_constant_x0", "get_nil_x0", "get_structure_x0", "get_list_x0", "get_large_x0",
}

# instructions whose last operand is an else label
ELSE_OPS = {"test"} | set(CMP_NAMES) | {c + "_imm" for c in CMP_NAMES}


def X(n):
    return ("x", n)


def Y(n):
    return ("y", n)


def is_reg(o) -> bool:
    return type(o) is tuple and len(o) == 2 and o[0] in ("x", "y") and type(o[1]) is int


def else_label(ins):
    if ins[0] in ELSE_OPS:
        return ins[-1]
    return None


def with_else(ins, label):
    return ins[:-1] + (label,)


# -- printing ----------------------------------------------------------------

def fmt_operand(o) -> str:
    if is_reg(o):
        return f"{o[0]}({o[1]})"
    if isinstance(o, float):
        return format_float(o)
    if isinstance(o, bool):
        return str(o)
    if isinstance(o, int):
        return str(o)
    if isinstance(o, str):
        return fmt_atom(o)
    if isinstance(o, tuple) and len(o) == 2 and isinstance(o[0], str) and isinstance(o[1], int):
        return f"{fmt_atom(o[0])}/{o[1]}"
    name = getattr(o, "name", None)
    arity = getattr(o, "arity", None)
    if name is not None and arity is not None:
        return f"{fmt_atom(name)}/{arity}"
    return repr(o)


def fmt_instruction(ins, label_of=None) -> str:
    """Render one instruction; ``label_of(label)`` names else targets."""
    op = ins[0]
    if label_of is None:
        label_of = _default_label
    if op == "test":
        _, kind, reg, label = ins
        return f"{kind} {fmt_operand(reg)} else {label_of(label)}"
    if op in ELSE_OPS:
        ops = [fmt_operand(o) for o in ins[1:-1]] + [label_of(ins[-1])]
        return f"{op} {','.join(ops)}"
    if op in ("call", "execute"):
        return f"{op} {fmt_operand(ins[1])}"
    if op == "cut" and ins[1] is None:
        return "cut"
    if len(ins) == 1:
        return op
    return f"{op} {','.join(fmt_operand(o) for o in ins[1:])}"


def _default_label(label):
    return "fail" if label == FAIL else "next"


def format_predicate(name: str, arity: int, clause_codes) -> str:
    """Print a predicate's clauses as one listing.

    Clause k (k >= 2) starts at label ``L{k-1}``; ``NEXT`` else branches in
    clause k resolve to the label of clause k+1.
    """
    lines = [f"{fmt_atom(name)}/{arity}:"]
    n = len(clause_codes)
    for ci, code in enumerate(clause_codes):
        def label_of(label, ci=ci):
            if label == NEXT and ci + 1 < n:
                return f"L{ci + 1}"
            return "fail"
        for k, ins in enumerate(code):
            text = fmt_instruction(ins, label_of)
            if k == 0 and ci > 0:
                lines.append(f"L{ci}: {text}")
            else:
                lines.append(f"    {text}")
        if not code and ci > 0:
            lines.append(f"L{ci}:")
    return "\n".join(lines)
