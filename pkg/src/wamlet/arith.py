"""Arithmetic over fixnums and floats.

The inline accumulator instructions and ``is/2`` share the operators
defined here.  Results outside the fixnum range raise an evaluation error
instead of wrapping.
"""

from __future__ import annotations

import math

from .terms import (
    ATOM_SUB, ATOMS, FLOAT_HDR, FUNCTORS, INT_SUB, LIST, MAX_INT, MIN_INT, NIL, REF, STRUCT,
    bits_float,
)
from .syntax import Struct


class ArithError(Exception):
    """Carries an ISO formal error term (host form)."""

    def __init__(self, formal):
        super().__init__(formal)
        self.formal = formal


def _eval_err(what):
    return ArithError(Struct("evaluation_error", (what,)))


def _type_err(kind, culprit):
    return ArithError(Struct("type_error", (kind, culprit)))


def check_int(v: int) -> int:
    if not MIN_INT <= v <= MAX_INT:
        raise _eval_err("int_overflow")
    return v


def check_float(v: float) -> float:
    if math.isinf(v):
        raise _eval_err("float_overflow")
    if math.isnan(v):
        raise _eval_err("undefined")
    return v


def fix(v):
    return check_int(v) if type(v) is int else check_float(v)


def add(a, b):
    return fix(a + b)


def sub(a, b):
    return fix(a - b)


def mul(a, b):
    return fix(a * b)


def div(a, b):
    if b == 0:
        raise _eval_err("zero_divisor")
    if type(a) is int and type(b) is int:
        q, r = divmod(a, b)
        if r == 0:
            return check_int(q)
    return check_float(a / b)


def _need_ints(a, b, name=""):
    if type(a) is not int:
        raise _type_err("integer", a)
    if type(b) is not int:
        raise _type_err("integer", b)


def idiv(a, b):
    _need_ints(a, b, "//")
    if b == 0:
        raise _eval_err("zero_divisor")
    q = abs(a) // abs(b)
    return check_int(q if (a >= 0) == (b >= 0) else -q)


def mod(a, b):
    _need_ints(a, b, "mod")
    if b == 0:
        raise _eval_err("zero_divisor")
    return a % b  # Python's sign follows the divisor


def rem(a, b):
    _need_ints(a, b, "rem")
    if b == 0:
        raise _eval_err("zero_divisor")
    return a - b * idiv(a, b)


def minimum(a, b):
    return a if a <= b else b


def maximum(a, b):
    return a if a >= b else b


BINOP_FUNS = {
    "add": add, "subtract": sub, "multiply": mul, "divide": div, "idivide": idiv,
    "mod": mod, "minimum": minimum, "maximum": maximum,
}


def _int_only(f):
    def g(a, b):
        _need_ints(a, b, "")
        return check_int(f(a, b))
    return g


def _shift_l(a, b):
    return a << b if b >= 0 else a >> -b


def _power(a, b):
    if type(a) is int and type(b) is int:
        if b < 0:
            if a in (1, -1):
                return a ** b
            if a == 0:
                raise _eval_err("zero_divisor")
            raise _type_err("float", a)
        if abs(a) > 1 and b > 64:
            raise _eval_err("int_overflow")
        return check_int(a ** b)
    try:
        return check_float(float(a) ** float(b))
    except (OverflowError, ZeroDivisionError):
        raise _eval_err("undefined")


def _fpow(a, b):
    try:
        return check_float(float(a) ** float(b))
    except (OverflowError, ZeroDivisionError, ValueError):
        raise _eval_err("undefined")


def _atan2(a, b):
    return check_float(math.atan2(a, b))


BINARY = {
    "+": add, "-": sub, "*": mul, "/": div, "//": idiv, "mod": mod, "rem": rem,
    "min": minimum, "max": maximum, "**": _fpow, "^": _power,
    ">>": _int_only(lambda a, b: _shift_l(a, -b)), "<<": _int_only(_shift_l),
    "/\\": _int_only(lambda a, b: a & b), "\\/": _int_only(lambda a, b: a | b),
    "xor": _int_only(lambda a, b: a ^ b), "atan2": _atan2, "atan": _atan2,
    "div": _int_only(lambda a, b: _floordiv(a, b)),
    "gcd": _int_only(math.gcd),
}


def _floordiv(a, b):
    if b == 0:
        raise _eval_err("zero_divisor")
    return a // b


def _to_int(f, x):
    if type(x) is int:
        return x
    if math.isinf(x) or math.isnan(x):
        raise _eval_err("undefined")
    return check_int(f(x))


def _sign(x):
    if type(x) is int:
        return (x > 0) - (x < 0)
    return math.copysign(1.0, x) if x != 0 else 0.0


def _fl(f):
    def g(x):
        try:
            return check_float(f(x))
        except ValueError:
            raise _eval_err("undefined")
    return g


UNARY = {
    "-": lambda x: fix(-x), "+": lambda x: x, "abs": lambda x: fix(abs(x)), "sign": _sign,
    "float": lambda x: float(x), "integer": lambda x: _to_int(lambda v: int(math.floor(v + 0.5)), x),
    "truncate": lambda x: _to_int(math.trunc, x), "round": lambda x: _to_int(
        lambda v: int(math.floor(abs(v) + 0.5)) * (1 if v >= 0 else -1), x),
    "ceiling": lambda x: _to_int(math.ceil, x), "floor": lambda x: _to_int(math.floor, x),
    "sqrt": _fl(math.sqrt), "sin": _fl(math.sin), "cos": _fl(math.cos), "tan": _fl(math.tan),
    "atan": _fl(math.atan), "asin": _fl(math.asin), "acos": _fl(math.acos),
    "exp": _fl(math.exp), "log": _fl(lambda v: math.log(v) if v > 0 else float("nan")),
    "\\": lambda x: ~x if type(x) is int else (_ for _ in ()).throw(_type_err("integer", x)),
    "msb": lambda x: x.bit_length() - 1,
    "float_integer_part": lambda x: float(math.trunc(x)),
    "float_fractional_part": lambda x: x - math.trunc(x),
}

CONSTANTS = {"pi": math.pi, "e": math.e, "inf": math.inf, "nan": math.nan,
             "max_tagged_integer": MAX_INT, "min_tagged_integer": MIN_INT,
             "epsilon": 2.220446049250313e-16, "random": None}


class InstantiationError(ArithError):
    def __init__(self):
        super().__init__("instantiation_error")


def eval_cell(heap, c):
    """Value of the arithmetic expression rooted at cell ``c``."""
    # fast path for plain numbers
    while c & 3 == REF:
        v = heap[c >> 2]
        if v == c:
            raise InstantiationError()
        c = v
    if c & 7 == INT_SUB:
        return c >> 3
    t = c & 3
    if t == STRUCT:
        i = c >> 2
        w = heap[i]
        if w == FLOAT_HDR:
            return bits_float(heap[i + 1] >> 3)
        fid = w >> 3
        name = FUNCTORS.names[fid]
        n = FUNCTORS.arities[fid]
        if n == 2:
            f = BINARY.get(name)
            if f is None:
                raise _type_err("evaluable", Struct("/", (name, 2)))
            a = eval_cell(heap, heap[i + 1])
            b = eval_cell(heap, heap[i + 2])
            return f(a, b)
        if n == 1:
            f = UNARY.get(name)
            if f is None:
                raise _type_err("evaluable", Struct("/", (name, 1)))
            return f(eval_cell(heap, heap[i + 1]))
        raise _type_err("evaluable", Struct("/", (name, n)))
    if t == LIST:
        # "a" style one-element code list evaluates to the code
        i = c >> 2
        tail = heap[i + 1]
        while tail & 3 == REF and heap[tail >> 2] != tail:
            tail = heap[tail >> 2]
        if tail == NIL:
            return eval_cell(heap, heap[i])
        raise _type_err("evaluable", Struct("/", (".", 2)))
    # atom
    name = ATOMS.names[c >> 3]
    if name in CONSTANTS:
        v = CONSTANTS[name]
        if v is None:
            import random
            return random.random()
        return v
    if c & 7 == ATOM_SUB:
        raise _type_err("evaluable", Struct("/", (name, 0)))
    raise _type_err("evaluable", c)


# inline comparison instructions
COMPARE_FUNS = {
    "equal_to": lambda a, b: a == b,
    "not_equal_to": lambda a, b: a != b,
    "less_than": lambda a, b: a < b,
    "greater_than": lambda a, b: a > b,
    "not_less_than": lambda a, b: a >= b,
    "not_greater_than": lambda a, b: a <= b,
}

COMPARE_GOALS = {
    "equal_to": "=:=", "not_equal_to": "=\\=", "less_than": "<", "greater_than": ">",
    "not_less_than": ">=", "not_greater_than": "=<",
}
