"""Attributed variables, suspensions and mutable terms.

An attributed variable is a four-word record::

    [-1] [value] [attributes] [suspensions]

``value`` is a self reference while unbound.  ``attributes`` is a list
with one ``Module(Bitmap, Value)`` entry per module, in module
registration order; bit 0 of ``Bitmap`` says whether the value is
present.  ``suspensions`` is a plain list of goals (``freeze/2``).

Updates overwrite the record in place when it is younger than the newest
choicepoint.  Otherwise the record is copied and the old value cell is
bound (trailed, without waking anything) to the copy, so backtracking
brings the old record back.
"""

from __future__ import annotations

from .syntax import Struct
from .terms import ATTV_MARK, FUNCTORS, INT_SUB, LIST, MUTABLE_FW, NIL, REF, STRUCT, Cell, atom_cell, atom_name, int_cell


def _err(formal):
    from .machine import PrologThrow
    return PrologThrow(formal)


def is_attvar(m, c) -> bool:
    return c & 3 == REF and m.heap[(c >> 2) - 1] == ATTV_MARK and (c >> 2) > 0


def list_cells(m, c):
    out = []
    c = m.deref(c)
    heap = m.heap
    while c & 3 == LIST:
        i = c >> 2
        out.append(heap[i])
        c = m.deref(heap[i + 1])
    return out


def ensure_attvar(m, c) -> int:
    """Value-cell index of the attributed variable for unbound ``c``."""
    i = c >> 2
    if is_attvar(m, c):
        return i
    heap = m.heap
    h = len(heap)
    heap.extend((ATTV_MARK, (h + 1) << 2, NIL, NIL))
    m.store.bind(i, (h + 1) << 2)
    return h + 1


def update_slot(m, i, off, value):
    """Set attributes (off=1) or suspensions (off=2) of the record at ``i``."""
    heap = m.heap
    store = m.store
    if i - 1 >= store.HB:
        heap[i + off] = value
        return i
    h = len(heap)
    heap.extend((ATTV_MARK, (h + 1) << 2, heap[i + 1], heap[i + 2]))
    heap[h + 1 + off] = value
    heap[i] = (h + 1) << 2
    if i < store.HB:
        store.trail.append(i)
    return h + 1


def _entries(m, i):
    out = []
    for e in list_cells(m, m.heap[i + 1]):
        e = m.deref(e)
        j = e >> 2
        w = m.heap[j]
        name = FUNCTORS.names[w >> 3]
        out.append((name, m.deref(m.heap[j + 1]) >> 3, m.heap[j + 2]))
    return out


def _module(m, c):
    c = m.deref(c)
    if c & 3 == REF:
        raise _err("instantiation_error")
    if c & 7 != 7:
        raise _err(Struct("type_error", ("atom", Cell(c))))
    name = atom_name(c)
    if name not in m.attr_modules:
        m.attr_modules.append(name)
    return name


def _set_attr(m, i, module, bits, value):
    entries = {n: (b, v) for n, b, v in _entries(m, i)}
    entries[module] = (bits, value)
    order = m.attr_modules
    cells = []
    for name in sorted(entries, key=lambda n: order.index(n) if n in order else len(order)):
        b, v = entries[name]
        cells.append(m.store.make_struct(name, [int_cell(b), v]))
    update_slot(m, i, 1, m.store.make_list(cells))


def put_attr(m, x):
    c = m.deref(x[0])
    if c & 3 != REF:
        raise _err(Struct("uninstantiation_error", (Cell(c),)))
    module = _module(m, x[1])
    i = ensure_attvar(m, c)
    _set_attr(m, i, module, 1, x[2])
    return True


def get_attr(m, x):
    c = m.deref(x[0])
    if not is_attvar(m, c):
        return False
    module = _module(m, x[1])
    for name, bits, v in _entries(m, c >> 2):
        if name == module and bits & 1:
            return m.unify(v, x[2])
    return False


def del_attr(m, x):
    c = m.deref(x[0])
    if not is_attvar(m, c):
        return True
    module = _module(m, x[1])
    for name, bits, v in _entries(m, c >> 2):
        if name == module and bits & 1:
            _set_attr(m, c >> 2, module, 0, v)
    return True


def attv_modules(m, x):
    c = m.deref(x[0])
    names = []
    if is_attvar(m, c):
        names = [atom_cell(n) for n, bits, _ in _entries(m, c >> 2) if bits & 1]
    return m.unify(x[1], m.store.make_list(names))


def attv_bind(m, x):
    """'$attv_bind'(V, Value, Susp): commit a suspended binding."""
    v = x[0]
    c = m.deref(v)
    if c != v or not is_attvar(m, c):
        raise _err(Struct("permission_error", ("bind", "attributed_variable", Cell(c))))
    i = c >> 2
    heap = m.heap
    store = m.store
    susp = heap[i + 2]
    val = m.deref(x[1])
    if val == c:
        return m.unify(x[2], NIL)
    if val & 3 == REF:
        # hand the suspensions over to the surviving variable
        j = ensure_attvar(m, val)
        goals = list_cells(m, heap[j + 2]) + list_cells(m, susp)
        j = update_slot(m, j, 2, m.store.make_list(goals))
        heap[i] = j << 2
        if i < store.HB:
            store.trail.append(i)
        return m.unify(x[2], NIL)
    heap[i] = val
    if i < store.HB:
        store.trail.append(i)
    return m.unify(x[2], susp)


def freeze_(m, x):
    """'$freeze'(V, G): suspend G on V; fails when V is bound."""
    c = m.deref(x[0])
    if c & 3 != REF:
        return False
    i = ensure_attvar(m, c)
    goals = list_cells(m, m.heap[i + 2]) + [x[1]]
    update_slot(m, i, 2, m.store.make_list(goals))
    return True


def frozen(m, x):
    c = m.deref(x[0])
    goals = list_cells(m, m.heap[(c >> 2) + 2]) if is_attvar(m, c) else []
    g = atom_cell("true")
    for h in reversed(goals):
        g = h if g == atom_cell("true") else m.store.make_struct(",", [h, g])
    return m.unify(x[1], g)


def attvar_(m, x):
    return is_attvar(m, m.deref(x[0]))


# -- mutable terms -------------------------------------------------------------------

def _mutable(m, c):
    c = m.deref(c)
    if c & 3 == REF:
        raise _err("instantiation_error")
    if not (c & 3 == STRUCT and m.heap[c >> 2] == MUTABLE_FW):
        raise _err(Struct("type_error", ("mutable", Cell(c))))
    return (c >> 2) + 1


def create_mutable(m, x):
    heap = m.heap
    h = len(heap)
    heap.extend((MUTABLE_FW, x[0], int_cell(m.serial)))
    return m.unify(x[1], (h << 2) | STRUCT)


def get_mutable(m, x):
    i = _mutable(m, x[1])
    return m.unify(x[0], m.heap[i])


def update_mutable(m, x):
    i = _mutable(m, x[1])
    heap = m.heap
    stamp = heap[i + 1] >> 3
    cps = m.cps
    if cps and cps[-1].serial > stamp:
        m.trail.append((i, heap[i], heap[i + 1]))
    heap[i] = x[0]
    heap[i + 1] = (m.serial << 3) | INT_SUB
    return True


def is_mutable(m, x):
    c = m.deref(x[0])
    return c & 3 == STRUCT and m.heap[c >> 2] == MUTABLE_FW


BUILTINS = {
    ("put_attr", 3): put_attr, ("get_attr", 3): get_attr, ("del_attr", 2): del_attr,
    ("$attv_modules", 2): attv_modules, ("$attv_bind", 3): attv_bind,
    ("$freeze", 2): freeze_, ("frozen", 2): frozen, ("attvar", 1): attvar_,
    ("create_mutable", 2): create_mutable, ("get_mutable", 2): get_mutable,
    ("update_mutable", 2): update_mutable, ("mutable", 1): is_mutable,
}
