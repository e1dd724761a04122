"""Loading program text: clauses, directives and dynamic declarations."""

from __future__ import annotations

import sys

from .compiler import CompileError, lines_from_spans
from .reader import PrologSyntaxError, read_clauses
from .syntax import Struct, Var


def _warn(m, errors, msg):
    if errors is not None:
        errors.append(msg)
    else:
        print(msg, file=sys.stderr)


def _is_directive(t):
    return isinstance(t, Struct) and t.name in (":-", "?-") and len(t.args) == 1


def _is_dynamic(m, t):
    head = t.args[0] if isinstance(t, Struct) and t.name == ":-" and len(t.args) == 2 else t
    if isinstance(head, str):
        key = (head, 0)
    elif isinstance(head, Struct):
        key = (head.name, len(head.args))
    else:
        return False
    p = m.preds.get(key)
    return p is not None and p.dynamic is not None


def run_directive(m, goal, file, line, errors):
    from .machine import Halt, PrologError
    from .writer import term_to_text
    h = len(m.heap)
    g = m.store.build_term(goal)
    try:
        ok = False
        for _ in m.solve(g):
            ok = True
            break
        if not ok:
            _warn(m, errors, f"{file}:{line}: warning: directive failed: "
                             f"{term_to_text(goal, ops=m.ops)}")
    except PrologError as e:
        _warn(m, errors, f"{file}:{line}: error in directive: {e}")
    except Halt:
        raise
    finally:
        del m.heap[h:]


def consult_text(m, text, file="user", errors=None):
    """Load clauses from ``text``; returns the number of clauses added."""
    from .machine import PrologError, PrologThrow
    n = 0
    prev = m.loading
    m.loading = file
    init_goals = []
    try:
        for at in read_clauses(text, m.ops):
            if isinstance(at, PrologSyntaxError):
                _warn(m, errors, f"{file}:{at.line}: syntax error: {at.message}")
                continue
            t = at.term
            if _is_directive(t):
                goal = t.args[0]
                if isinstance(goal, Struct) and goal.name == "initialization" \
                        and len(goal.args) == 1:
                    init_goals.append((goal.args[0], at.line))
                    continue
                run_directive(m, goal, file, at.line, errors)
                continue
            if isinstance(t, Var):
                _warn(m, errors, f"{file}:{at.line}: error: clause is a variable")
                continue
            if _is_dynamic(m, t):
                run_directive(m, Struct("assertz", (t,)), file, at.line, errors)
                n += 1
                continue
            try:
                lines = lines_from_spans(t, at.spans, at.line)
                for cc in m.compiler.compile_clause(t, file, at.line, lines):
                    m.add_clause_code(cc, file)
                n += 1
            except CompileError as e:
                _warn(m, errors, f"{file}:{e.line or at.line}: error: {e.formal}")
            except PrologThrow as e:
                from .writer import term_to_text
                _warn(m, errors, f"{file}:{at.line}: error: {term_to_text(e.formal)}")
            except OverflowError:
                _warn(m, errors, f"{file}:{at.line}: error: representation_error(max_integer)")
        for goal, line in init_goals:
            run_directive(m, goal, file, line, errors)
    except PrologError:
        raise
    finally:
        m.loading = prev
    return n


def consult_file(m, path, errors=None):
    with open(path, encoding="utf-8") as f:
        text = f.read()
    return consult_text(m, text, path, errors)
