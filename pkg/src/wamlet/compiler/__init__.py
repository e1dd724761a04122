"""Clause compiler: flattening, code generation, merging, patching."""

from .clause import CallSiteMap, ClauseCode, CompileError, Compiler, lines_from_spans
from .instructions import FAIL, NEXT, fmt_instruction, format_predicate
from .instrument import CounterSource, instrument
from .merge import merge_pass
from .predicate import Clause, Pred, guard_shape, patch_else, runtime_key

__all__ = [
    "CallSiteMap", "ClauseCode", "CompileError", "Compiler", "FAIL", "NEXT",
    "fmt_instruction", "format_predicate", "CounterSource", "instrument", "merge_pass",
    "Clause", "Pred", "guard_shape", "patch_else", "runtime_key", "compile_predicate_text",
]


def compile_predicate_text(text: str, merge: bool = True, patch: bool = True):
    """Compile program text; returns ``{key: Pred}`` for inspection."""
    from ..reader import PrologSyntaxError, read_clauses
    from .clause import lines_from_spans

    comp = Compiler()
    preds: dict = {}
    for at in read_clauses(text):
        if isinstance(at, PrologSyntaxError):
            raise at
        lines = lines_from_spans(at.term, at.spans, at.line)
        for cc in comp.compile_clause(at.term, "user", at.line, lines):
            if merge:
                cc.code = merge_pass(cc.code)
            p = preds.get(cc.key)
            if p is None:
                p = preds[cc.key] = Pred(*cc.key)
            p.add_clause(cc, patch=patch)
    return preds
