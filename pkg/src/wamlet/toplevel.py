"""Command line entry point: batch goals and the interactive toplevel.

Exit codes: 0 success, 1 goal failed, 2 uncaught exception, 64 bad usage.
``halt(N)`` exits with N.
"""

from __future__ import annotations

import argparse
import signal
import sys

from .compiler import format_predicate
from .consult import consult_file
from .machine import INTERRUPT, Halt, Machine, PrologError
from .reader import PrologSyntaxError, parse_term
from .syntax import Struct
from .writer import term_to_text

EXIT_OK, EXIT_FAIL, EXIT_ERROR, EXIT_USAGE = 0, 1, 2, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wamlet", description="A small WAM-based Prolog system.")
    p.add_argument("--load", action="append", default=[], metavar="FILE",
                   help="consult FILE before anything else (repeatable)")
    p.add_argument("--goal", metavar="GOAL", help="run GOAL once, then halt")
    p.add_argument("--profile", action="store_true",
                   help="instrument clauses and print entry/exit counts on halt")
    p.add_argument("--dump-code", action="append", default=[], metavar="PRED",
                   help="print the VM code of PRED (name/arity) after loading")
    p.add_argument("--heap-margin", type=int, default=1024, metavar="N",
                   help="free heap cells guaranteed at every safe point")
    p.add_argument("--bigmem-init", type=int, default=None, metavar="N",
                   help="size in bytes of the first block taken from the host")
    p.add_argument("--no-merge", action="store_true",
                   help="disable the peephole merge pass")
    p.add_argument("--stats", action="store_true",
                   help="print execution statistics on halt")
    return p


def format_error(term) -> str:
    """Render an uncaught ball, naming the responsible call site."""
    if isinstance(term, Struct) and term.name == "error" and len(term.args) == 2:
        formal, ctx = term.args
        text = f"! {term_to_text(formal)}"
        if isinstance(ctx, Struct) and ctx.name == "context" and len(ctx.args) == 2:
            pi, site = ctx.args
            if isinstance(site, Struct) and site.name == "callsite" and len(site.args) == 2:
                text += f"\n! in {term_to_text(pi)}, called at {site.args[0]}:{site.args[1]}"
            else:
                text += f"\n! in {term_to_text(pi)}"
        return text
    return f"! uncaught exception: {term_to_text(term)}"


def profile_report(m) -> str:
    rows = []
    for key in sorted(m.preds, key=lambda k: (k[0], k[1])):
        p = m.preds[key]
        for k, cl in enumerate(p.clauses):
            if cl.entry_counter is None:
                continue
            rows.append(f"{term_to_text(Struct('/', key))}\t{k + 1}\t"
                        f"{m.counters[cl.entry_counter]}\t{m.counters[cl.exit_counter]}")
    return "predicate\tclause\tentries\texits\n" + "\n".join(rows) + ("\n" if rows else "")


def dump_code(m, spec: str) -> str:
    name, _, arity = spec.rpartition("/")
    if not name or not arity.isdigit():
        raise ValueError(f"bad predicate indicator {spec!r}")
    keys = [(name, int(arity))]
    keys += sorted(k for k in m.preds if k[0].startswith(name + "$") and m.preds[k].clauses)
    out = []
    for key in keys:
        p = m.preds.get(key)
        if p is None or not p.clauses:
            if p is not None and p.dynamic is not None:
                out.append(f"{term_to_text(Struct('/', key))}: dynamic")
            else:
                out.append(f"{term_to_text(Struct('/', key))}: no compiled clauses")
            continue
        out.append(format_predicate(key[0], key[1], [cl.code for cl in p.clauses]))
    return "\n".join(out) + "\n"


def _install_sigint(m):
    def handler(signum, frame):
        if m.event_flag & INTERRUPT:
            raise KeyboardInterrupt
        m.post_event(INTERRUPT)

    try:
        return signal.signal(signal.SIGINT, handler)
    except ValueError:  # not in the main thread
        return None


def run_goal(m, text: str) -> int:
    try:
        at = parse_term(text, m.ops)
    except PrologSyntaxError as e:
        print(f"! syntax error: {e}", file=sys.stderr)
        return EXIT_ERROR
    goal = m.store.build_term(at.term, {})
    try:
        for _ in m.solve(goal):
            return EXIT_OK
        return EXIT_FAIL
    except PrologError as e:
        m.out.flush()
        print(format_error(e.term), file=sys.stderr)
        return EXIT_ERROR
    finally:
        m.out.flush()


def _read_query(stream, out):
    """Read lines until the text ends with a full stop; None at end of input."""
    buf = []
    out.write("?- ")
    out.flush()
    while True:
        line = stream.readline()
        if not line:
            return "".join(buf) if "".join(buf).strip() else None
        buf.append(line)
        text = "".join(buf).rstrip()
        if text.endswith(".") and not text.endswith(".."):
            return text
        if not text:
            buf = []
            out.write("?- ")
        else:
            out.write("|  ")
        out.flush()


def repl(m, stream=None, out=None) -> int:
    stream = stream or sys.stdin
    out = out or sys.stdout
    while True:
        text = _read_query(stream, out)
        if text is None:
            out.write("\n")
            return EXIT_OK
        try:
            at = parse_term(text, m.ops)
        except PrologSyntaxError as e:
            out.write(f"! syntax error: {e}\n")
            continue
        varmap: dict = {}
        goal = m.store.build_term(at.term, varmap)
        names = [n for n in at.varnames if not n.startswith("_")]
        pins = [varmap[id(at.varnames[n])] for n in names]
        level = len(m.cps)
        gen = m.solve(goal, pins)
        try:
            for vals in gen:
                m.out.flush()
                vm: dict = {}
                lines = [f"{n} = {term_to_text(m.store.to_host(c, vm, cyclic_ok=True), ops=m.ops)}"
                         for n, c in zip(names, vals)]
                det = len(m.cps) <= level + 1
                if not lines:
                    out.write("yes\n")
                    break
                out.write(",\n".join(lines))
                if det:
                    out.write("\nyes\n")
                    break
                out.write(" ? ")
                out.flush()
                reply = stream.readline()
                if reply.strip() != ";":
                    out.write("yes\n")
                    break
                out.write("\n")
            else:
                out.write("no\n")
        except PrologError as e:
            m.out.flush()
            out.write(format_error(e.term) + "\n")
        except Halt as h:
            gen.close()
            return h.code
        except KeyboardInterrupt:
            out.write("\n! interrupted\n")
        finally:
            gen.close()
        out.flush()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    m = Machine(profile=args.profile, heap_margin=args.heap_margin,
                bigmem_init=args.bigmem_init, merge=not args.no_merge)
    _install_sigint(m)
    code = EXIT_OK
    try:
        for path in args.load:
            try:
                consult_file(m, path)
            except OSError as e:
                print(f"! cannot load {path}: {e.strerror}", file=sys.stderr)
                return EXIT_ERROR
        for spec in args.dump_code:
            try:
                sys.stdout.write(dump_code(m, spec))
            except ValueError as e:
                print(f"wamlet: {e}", file=sys.stderr)
                return EXIT_USAGE
        if args.goal is not None:
            code = run_goal(m, args.goal)
        elif not args.dump_code or sys.stdin.isatty():
            code = repl(m)
    except Halt as h:
        code = h.code
    finally:
        sys.stdout.flush()
    if args.profile:
        sys.stdout.write(profile_report(m))
    if args.stats:
        from .builtins import statistics0
        statistics0(m, m.x)
    sys.stdout.flush()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
