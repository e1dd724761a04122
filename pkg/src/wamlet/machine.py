"""The VM emulator.

Linked code is a list of tuples ``(handler, *operands)``; the run loop
fetches, bumps ``p`` and calls the handler.  Handlers that fail call
:meth:`Machine.fail`, which either takes a pending else alternative
(shallow backtracking into the next clause) or restores the newest
choicepoint.

Safe points are ``call``, ``execute``, ``proceed`` and the final success
stub.  When the event flag is set there, the machine services the
conditions in a fixed order (collect, wakeup, interrupt, cleanup).  Goal
conditions are run by pushing a resume frame that re-executes the
interrupted instruction afterwards.
"""

from __future__ import annotations

import math
import sys
import time

from . import arith
from .compiler import CallSiteMap, Compiler, CounterSource, instrument, merge_pass
from .compiler.instructions import X0_FORMS, is_reg
from .compiler.predicate import FLOAT_BASE, LIST_KEY, STRUCT_BASE, Pred
from .dyndb import INF, DynDB, DynPred
from .memory import MemManager
from .reader import OpTable
from .syntax import Struct
from .termops import copy_out, instantiate, unify
from .terms import (
    ATOM_SUB, ATTV_MARK, FLOAT_HDR, FUNCTORS, IMM, INT_SUB, LIST, NIL, REF, STRUCT, TRUE, Cell,
    CleanupEntry, TermStore, atom_cell, atom_name, float_bits, functor_word, int_cell,
)

# choicepoint kinds
CLAUSES, DYN, BARRIER, CATCH, REACTIVATE, UNEXIT, RETRY = range(7)

# event flag bits
COLLECT, WAKEUP, INTERRUPT, CLEANUP = 1, 2, 4, 8

N_REGS = 1024


class PrologError(Exception):
    """An uncaught Prolog exception; ``term`` is the ball as a host term."""

    def __init__(self, term, blueprint=None):
        from .writer import term_to_text
        try:
            text = term_to_text(term)
        except Exception:  # pragma: no cover - defensive
            text = repr(term)
        super().__init__(text)
        self.term = term
        self.blueprint = blueprint


class PrologThrow(Exception):
    """Raised by Python builtins; becomes ``error(Formal, Context)``."""

    def __init__(self, formal, culprit=None):
        super().__init__(formal)
        self.formal = formal
        self.culprit = culprit


class Halt(Exception):
    def __init__(self, code=0):
        super().__init__(code)
        self.code = code


class _Ball(Exception):
    """A ball already copied off the heap (throw/1)."""

    def __init__(self, bp):
        self.bp = bp


class _Stop(Exception):
    def __init__(self, result):
        self.result = result


class _Uncaught(Exception):
    def __init__(self, bp):
        self.bp = bp


class Code(list):
    """Linked clause code plus what the collector needs to scan it."""

    __slots__ = ("clause", "ywrite", "x0", "sym", "pred")


class Env:
    __slots__ = ("prev", "cpc", "cpp", "y", "code", "resume")

    def __init__(self, prev, cpc, cpp, y, code, resume=None):
        self.prev = prev
        self.cpc = cpc
        self.cpp = cpp
        self.y = y
        self.code = code
        self.resume = resume


class Choicepoint:
    __slots__ = ("kind", "H", "TR", "E", "cpc", "cpp", "args", "B0", "alt", "serial",
                 "c", "stamp", "data", "active")

    def __init__(self, kind, H, TR, E, cpc, cpp, args, B0, alt, serial):
        self.kind = kind
        self.H = H
        self.TR = TR
        self.E = E
        self.cpc = cpc
        self.cpp = cpp
        self.args = args
        self.B0 = B0
        self.alt = alt
        self.serial = serial
        self.c = False
        self.stamp = None
        self.data = None
        self.active = True


class Context:
    """Registers of an outer run saved by a nested solve."""

    __slots__ = ("x", "E", "cpc", "cpp", "code", "p", "B0", "else_alt", "S", "write",
                 "A", "B", "last_site", "pins", "barrier")


class Machine:
    def __init__(self, *, merge: bool = True, patch_else: bool = True, use_else: bool = True,
                 profile: bool = False, heap_margin: int = 1024, heap_cells: int = 1 << 18,
                 max_heap_cells: int = 1 << 26, bigmem_init: int | None = None,
                 out=None, library: bool = True):
        self.store = TermStore()
        self.heap = self.store.heap
        self.trail = self.store.trail
        self.store.attvar_bound = self._attvar_bound
        self.mem = MemManager(bigmem_init=bigmem_init)
        self.heap_cap = heap_cells
        self.max_heap = max_heap_cells
        self.margin = heap_margin
        for name, cells in (("heap", heap_cells), ("local", 1 << 14), ("trail", 1 << 14),
                            ("choice", 1 << 14)):
            self.mem.reserve_stack(name, cells * 8)
        self.heap_soft = self.heap_cap - self.margin
        self.gc_yield = 1.0
        self.gc_stats = {"collections": 0, "reclaimed": 0, "time": 0.0, "expansions": 0,
                         "last_action": None}

        self.merge = merge
        self.patch = patch_else
        self.use_else = use_else
        self.profile = profile
        self.out = out if out is not None else sys.stdout

        self.x = [0] * N_REGS
        self.E = None
        self.cpc = None
        self.cpp = 0
        self.code = None
        self.p = 0
        self.B0 = 0
        self.S = 0
        self.write = False
        self.A = 0
        self.B = 0
        self.else_alt = None
        self.cps: list[Choicepoint] = []
        self.serial = 0
        self.last_site = 0
        self.contexts: list[Context] = []

        self.event_flag = 0
        self.pending_wake: list = []
        self.pending_cleanups: list = []
        self.cleanup_scan = False
        self.cleanup_handles: dict[int, CleanupEntry] = {}
        self.next_handle = 0
        self.interrupt_goal = None  # blueprint
        self.timer_at = math.inf
        self.ncalls = 0
        self.n_try = 0
        self.n_else = 0

        self.preds: dict[tuple, Pred] = {}
        self.callsites = CallSiteMap()
        self.compiler = Compiler(self.callsites)
        self.counter_src = CounterSource()
        self.counters: list[int] = []
        self.ops = OpTable()
        self.dyn = DynDB(self.mem)
        self.dyn.min_stamp = self.min_dyn_stamp
        self.attr_modules: list[str] = []
        self.bags: dict[int, list] = {}
        self.next_bag = 0
        self.flags = {"unknown": "error"}
        self.start_time = time.process_time()
        self.start_wall = time.time()
        self.last_runtime = 0.0
        self.last_walltime = 0.0
        self.halted = None
        self.loading = None  # file being consulted

        self.SUCCEED = self._stub([(self.op_succeed,)])
        self.RESUME = self._stub([(self.op_resume,)])
        from . import builtins
        builtins.install(self)
        self.call1 = self.pred(("call", 1))
        self.CALLGOAL = self._stub([(self.op_execute, self.call1, 0)])
        self.interp = self.pred(("$interp", 2))
        self.lib_sites = 0
        if library:
            from .library import load_library
            load_library(self)
        # errors are reported at the innermost user call site, not inside the library
        self.lib_sites = len(self.callsites.entries)

    def _stub(self, ops):
        c = Code(ops)
        c.clause = None
        c.ywrite = {}
        c.x0 = 0
        c.sym = None
        c.pred = None
        return c

    # -- predicates -----------------------------------------------------------

    def pred(self, key) -> Pred:
        p = self.preds.get(key)
        if p is None:
            p = self.preds[key] = Pred(*key)
        return p

    def add_clause_code(self, cc, file=None):
        """Install one compiled clause into its (static) predicate."""
        code = list(cc.code)
        if self.merge:
            code = merge_pass(code)
        cc.code = code
        p = self.pred(cc.key)
        if p.dynamic is not None or p.builtin is not None:
            raise PrologThrow(Struct("permission_error", ("modify", "static_procedure",
                                                          Struct("/", cc.key))))
        if p.file == "$library" and file != "$library":
            # a user definition replaces the library one
            p.clauses, p.index, p.var_clauses, p.file = [], {}, [], None
        cl = p.add_clause(cc, patch=self.patch)
        if self.profile and file != "$library":
            cl.code, cl.entry_counter, cl.exit_counter = instrument(cl.code, cc.head_end,
                                                                  self.counter_src)
            while len(self.counters) < self.counter_src.next_id:
                self.counters.append(0)
            cl.analyse(p.arity)
        if p.file is None:
            p.file = file
        return cl

    # -- linking --------------------------------------------------------------

    def link(self, cl) -> Code:
        code = Code(self.link_ins(ins) for ins in cl.code)
        code.clause = cl
        code.sym = cl.code
        code.pred = None
        yw = {}
        for pc, ins in enumerate(cl.code):
            op = ins[0]
            if op in ("get_variable", "put_variable", "unify_variable", "store_y_variable",
                      "get_level"):
                r = ins[1]
                if r[0] == "y" and r[1] not in yw:
                    yw[r[1]] = pc + 1
        code.ywrite = yw
        # x registers that may be live at each cut: a cut can service a
        # pending wakeup, which must save them
        live = set(range(cl.cc.key[1]))
        for pc, ins in enumerate(cl.code):
            op = ins[0]
            if op == "call":
                live = set()
            elif op == "cut":
                code[pc] = code[pc] + (tuple(sorted(live)),)
            else:
                live.update(o[1] for o in ins[1:] if is_reg(o) and o[0] == "x")
        first = cl.code[0][0] if cl.code else None
        if first in ("get_structure_x0", "get_list_x0"):
            code.x0 = 2
        elif first in X0_FORMS:
            code.x0 = 1
        else:
            code.x0 = 0
        cl.linked = code
        return code

    def link_ins(self, ins):
        op = ins[0]
        a = ins[1:]
        h = self._handlers.get(op)
        if h is not None:
            return h(self, a)
        raise ValueError(f"cannot link instruction {ins!r}")

    # -- registers and helpers --------------------------------------------------

    def deref(self, c):
        heap = self.heap
        while c & 3 == 0:
            v = heap[c >> 2]
            if v == c:
                return c
            c = v
        return c

    def unify(self, a, b) -> bool:
        return unify(self.store, a, b)

    def push_cp(self, kind, arity, alt, B0):
        self.serial += 1
        cp = Choicepoint(kind, len(self.heap), len(self.trail), self.E, self.cpc, self.cpp,
                         self.x[:arity], B0, alt, self.serial)
        self.cps.append(cp)
        self.store.HB = cp.H
        return cp

    def pop_cp(self):
        cps = self.cps
        cps.pop()
        self.store.HB = cps[-1].H if cps else 0

    def min_dyn_stamp(self):
        m = INF
        for cp in self.cps:
            s = cp.stamp
            if s is not None and s < m:
                m = s
        return m

    # -- control ---------------------------------------------------------------

    def enter(self, pred, site=None):
        if site is not None and site >= self.lib_sites:
            self.last_site = site
        self.else_alt = None
        self.ncalls += 1
        if pred.clauses:
            x = self.x
            if pred.arity:
                c = x[0]
                heap = self.heap
                while c & 3 == 0:
                    v = heap[c >> 2]
                    if v == c:
                        break
                    c = v
                t = c & 3
                if t == 0:
                    cands = pred.clauses
                    skip = False
                else:
                    if t == 3:
                        key = c
                    elif t == 2:
                        key = LIST_KEY
                    else:
                        w = heap[c >> 2]
                        key = (FLOAT_BASE + (heap[(c >> 2) + 1] >> 3) if w == FLOAT_HDR
                               else STRUCT_BASE + (w >> 3))
                    cands = pred.candidates(key)
                    skip = True
            else:
                cands = pred.clauses
                skip = False
            if not cands:
                return self.fail()
            return self.enter_cands(pred, cands, 0, skip, len(self.cps))
        b = pred.builtin
        if b is not None:
            kind, fn = b
            if kind == 0:
                try:
                    ok = fn(self, self.x)
                except arith.ArithError as e:
                    raise PrologThrow(e.formal, pred) from None
                except PrologThrow as e:
                    if e.culprit is None:
                        e.culprit = pred
                    raise
                if ok:
                    self.code = self.cpc
                    self.p = self.cpp
                    return
                return self.fail()
            try:
                return fn(self, self.x)
            except PrologThrow as e:
                if e.culprit is None:
                    e.culprit = pred
                raise
        if pred.dynamic is not None:
            return self.dyn_call(pred)
        if self.flags["unknown"] == "fail" or pred.defined:
            return self.fail()
        raise PrologThrow(Struct("existence_error", ("procedure", Struct("/", pred.key))), pred)

    def enter_cands(self, pred, cands, i, skip, B0):
        cl = cands[i]
        if i + 1 < len(cands):
            if self.use_else and cl.guard and (skip or not cl.needs_skip):
                self.else_alt = (pred, cands, i + 1, skip, B0, self.E, self.cpc, self.cpp,
                                 len(self.heap))
                self.n_else += 1
            else:
                self.push_cp(CLAUSES, pred.arity, (pred, cands, i + 1, skip), B0)
                self.n_try += 1
        self.B0 = B0
        code = cl.linked or self.link(cl)
        self.code = code
        if skip and code.x0:
            if code.x0 == 2:
                c = self.deref(self.x[0])
                self.S = (c >> 2) + (c & 1)
                self.write = False
            self.p = 1
        else:
            self.p = 0

    def fail(self):
        ea = self.else_alt
        if ea is not None:
            self.else_alt = None
            pred, cands, i, skip, B0, E, cpc, cpp, H = ea
            del self.heap[H:]
            self.E = E
            self.cpc = cpc
            self.cpp = cpp
            return self.enter_cands(pred, cands, i, skip, B0)
        if self.pending_wake:
            self.pending_wake = []
            self.event_flag &= ~WAKEUP
        cps = self.cps
        store = self.store
        heap = self.heap
        x = self.x
        while True:
            cp = cps[-1]
            if len(self.trail) > cp.TR:
                found = store.undo_trail(cp.TR)
                if found:
                    self.schedule_cleanups(found)
            del heap[cp.H:]
            k = cp.kind
            if k == CLAUSES:
                pred, cands, i, skip = cp.alt
                args = cp.args
                x[:len(args)] = args
                self.E = cp.E
                self.cpc = cp.cpc
                self.cpp = cp.cpp
                B0 = cp.B0
                if i + 1 >= len(cands):
                    cps.pop()
                    store.HB = cps[-1].H if cps else 0
                else:
                    cl = cands[i]
                    if self.use_else and cl.guard and (skip or not cl.needs_skip):
                        # the rest can go through else branches
                        cps.pop()
                        store.HB = cps[-1].H if cps else 0
                        self.n_else += 1
                        self.else_alt = (pred, cands, i + 1, skip, B0, self.E, self.cpc,
                                         self.cpp, len(heap))
                    else:
                        cp.alt = (pred, cands, i + 1, skip)
                cl = cands[i]
                self.B0 = B0
                code = cl.linked or self.link(cl)
                self.code = code
                if skip and code.x0:
                    if code.x0 == 2:
                        c = self.deref(x[0])
                        self.S = (c >> 2) + (c & 1)
                        self.write = False
                    self.p = 1
                else:
                    self.p = 0
                return
            if k == DYN:
                args = cp.args
                x[:len(args)] = args
                self.E = cp.E
                self.cpc = cp.cpc
                self.cpp = cp.cpp
                dp, c, cur, t = cp.alt
                nxt, cur2 = DynPred.advance(cur, t)
                if nxt is None:
                    self.pop_cp()
                else:
                    cp.alt = (dp, nxt, cur2, t)
                return self.dyn_enter(dp, c, cp.B0)
            if k == RETRY:
                args = cp.args
                x[:len(args)] = args
                self.E = cp.E
                self.cpc = cp.cpc
                self.cpp = cp.cpp
                self.B0 = cp.B0
                if cp.alt(self, cp):
                    self.code = self.cpc
                    self.p = self.cpp
                    return
                continue
            if k == BARRIER:
                raise _Stop(False)
            cps.pop()
            store.HB = cps[-1].H if cps else 0
            if k == REACTIVATE:
                cp.data.active = True
            elif k == UNEXIT:
                cp.data.exited = False

    def schedule_cleanups(self, found):
        for e in found:
            if not e.done:
                e.done = True
                self.pending_cleanups.append(copy_out(self.store, e.goal))
                self.event_flag |= CLEANUP

    def cut_to(self, level):
        cps = self.cps
        if len(cps) > level:
            del cps[level:]
            if cps:
                top = cps[-1]
                self.store.HB = top.H
                if top.c:
                    self.cleanup_scan = True
                    self.event_flag |= CLEANUP
            else:
                self.store.HB = 0

    # -- dynamic predicates ------------------------------------------------------

    def dyn_call(self, pred):
        dp = pred.dynamic
        t = self.dyn.tick()
        key = self.arg_key(self.x[0]) if pred.arity else None
        c1, cur = DynPred.advance(dp.start(key), t)
        if c1 is None:
            return self.fail()
        c2, cur2 = DynPred.advance(cur, t)
        B0 = len(self.cps)
        if c2 is not None:
            cp = self.push_cp(DYN, pred.arity, (dp, c2, cur2, t), B0)
            cp.stamp = t
        return self.dyn_enter(dp, c1, B0)

    def dyn_enter(self, dp, c, B0):
        heap = self.heap
        root = instantiate(heap, c.bp)
        i = root >> 2
        x = self.x
        n = dp.arity
        store = self.store
        for k in range(n):
            if not unify(store, x[k], heap[i + 1 + k]):
                return self.fail()
        body = self.deref(heap[i + 1 + n])
        if body == TRUE:
            self.code = self.cpc
            self.p = self.cpp
            return
        x[0] = body
        x[1] = int_cell(B0)
        return self.enter(self.interp)

    def arg_key(self, c):
        """Runtime index key of a term, None for variables."""
        c = self.deref(c)
        t = c & 3
        if t == 0:
            return None
        if t == 3:
            return c
        if t == 2:
            return LIST_KEY
        w = self.heap[c >> 2]
        if w == FLOAT_HDR:
            return FLOAT_BASE + (self.heap[(c >> 2) + 1] >> 3)
        return STRUCT_BASE + (w >> 3)

    # -- events -------------------------------------------------------------------

    def post_event(self, flag):
        """Set an event bit; safe to call from a signal handler."""
        self.event_flag |= flag

    def set_timer(self, ncalls):
        """Post an interrupt after ``ncalls`` more predicate calls."""
        self.timer_at = self.ncalls + ncalls

    def _attvar_bound(self, v, value):
        self.pending_wake.append((v, value))
        self.event_flag |= WAKEUP

    def safe_point(self, arity) -> bool:
        """Service pending events; True when a handler goal took over."""
        if len(self.heap) > self.heap_soft:
            self.event_flag |= COLLECT
        if self.ncalls >= self.timer_at:
            self.timer_at = math.inf
            self.event_flag |= INTERRUPT
        f = self.event_flag
        if not f:
            return False
        if f & COLLECT:
            self.event_flag &= ~COLLECT
            from .collector import policy
            policy(self, arity)
        goals = []
        if self.event_flag & WAKEUP:
            self.event_flag &= ~WAKEUP
            g = self.wake_goal()
            if g is not None:
                goals.append(g)
        if self.event_flag & INTERRUPT:
            self.event_flag &= ~INTERRUPT
            if self.interrupt_goal is not None:
                goals.append(instantiate(self.heap, self.interrupt_goal))
            else:
                goals.append(self.store.make_struct("throw", [atom_cell("interrupt")]))
        if self.event_flag & CLEANUP:
            self.event_flag &= ~CLEANUP
            g = self.cleanup_goal()
            if g is not None:
                goals.append(g)
        if not goals:
            return False
        goal = goals[-1]
        for g in reversed(goals[:-1]):
            goal = self.store.make_struct(",", [g, goal])
        self.E = Env(self.E, self.cpc, self.cpp, self.x[:arity], self.RESUME,
                     (self.code, self.p - 1, self.B0))
        self.cpc = self.RESUME
        self.cpp = 0
        self.x[0] = goal
        self.enter(self.call1)
        return True

    def wake_goal(self):
        pend = self.pending_wake
        self.pending_wake = []
        heap = self.heap
        goals = []
        for v, val in pend:
            heap[v] = v << 2  # the binding is redone by '$attv_bind'
            goals.append(self.store.make_struct("$attv_wake", [v << 2, val]))
        if not goals:
            return None
        g = goals[-1]
        for h in reversed(goals[:-1]):
            g = self.store.make_struct(",", [h, g])
        return g

    def cleanup_goal(self):
        goals = []
        if self.cleanup_scan and self.cps:
            self.cleanup_scan = False
            top = self.cps[-1]
            seg = self.trail[top.TR:]
            remaining = False
            for e in reversed(seg):
                if type(e) is CleanupEntry and not e.done:
                    if e.exited:
                        e.done = True
                        goals.append(e.goal)
                    else:
                        remaining = True
            if not remaining:
                top.c = False
        for bp in self.pending_cleanups:
            goals.append(instantiate(self.heap, bp))
        self.pending_cleanups = []
        if not goals:
            return None
        return self.store.make_struct("$run_cleanups", [self.store.make_list(goals)])

    # -- exceptions -------------------------------------------------------------------

    def error_blueprint(self, e: PrologThrow):
        culprit = e.culprit
        if isinstance(culprit, Pred):
            pi = Struct("/", (culprit.name, culprit.arity))
        elif culprit is None:
            pi = self.culprit_from_code()
        else:
            pi = culprit
        file, line = self.callsites.lookup(self.last_site) or ("user", 0)
        if culprit is None and self.code is not None and self.code.clause is not None:
            cc = self.code.clause.cc
            file, line = cc.file, cc.line
        ctx = Struct("context", (pi, Struct("callsite", (file, line))))
        h = len(self.heap)
        c = self.store.build_term(Struct("error", (e.formal, ctx)))
        bp = copy_out(self.store, c)
        del self.heap[h:]
        return bp

    def culprit_from_code(self):
        """Goal an inline instruction belongs to, found by scanning forward."""
        code = self.code
        if code is None or code.sym is None:
            return Struct("/", ("is", 2))
        for ins in code.sym[self.p - 1:]:
            op = ins[0]
            if op.startswith("store_"):
                return Struct("/", ("is", 2))
            base = op[:-4] if op.endswith("_imm") else op
            if base in arith.COMPARE_GOALS:
                return Struct("/", (arith.COMPARE_GOALS[base], 2))
        return Struct("/", ("is", 2))

    def throw_ball(self, bp):
        """Unwind to the innermost matching catch, or raise _Uncaught."""
        store = self.store
        heap = self.heap
        cps = self.cps
        self.else_alt = None
        self.pending_wake = []
        self.event_flag &= ~WAKEUP
        while True:
            cp = cps[-1]
            found = store.undo_trail(cp.TR)
            if found:
                self.schedule_cleanups(found)
            del heap[cp.H:]
            if cp.kind == BARRIER:
                raise _Uncaught(bp)
            self.pop_cp()
            if cp.kind == REACTIVATE:
                cp.data.active = True
                continue
            if cp.kind == UNEXIT:
                cp.data.exited = False
                continue
            if cp.kind != CATCH or not cp.active:
                continue
            ball = instantiate(heap, bp)
            saved_hb = store.HB
            store.HB = 1 << 62  # trail everything so a failed match undoes cleanly
            tr = len(self.trail)
            h = len(heap)
            ok = unify(store, ball, cp.args[0])
            store.HB = saved_hb
            if not ok:
                store.undo_trail(tr)
                del heap[h:]
                continue
            env = cp.E
            self.E = env.prev
            self.cpc = env.cpc
            self.cpp = env.cpp
            goal = cp.args[1]
            if self.pending_cleanups:
                run = self.cleanup_goal()
                goal = store.make_struct(",", [run, goal])
            self.x[0] = goal
            self.enter(self.call1)
            return

    # -- the run loop ----------------------------------------------------------------

    def _drive(self, start=None):
        """Run until success (True) or failure to the barrier (False)."""
        while True:
            try:
                if start is not None:
                    s = start
                    start = None
                    s()
                while True:
                    ins = self.code[self.p]
                    self.p += 1
                    ins[0](ins)
            except _Stop as s:
                return s.result
            except PrologThrow as e:
                start = None
                bp = self.error_blueprint(e)
                start = lambda bp=bp: self.throw_ball(bp)  # noqa: E731
            except arith.ArithError as e:
                bp = self.error_blueprint(PrologThrow(e.formal))
                start = lambda bp=bp: self.throw_ball(bp)  # noqa: E731
            except _Ball as b:
                start = lambda bp=b.bp: self.throw_ball(bp)  # noqa: E731
            except RecursionError:
                bp = self.error_blueprint(PrologThrow(Struct("resource_error", ("recursion",))))
                start = lambda bp=bp: self.throw_ball(bp)  # noqa: E731

    def save_context(self, arity, pins):
        ctx = Context()
        ctx.x = self.x[:arity]
        ctx.E = self.E
        ctx.cpc = self.cpc
        ctx.cpp = self.cpp
        ctx.code = self.code
        ctx.p = self.p
        ctx.B0 = self.B0
        ctx.else_alt = self.else_alt
        ctx.S = self.S
        ctx.write = self.write
        ctx.A = self.A
        ctx.B = self.B
        ctx.last_site = self.last_site
        ctx.pins = list(pins)
        return ctx

    def restore_context(self, ctx):
        self.x[:len(ctx.x)] = ctx.x
        self.E = ctx.E
        self.cpc = ctx.cpc
        self.cpp = ctx.cpp
        self.code = ctx.code
        self.p = ctx.p
        self.B0 = ctx.B0
        self.else_alt = ctx.else_alt
        self.S = ctx.S
        self.write = ctx.write
        self.A = ctx.A
        self.B = ctx.B
        self.last_site = ctx.last_site

    def solve(self, goal: int, pins=(), arity: int = 0):
        """Generator over the solutions of the goal at cell ``goal``.

        Each solution yields the current values of ``pins`` (cells kept up
        to date across collections).  ``arity`` says how many argument
        registers of the caller are live and must survive.
        """
        ctx = self.save_context(arity, pins)
        ctx.pins.append(goal)
        self.contexts.append(ctx)
        level = len(self.cps)
        barrier = self.push_cp(BARRIER, 0, None, self.B0)
        ctx.barrier = barrier
        self.E = None
        self.cpc = self.SUCCEED
        self.cpp = 0
        self.else_alt = None
        self.x[0] = ctx.pins[-1]
        self.code = self.CALLGOAL
        self.p = 0
        start = None
        try:
            while True:
                try:
                    ok = self._drive(start)
                except _Uncaught as u:
                    self._finish(ctx, level, unwound=True)
                    ball = self.ball_term(u.bp)
                    raise PrologError(ball, u.bp) from None
                if not ok:
                    break
                inner = (self.E, self.cpc, self.cpp)
                self.restore_context(ctx)
                yield ctx.pins[:-1]
                ctx.x = self.x[:len(ctx.x)]
                self.E, self.cpc, self.cpp = inner
                start = self.fail
        finally:
            if self.contexts and self.contexts[-1] is ctx:
                self._finish(ctx, level)

    def _finish(self, ctx, level, unwound=False):
        """Close a solve: cut to the barrier, run cleanups, undo, pop."""
        cps = self.cps
        barrier = ctx.barrier
        try:
            if len(cps) > level + 1:
                del cps[level + 1:]
                self.store.HB = barrier.H
            goals = []
            for e in reversed(self.trail[barrier.TR:]):
                if type(e) is CleanupEntry and not e.done:
                    e.done = True
                    goals.append(copy_out(self.store, e.goal))
            goals = self.pending_cleanups + goals if unwound else goals + self.pending_cleanups
            self.pending_cleanups = []
            self.cleanup_scan = False
            self.event_flag &= ~(CLEANUP | WAKEUP)
            self.pending_wake = []
            if len(self.trail) > barrier.TR:
                self.store.undo_trail(barrier.TR)
            del self.heap[barrier.H:]
        finally:
            del cps[level:]
            self.store.HB = cps[-1].H if cps else 0
            self.contexts.pop()
            self.restore_context(ctx)
        if goals:
            self.run_cleanup_blueprints(goals)

    def run_cleanup_blueprints(self, bps):
        h = len(self.heap)
        gl = self.store.make_list([instantiate(self.heap, bp) for bp in bps])
        g = self.store.make_struct("$run_cleanups", [gl])
        for _ in self.solve(g):
            break
        del self.heap[h:]

    def ball_term(self, bp):
        h = len(self.heap)
        c = instantiate(self.heap, bp)
        t = self.store.to_host(c, cyclic_ok=True)
        del self.heap[h:]
        return t

    # -- host-level conveniences ---------------------------------------------------------

    def query(self, text: str, limit: int | None = None):
        """Solutions of a query as ``{name: host term}`` dicts."""
        from .reader import parse_term
        at = parse_term(text, self.ops)
        varmap: dict = {}
        h = len(self.heap)
        goal = self.store.build_term(at.term, varmap)
        names = [(name, v) for name, v in at.varnames.items() if not name.startswith("_")]
        pins = [varmap[id(v)] for _, v in names if id(v) in varmap]
        out = []
        gen = self.solve(goal, pins)
        try:
            for vals in gen:
                vm: dict = {}
                out.append({name: self.store.to_host(c, vm, cyclic_ok=True)
                            for (name, _), c in zip(names, vals)})
                if limit is not None and len(out) >= limit:
                    break
        finally:
            gen.close()
        del self.heap[h:]
        return out

    def succeeds(self, text: str) -> bool:
        return bool(self.query(text, limit=1))

    def consult_text(self, text: str, file: str = "user", errors=None):
        from .consult import consult_text
        return consult_text(self, text, file, errors)

    # -- instruction handlers ---------------------------------------------------------------
    # each receives the linked tuple ``ins``; ins[0] is the handler itself

    def op_succeed(self, ins):
        if (self.event_flag or len(self.heap) > self.heap_soft) and self.safe_point(0):
            return
        raise _Stop(True)

    def op_resume(self, ins):
        env = self.E
        y = env.y
        self.x[:len(y)] = y
        self.E = env.prev
        self.cpc = env.cpc
        self.cpp = env.cpp
        self.code, self.p, self.B0 = env.resume

    def op_call(self, ins):
        if ((self.event_flag or len(self.heap) > self.heap_soft or self.ncalls >= self.timer_at)
                and self.safe_point(ins[1].arity)):
            return
        self.cpc = self.code
        self.cpp = self.p
        self.enter(ins[1], ins[2])

    def op_execute(self, ins):
        if ((self.event_flag or len(self.heap) > self.heap_soft or self.ncalls >= self.timer_at)
                and self.safe_point(ins[1].arity)):
            return
        self.enter(ins[1], ins[2])

    def op_proceed(self, ins):
        if self.event_flag and self.safe_point(0):
            return
        self.else_alt = None
        self.code = self.cpc
        self.p = self.cpp

    def op_allocate(self, ins):
        self.E = Env(self.E, self.cpc, self.cpp, [0] * ins[1], self.code)

    def op_deallocate(self, ins):
        e = self.E
        self.cpc = e.cpc
        self.cpp = e.cpp
        self.E = e.prev

    def op_fail(self, ins):
        self.fail()

    def op_counter(self, ins):
        self.counters[ins[1]] += 1

    # cut
    def _wake_before_cut(self, live) -> bool:
        # bindings made by an if-then-else condition must be verified
        # before the commit
        n = live[-1] + 1 if live else 0
        x = self.x
        for k in range(n):
            if k not in live:
                x[k] = NIL
        return self.safe_point(n)

    def op_cut(self, ins):
        if self.event_flag & WAKEUP and self._wake_before_cut(ins[1]):
            return
        self.else_alt = None
        self.cut_to(self.B0)

    def op_cut_x(self, ins):
        if self.event_flag & WAKEUP and self._wake_before_cut(ins[2]):
            return
        self.else_alt = None
        self.cut_to(self.deref(self.x[ins[1]]) >> 3)

    def op_cut_y(self, ins):
        if self.event_flag & WAKEUP and self._wake_before_cut(ins[2]):
            return
        self.else_alt = None
        self.cut_to(self.deref(self.E.y[ins[1]]) >> 3)

    def op_get_level_x(self, ins):
        self.x[ins[1]] = (self.B0 << 3) | INT_SUB

    def op_get_level_y(self, ins):
        self.E.y[ins[1]] = (self.B0 << 3) | INT_SUB

    # get
    def op_get_x_variable(self, ins):
        self.x[ins[1]] = self.x[ins[2]]

    def op_get_y_variable(self, ins):
        self.E.y[ins[1]] = self.x[ins[2]]

    def op_get_x_value(self, ins):
        x = self.x
        a = x[ins[1]]
        b = x[ins[2]]
        if a != b and not unify(self.store, a, b):
            self.fail()

    def op_get_y_value(self, ins):
        a = self.E.y[ins[1]]
        b = self.x[ins[2]]
        if a != b and not unify(self.store, a, b):
            self.fail()

    def op_get_constant(self, ins):
        c = self.x[ins[2]]
        heap = self.heap
        while c & 3 == 0:
            v = heap[c >> 2]
            if v == c:
                self.store.bind(c >> 2, ins[1])
                return
            c = v
        if c != ins[1]:
            self.fail()

    def op_get_large(self, ins):
        c = self.deref(self.x[ins[3]])
        if c & 3 == REF:
            self.store.bind(c >> 2, self.store.make_float(ins[1]))
            return
        heap = self.heap
        if not (c & 3 == STRUCT and heap[c >> 2] == FLOAT_HDR and heap[(c >> 2) + 1] == ins[2]):
            self.fail()

    def op_get_structure(self, ins):
        c = self.x[ins[3]]
        heap = self.heap
        while c & 3 == 0:
            v = heap[c >> 2]
            if v == c:
                h = len(heap)
                heap.append(ins[1])
                heap.extend(_ZEROS[ins[2]])
                self.store.bind(c >> 2, (h << 2) | STRUCT)
                self.S = h + 1
                self.write = True
                return
            c = v
        if c & 3 == STRUCT and heap[c >> 2] == ins[1]:
            self.S = (c >> 2) + 1
            self.write = False
            return
        self.fail()

    def op_get_list(self, ins):
        c = self.x[ins[1]]
        heap = self.heap
        while c & 3 == 0:
            v = heap[c >> 2]
            if v == c:
                h = len(heap)
                heap.append(0)
                heap.append(0)
                self.store.bind(c >> 2, (h << 2) | LIST)
                self.S = h
                self.write = True
                return
            c = v
        if c & 3 == LIST:
            self.S = c >> 2
            self.write = False
            return
        self.fail()

    # put
    def op_put_x_variable(self, ins):
        heap = self.heap
        v = len(heap) << 2
        heap.append(v)
        self.x[ins[1]] = self.x[ins[2]] = v

    def op_put_y_variable(self, ins):
        heap = self.heap
        v = len(heap) << 2
        heap.append(v)
        self.E.y[ins[1]] = self.x[ins[2]] = v

    def op_put_x_value(self, ins):
        x = self.x
        x[ins[2]] = x[ins[1]]

    def op_put_y_value(self, ins):
        self.x[ins[2]] = self.E.y[ins[1]]

    def op_put_constant(self, ins):
        self.x[ins[2]] = ins[1]

    def op_put_large(self, ins):
        self.x[ins[2]] = self.store.make_float(ins[1])

    def op_put_structure(self, ins):
        heap = self.heap
        h = len(heap)
        heap.append(ins[1])
        heap.extend(_ZEROS[ins[2]])
        self.x[ins[3]] = (h << 2) | STRUCT
        self.S = h + 1
        self.write = True

    def op_put_list(self, ins):
        heap = self.heap
        h = len(heap)
        heap.append(0)
        heap.append(0)
        self.x[ins[1]] = (h << 2) | LIST
        self.S = h
        self.write = True

    # unify
    def op_unify_x_variable(self, ins):
        s = self.S
        if self.write:
            self.heap[s] = self.x[ins[1]] = s << 2
        else:
            self.x[ins[1]] = self.heap[s]
        self.S = s + 1

    def op_unify_y_variable(self, ins):
        s = self.S
        if self.write:
            self.heap[s] = self.E.y[ins[1]] = s << 2
        else:
            self.E.y[ins[1]] = self.heap[s]
        self.S = s + 1

    def op_unify_x_value(self, ins):
        s = self.S
        self.S = s + 1
        if self.write:
            self.heap[s] = self.x[ins[1]]
        elif not unify(self.store, self.heap[s], self.x[ins[1]]):
            self.fail()

    def op_unify_y_value(self, ins):
        s = self.S
        self.S = s + 1
        if self.write:
            self.heap[s] = self.E.y[ins[1]]
        elif not unify(self.store, self.heap[s], self.E.y[ins[1]]):
            self.fail()

    def op_unify_constant(self, ins):
        s = self.S
        self.S = s + 1
        heap = self.heap
        if self.write:
            heap[s] = ins[1]
            return
        c = heap[s]
        while c & 3 == 0:
            v = heap[c >> 2]
            if v == c:
                self.store.bind(c >> 2, ins[1])
                return
            c = v
        if c != ins[1]:
            self.fail()

    def op_unify_large(self, ins):
        s = self.S
        self.S = s + 1
        heap = self.heap
        if self.write:
            heap[s] = self.store.make_float(ins[1])
            return
        c = self.deref(heap[s])
        if c & 3 == REF:
            self.store.bind(c >> 2, self.store.make_float(ins[1]))
        elif not (c & 3 == STRUCT and heap[c >> 2] == FLOAT_HDR and heap[(c >> 2) + 1] == ins[2]):
            self.fail()

    def op_unify_void(self, ins):
        s = self.S
        n = ins[1]
        if self.write:
            heap = self.heap
            for k in range(s, s + n):
                heap[k] = k << 2
        self.S = s + n

    # type tests
    def op_test(self, ins):
        if not ins[1](self, self.deref(self.x[ins[2]])):
            self.fail()

    # arithmetic
    def _num(self, c):
        if c & 7 == INT_SUB:
            return c >> 3
        return arith.eval_cell(self.heap, c)

    def op_first_const(self, ins):
        self.A = ins[1]

    def op_first_x(self, ins):
        self.A = self._num(self.x[ins[1]])

    def op_first_y(self, ins):
        self.A = self._num(self.E.y[ins[1]])

    def op_later_const(self, ins):
        self.B = ins[1]

    def op_later_x(self, ins):
        self.B = self._num(self.x[ins[1]])

    def op_later_y(self, ins):
        self.B = self._num(self.E.y[ins[1]])

    def op_binop_add(self, ins):
        r = self.A + self.B
        if type(r) is int:
            if not -0x1000000000000000 <= r <= 0xFFFFFFFFFFFFFFF:
                arith.check_int(r)
            self.A = r
        else:
            self.A = arith.check_float(r)

    def op_binop_add_imm(self, ins):
        r = self.A + ins[1]
        if type(r) is int:
            if not -0x1000000000000000 <= r <= 0xFFFFFFFFFFFFFFF:
                arith.check_int(r)
            self.A = r
        else:
            self.A = arith.check_float(r)

    def op_binop_sub(self, ins):
        r = self.A - self.B
        if type(r) is int:
            if not -0x1000000000000000 <= r <= 0xFFFFFFFFFFFFFFF:
                arith.check_int(r)
            self.A = r
        else:
            self.A = arith.check_float(r)

    def op_binop_sub_imm(self, ins):
        r = self.A - ins[1]
        if type(r) is int:
            if not -0x1000000000000000 <= r <= 0xFFFFFFFFFFFFFFF:
                arith.check_int(r)
            self.A = r
        else:
            self.A = arith.check_float(r)

    def op_binop(self, ins):
        self.A = ins[1](self.A, self.B)

    def op_binop_imm(self, ins):
        self.A = ins[1](self.A, ins[2])

    def _num_cell(self, v):
        if type(v) is int:
            return int_cell(v)
        return self.store.make_float(v)

    def op_store_x_variable(self, ins):
        self.x[ins[1]] = self._num_cell(self.A)

    def op_store_y_variable(self, ins):
        self.E.y[ins[1]] = self._num_cell(self.A)

    def op_store_x_value(self, ins):
        self._store_value(self.x[ins[1]])

    def op_store_y_value(self, ins):
        self._store_value(self.E.y[ins[1]])

    def _store_value(self, c):
        c = self.deref(c)
        v = self.A
        if c & 3 == REF:
            self.store.bind(c >> 2, self._num_cell(v))
            return
        if type(v) is int:
            if c != ((v << 3) | INT_SUB):
                self.fail()
            return
        heap = self.heap
        if not (c & 3 == STRUCT and heap[c >> 2] == FLOAT_HDR
                and heap[(c >> 2) + 1] == ((float_bits(v) << 3) | INT_SUB)):
            self.fail()

    def op_store_const(self, ins):
        v = self.A
        if type(v) is not type(ins[1]) or v != ins[1]:
            self.fail()

    def op_cmp(self, ins):
        if not ins[1](self.A, self.B):
            self.fail()

    def op_cmp_imm(self, ins):
        if not ins[1](self.A, ins[2]):
            self.fail()

    _handlers: dict = {}


class _Zeros(dict):
    """n -> list of n placeholder cells, built on demand."""

    def __missing__(self, n):
        z = self[n] = [0] * n
        return z


_ZEROS = _Zeros()


# -- linker table ------------------------------------------------------------------

def _reg(r):
    return r[1]


def _mk(m, name, *ops):
    return (getattr(m, name),) + ops


def _cellk(k):
    if isinstance(k, str):
        return atom_cell(k)
    return int_cell(k)


def _fbits(f):
    return (float_bits(f) << 3) | INT_SUB


def _test_fn(kind):
    def is_var(m, c):
        return c & 3 == REF

    def is_nonvar(m, c):
        return c & 3 != REF

    def is_atom(m, c):
        return c & 7 == ATOM_SUB

    def is_integer(m, c):
        return c & 7 == INT_SUB

    def is_float(m, c):
        return c & 3 == STRUCT and m.heap[c >> 2] == FLOAT_HDR

    def is_number(m, c):
        return c & 7 == INT_SUB or (c & 3 == STRUCT and m.heap[c >> 2] == FLOAT_HDR)

    def is_atomic(m, c):
        return c & 3 == IMM or (c & 3 == STRUCT and m.heap[c >> 2] == FLOAT_HDR)

    def is_compound(m, c):
        return c & 3 == LIST or (c & 3 == STRUCT and m.heap[c >> 2] != FLOAT_HDR)

    def is_callable(m, c):
        return c & 7 == ATOM_SUB or is_compound(m, c)

    return {"var": is_var, "nonvar": is_nonvar, "atom": is_atom, "integer": is_integer,
            "float": is_float, "number": is_number, "atomic": is_atomic,
            "compound": is_compound, "callable": is_callable}[kind]


TEST_FUNS = {k: _test_fn(k) for k in ("var", "nonvar", "atom", "integer", "float", "number",
                                        "atomic", "compound", "callable")}


def _link_table():
    t = {}

    def get_var(m, a):
        r, src = a
        return _mk(m, "op_get_x_variable" if r[0] == "x" else "op_get_y_variable", r[1], src[1])

    t["get_variable"] = t["get_x_variable"] = get_var

    def get_val(m, a):
        r, src = a
        return _mk(m, "op_get_x_value" if r[0] == "x" else "op_get_y_value", r[1], src[1])

    t["get_value"] = get_val
    t["get_constant"] = lambda m, a: _mk(m, "op_get_constant", _cellk(a[0]), a[1][1])
    t["get_constant_x0"] = lambda m, a: _mk(m, "op_get_constant", _cellk(a[0]), 0)
    t["get_nil"] = lambda m, a: _mk(m, "op_get_constant", NIL, a[0][1])
    t["get_nil_x0"] = lambda m, a: _mk(m, "op_get_constant", NIL, 0)
    t["get_large"] = lambda m, a: _mk(m, "op_get_large", a[0], _fbits(a[0]), a[1][1])
    t["get_large_x0"] = lambda m, a: _mk(m, "op_get_large", a[0], _fbits(a[0]), 0)
    t["get_structure"] = lambda m, a: _mk(m, "op_get_structure", functor_word(*a[0]), a[0][1],
                                          a[1][1])
    t["get_structure_x0"] = lambda m, a: _mk(m, "op_get_structure", functor_word(*a[0]),
                                             a[0][1], 0)
    t["get_list"] = lambda m, a: _mk(m, "op_get_list", a[0][1])
    t["get_list_x0"] = lambda m, a: _mk(m, "op_get_list", 0)

    def put_var(m, a):
        r, dst = a
        return _mk(m, "op_put_x_variable" if r[0] == "x" else "op_put_y_variable", r[1], dst[1])

    t["put_variable"] = put_var

    def put_val(m, a):
        r, dst = a
        return _mk(m, "op_put_x_value" if r[0] == "x" else "op_put_y_value", r[1], dst[1])

    t["put_value"] = t["put_unsafe_value"] = put_val
    t["put_constant"] = lambda m, a: _mk(m, "op_put_constant", _cellk(a[0]), a[1][1])
    t["put_nil"] = lambda m, a: _mk(m, "op_put_constant", NIL, a[0][1])
    t["put_large"] = lambda m, a: _mk(m, "op_put_large", a[0], a[1][1])
    t["put_structure"] = lambda m, a: _mk(m, "op_put_structure", functor_word(*a[0]), a[0][1],
                                          a[1][1])
    t["put_list"] = lambda m, a: _mk(m, "op_put_list", a[0][1])

    t["unify_variable"] = lambda m, a: _mk(
        m, "op_unify_x_variable" if a[0][0] == "x" else "op_unify_y_variable", a[0][1])
    t["unify_value"] = lambda m, a: _mk(
        m, "op_unify_x_value" if a[0][0] == "x" else "op_unify_y_value", a[0][1])
    t["unify_constant"] = lambda m, a: _mk(m, "op_unify_constant", _cellk(a[0]))
    t["unify_large"] = lambda m, a: _mk(m, "op_unify_large", a[0], _fbits(a[0]))
    t["unify_void"] = lambda m, a: _mk(m, "op_unify_void", a[0])

    t["allocate"] = lambda m, a: _mk(m, "op_allocate", a[0])
    t["deallocate"] = lambda m, a: _mk(m, "op_deallocate")
    t["call"] = lambda m, a: _mk(m, "op_call", m.pred(a[0]), a[1])
    t["execute"] = lambda m, a: _mk(m, "op_execute", m.pred(a[0]), a[1])
    t["proceed"] = lambda m, a: _mk(m, "op_proceed")
    t["fail"] = lambda m, a: _mk(m, "op_fail")
    t["counter"] = lambda m, a: _mk(m, "op_counter", a[0])

    def cut(m, a):
        r = a[0]
        if r is None:
            return _mk(m, "op_cut")
        return _mk(m, "op_cut_x" if r[0] == "x" else "op_cut_y", r[1])

    t["cut"] = cut
    t["get_level"] = lambda m, a: _mk(
        m, "op_get_level_x" if a[0][0] == "x" else "op_get_level_y", a[0][1])
    t["test"] = lambda m, a: _mk(m, "op_test", TEST_FUNS[a[0]], a[1][1])

    for which in ("first", "later"):
        t[f"{which}_constant"] = (lambda w: lambda m, a: _mk(m, f"op_{w}_const", a[0]))(which)
        t[f"{which}_large"] = (lambda w: lambda m, a: _mk(m, f"op_{w}_const", a[0]))(which)
        t[f"{which}_x_value"] = (lambda w: lambda m, a: _mk(m, f"op_{w}_x", a[0][1]))(which)
        t[f"{which}_y_value"] = (lambda w: lambda m, a: _mk(m, f"op_{w}_y", a[0][1]))(which)
        t[f"{which}_expr"] = (lambda w: lambda m, a: _mk(m, f"op_{w}_x", a[0][1]))(which)

    fast = {"add": "op_binop_add", "subtract": "op_binop_sub"}
    for name, fn in arith.BINOP_FUNS.items():
        if name in fast:
            t[f"binop_{name}"] = (lambda h: lambda m, a: _mk(m, h))(fast[name])
            t[f"binop_{name}_imm"] = (lambda h: lambda m, a: _mk(m, h + "_imm", a[0]))(fast[name])
        else:
            t[f"binop_{name}"] = (lambda f: lambda m, a: _mk(m, "op_binop", f))(fn)
            t[f"binop_{name}_imm"] = (lambda f: lambda m, a: _mk(m, "op_binop_imm", f, a[0]))(fn)

    t["store_constant"] = lambda m, a: _mk(m, "op_store_const", a[0])
    t["store_large"] = lambda m, a: _mk(m, "op_store_const", a[0])
    t["store_x_variable"] = lambda m, a: _mk(m, "op_store_x_variable", a[0][1])
    t["store_y_variable"] = lambda m, a: _mk(m, "op_store_y_variable", a[0][1])
    t["store_x_value"] = lambda m, a: _mk(m, "op_store_x_value", a[0][1])
    t["store_y_value"] = lambda m, a: _mk(m, "op_store_y_value", a[0][1])

    for name, fn in arith.COMPARE_FUNS.items():
        t[name] = (lambda f: lambda m, a: _mk(m, "op_cmp", f))(fn)
        t[name + "_imm"] = (lambda f: lambda m, a: _mk(m, "op_cmp_imm", f, a[0]))(fn)
    return t


Machine._handlers = _link_table()
