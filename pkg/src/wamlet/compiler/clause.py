"""Clause compiler: host clause terms to unmerged VM instruction lists.

Variables are classified per *chunk* (the head plus the goals up to and
including the first call, then each further call with the inline goals
before it).  A variable occurring in more than one chunk is permanent and
lives in an environment slot ``y(k)``; all others are temporaries in ``x``
registers.  Permanent variables are not pre-initialised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..syntax import NIL, Struct, Var, iter_vars
from .flatten import AnonNamer, flatten_disjunction, located_atom
from .instructions import BINOPS, COMPARISONS, FAIL, TEST_KINDS, X, X0_FORMS, Y


class CompileError(Exception):
    def __init__(self, formal, culprit, line=0):
        super().__init__(f"{formal}: {culprit!r} (line {line})")
        self.formal = formal
        self.culprit = culprit
        self.line = line


@dataclass
class ClauseCode:
    key: tuple  # predicate (name, arity)
    code: list
    index_key: object = None  # host-level first-argument key, None = variable
    nperm: int = 0
    file: str = "user"
    line: int = 0
    head_end: int = 0  # index just after the head instructions
    sites: list = field(default_factory=list)
    anon: bool = False
    source: object = None  # the host clause term


class CallSiteMap:
    """Call-site id -> (file, line).  Ids are dense and increasing."""

    def __init__(self):
        self.entries: list[tuple[str, int]] = [("user", 0)]

    def record(self, file: str, line: int) -> int:
        self.entries.append((file, line))
        return len(self.entries) - 1

    def lookup(self, site: int):
        if 0 <= site < len(self.entries):
            return self.entries[site]
        return None

    def __len__(self):
        return len(self.entries) - 1


INLINE_ARITH = set(COMPARISONS) | {"is"}


def _is(t, name, arity):
    return isinstance(t, Struct) and t.name == name and len(t.args) == arity


def is_inline(g) -> bool:
    if g in ("true", "fail", "false", "!"):
        return True
    if not isinstance(g, Struct):
        return False
    n = len(g.args)
    if n == 1 and (g.name in TEST_KINDS or g.name in ("$cut", "$get_level")):
        return True
    if n == 2 and (g.name == "=" or g.name in INLINE_ARITH):
        return True
    return False


def goal_key(g):
    """Predicate key a body goal calls, after module qualification."""
    if isinstance(g, Var):
        return ("call", 1), (g,)
    if isinstance(g, str):
        return (g, 0), ()
    if isinstance(g, Struct):
        if g.name == ":" and len(g.args) == 2 and isinstance(g.args[0], str):
            inner = g.args[1]
            if isinstance(inner, str):
                return (f"{g.args[0]}:{inner}", 0), ()
            if isinstance(inner, Struct):
                return (f"{g.args[0]}:{inner.name}", len(inner.args)), inner.args
            return ("call", 1), (g,)
        return (g.name, len(g.args)), g.args
    raise CompileError("type_error(callable)", g)


def head_key(h):
    if isinstance(h, str):
        return (h, 0), ()
    if isinstance(h, Struct):
        if h.name == ":" and len(h.args) == 2 and isinstance(h.args[0], str):
            k, args = head_key(h.args[1])
            return (f"{h.args[0]}:{k[0]}", k[1]), args
        return (h.name, len(h.args)), h.args
    raise CompileError("type_error(callable)", h)


def index_key_of(t):
    """Host-level first-argument key; None for variables."""
    if isinstance(t, Var):
        return None
    if isinstance(t, float):
        return ("F", t)
    if isinstance(t, Struct):
        return ("f", t.name, len(t.args))
    return ("c", t)


class Compiler:
    """Compiles clauses; owns the anonymous-predicate namer and site map."""

    def __init__(self, callsites: CallSiteMap | None = None):
        self.callsites = callsites if callsites is not None else CallSiteMap()
        self.namer = AnonNamer()

    def compile_clause(self, clause, file: str = "user", line: int = 0,
                       lines: dict | None = None) -> list[ClauseCode]:
        """Compile one clause; returns its code followed by anonymous clauses."""
        if _is(clause, ":-", 2):
            head, body = clause.args
        else:
            head, body = clause, "true"
        if isinstance(head, Var):
            raise CompileError("instantiation_error", head, line)
        key, _ = head_key(head)
        lines = lines if lines is not None else {}
        if isinstance(body, str):
            body = located_atom(body, lines, clause, 2)
        goals, anon = flatten_disjunction(head, body, key[0], self.namer, lines, line)
        cc = _ClauseGen(self, head, goals, file, line, lines).generate()
        cc.source = clause
        out = [cc]
        for aclause, aline in anon:
            for sub in self.compile_clause(aclause, file, aline, lines):
                sub.anon = True
                out.append(sub)
        return out


class _ClauseGen:
    def __init__(self, comp: Compiler, head, goals, file, line, lines):
        self.comp = comp
        self.head = head
        self.goals = [g if not isinstance(g, Var) else Struct("call", (g,)) for g in goals]
        self.goals = [g for g in self.goals if g != "true"]
        # a cut after the first call cuts to a level saved at clause entry
        fc = next((i for i, g in enumerate(self.goals) if not is_inline(g)), None)
        if fc is not None and "!" in self.goals[fc + 1:]:
            level = Var("$cutlevel")
            rest = [Struct("$cut", (level,)) if g == "!" else g for g in self.goals[fc + 1:]]
            self.goals = [Struct("$get_level", (level,))] + self.goals[:fc + 1] + rest
        self.file = file
        self.line = line
        self.lines = lines
        self.code: list = []
        self.sites: list = []

    # -- analysis ------------------------------------------------------------

    def classify(self):
        key, hargs = head_key(self.head)
        self.key = key
        self.hargs = hargs
        self.arity = len(hargs)
        chunk = 0
        self.chunk_of = []
        self.ncalls = 0
        for g in self.goals:
            self.chunk_of.append(chunk)
            if not is_inline(g):
                self.ncalls += 1
                chunk += 1
        occ: dict[int, set] = {}
        count: dict[int, int] = {}
        self.vars: dict[int, Var] = {}
        for v in iter_vars(self.head):
            occ.setdefault(id(v), set()).add(0)
            count[id(v)] = count.get(id(v), 0) + 1
            self.vars[id(v)] = v
        for gi, g in enumerate(self.goals):
            for v in iter_vars(g):
                occ.setdefault(id(v), set()).add(self.chunk_of[gi])
                count[id(v)] = count.get(id(v), 0) + 1
                self.vars[id(v)] = v
        self.count = count
        self.perm: dict[int, int] = {}
        order = []
        for v in list(iter_vars(self.head)) + [v for g in self.goals for v in iter_vars(g)]:
            if id(v) not in order and len(occ[id(v)]) > 1:
                order.append(id(v))
        for k, vid in enumerate(order):
            self.perm[vid] = k
        last_is_call = bool(self.goals) and not is_inline(self.goals[-1])
        self.env = bool(self.perm) or self.ncalls > 1 or (self.ncalls == 1 and not last_is_call)
        # per goal, the variables still needed from that goal onwards in its chunk
        self.last_use: dict[int, int] = {}
        for gi, g in enumerate(self.goals):
            for v in iter_vars(g):
                self.last_use[id(v)] = gi
        self.first_call = next((gi for gi, g in enumerate(self.goals) if not is_inline(g)), None)

    # -- register bookkeeping -------------------------------------------------

    def reset_x(self):
        self.reserved: set[int] = set()

    def live(self, vid, gi) -> bool:
        """Variable ``vid`` is still needed at goal ``gi`` (head: gi < 0)."""
        if gi < 0:
            return True
        lu = self.last_use.get(vid, -1)
        return lu >= gi

    def busy(self, r, gi) -> bool:
        if r in self.reserved:
            return True
        xr = X(r)
        return any(l == xr and self.live(vid, gi) for vid, l in self.loc.items())

    def occupants(self, r):
        xr = X(r)
        return [vid for vid, l in self.loc.items() if l == xr]

    def new_temp(self, gi, avoid=()) -> int:
        r = self.base
        while self.busy(r, gi) or r in avoid:
            r += 1
        self.reserved.add(r)
        return r

    def set_x(self, vid, r):
        self.loc[vid] = X(r)

    def emit(self, *ins):
        self.code.append(ins)

    # -- generation ------------------------------------------------------------

    def generate(self) -> ClauseCode:
        self.classify()
        self.loc: dict[int, tuple] = {}
        self.seen: set[int] = set()
        self.unsafe: set[int] = set()
        self.reset_x()
        self.cur_chunk = 0
        self.cur_goal = -1
        call0 = self.goals[self.first_call] if self.first_call is not None else None
        call0_arity = len(goal_key(call0)[1]) if call0 is not None else 0
        self.base = max(self.arity, call0_arity)
        self.called = False

        self.head_code()
        if self.env:
            pos = 1 if self.code and self.code[0][0] in X0_FORMS else 0
            self.code.insert(pos, ("allocate", len(self.perm)))
        self.head_end = len(self.code)

        for gi, g in enumerate(self.goals):
            self.cur_goal = gi
            if self.chunk_of[gi] != self.cur_chunk:
                self.cur_chunk = self.chunk_of[gi]
                self.reset_x()
                for vid, l in list(self.loc.items()):
                    if l[0] == "x":
                        del self.loc[vid]
                        self.seen.discard(vid)
                nxt = next((h for h in range(gi, len(self.goals)) if not is_inline(self.goals[h])), None)
                self.base = len(goal_key(self.goals[nxt])[1]) if nxt is not None else 0
            self.reserved = set()
            self.goal(gi, g)

        last_is_call = bool(self.goals) and not is_inline(self.goals[-1])
        if not last_is_call:
            if self.env:
                self.emit("deallocate")
            self.emit("proceed")
        ikey = index_key_of(self.hargs[0]) if self.hargs else None
        return ClauseCode(self.key, self.code, ikey, len(self.perm), self.file, self.line,
                          self.head_end, self.sites)

    def var_ids(self, t):
        return {id(v) for v in iter_vars(t)}

    def head_code(self):
        gi = -1
        for i, a in enumerate(self.hargs):
            if isinstance(a, Var):
                vid = id(a)
                if vid not in self.seen:
                    self.seen.add(vid)
                    if vid in self.perm:
                        self.loc[vid] = Y(self.perm[vid])
                        self.emit("get_variable", Y(self.perm[vid]), X(i))
                    else:
                        self.set_x(vid, i)
                else:
                    self.emit("get_value", self.loc[vid], X(i))
            else:
                self.get_term(a, i, gi, x0=(i == 0))
        # move head temporaries to the argument slot the first call wants them in
        if self.first_call is None:
            return
        _, cargs = goal_key(self.goals[self.first_call])
        for j, a in enumerate(cargs):
            if not isinstance(a, Var):
                continue
            vid = id(a)
            l = self.loc.get(vid)
            if l is None or l[0] != "x" or l[1] == j:
                continue
            if self.busy(j, 0) or self.wanted_elsewhere(j, cargs):
                continue
            self.emit("get_variable", X(j), l)
            self.set_x(vid, j)

    def wanted_elsewhere(self, j, cargs):
        """x(j) already holds the variable that call argument j needs."""
        a = cargs[j]
        return isinstance(a, Var) and self.loc.get(id(a)) == X(j)

    def get_term(self, t, a, gi, x0=False):
        """Head-style matching of term ``t`` against register x(a)."""
        if isinstance(t, Var):
            vid = id(t)
            if vid not in self.seen:
                self.seen.add(vid)
                if vid in self.perm:
                    self.loc[vid] = Y(self.perm[vid])
                    self.emit("get_variable", Y(self.perm[vid]), X(a))
                else:
                    self.set_x(vid, a)
            else:
                self.emit("get_value", self.loc[vid], X(a))
            return
        if isinstance(t, bool):
            raise CompileError("type_error(term)", t)
        if isinstance(t, float):
            self.emit(*(("get_large_x0", t) if x0 else ("get_large", t, X(a))))
            return
        if isinstance(t, (int, str)):
            if t == NIL:
                self.emit(*(("get_nil_x0",) if x0 else ("get_nil", X(a))))
            else:
                self.emit(*(("get_constant_x0", t) if x0 else ("get_constant", t, X(a))))
            return
        if t.name == "." and len(t.args) == 2:
            self.emit(*(("get_list_x0",) if x0 else ("get_list", X(a))))
        else:
            f = (t.name, len(t.args))
            self.emit(*(("get_structure_x0", f) if x0 else ("get_structure", f, X(a))))
        pending = self.unify_args(t.args, gi)
        for sub, r in pending:
            self.get_term(sub, r, gi)
            self.reserved.discard(r)

    def unify_args(self, args, gi, write=False):
        """unify_* sequence for compound arguments; returns nested (term, reg)."""
        pending = []
        voids = 0
        for s in args:
            if isinstance(s, Var) and self.count.get(id(s), 0) == 1:
                voids += 1
                continue
            if voids:
                self.emit("unify_void", voids)
                voids = 0
            if isinstance(s, Var):
                vid = id(s)
                if vid not in self.seen:
                    self.seen.add(vid)
                    if vid in self.perm:
                        self.loc[vid] = Y(self.perm[vid])
                        self.emit("unify_variable", Y(self.perm[vid]))
                    else:
                        r = self.new_temp(gi)
                        self.reserved.discard(r)
                        self.set_x(vid, r)
                        self.emit("unify_variable", X(r))
                else:
                    self.emit("unify_value", self.loc[vid])
            elif isinstance(s, float):
                self.emit("unify_large", s)
            elif isinstance(s, (int, str)):
                self.emit("unify_constant", s)
            else:
                if write:
                    raise AssertionError("nested terms are built before their parent")
                r = self.new_temp(gi)
                self.emit("unify_variable", X(r))
                pending.append((s, r))
        if voids:
            self.emit("unify_void", voids)
        return pending

    # -- body -----------------------------------------------------------------

    def goal_line(self, g):
        return self.lines.get(id(g), self.line)

    def goal(self, gi, g):
        if g == "!":
            if self.called:
                raise AssertionError("cut after a call needs a level variable")
            self.emit("cut", None)
            return
        if g in ("fail", "false"):
            self.emit("fail")
            return
        if g == "true":
            return
        if is_inline(g):
            name, n = g.name, len(g.args)
            if name == "$cut":
                v = g.args[0]
                self.emit("cut", self.reg_of(v, gi))
            elif name == "$get_level":
                v = g.args[0]
                if not isinstance(v, Var) or id(v) in self.seen:
                    raise CompileError("uninstantiation_error", v)
                self.emit("get_level", self.fresh_loc(v, gi))
            elif n == 1:
                r = self.to_xreg(g.args[0], gi)
                self.emit("test", name, X(r), FAIL)
            elif name == "=":
                self.unify_goal(g.args[0], g.args[1], gi)
            elif name == "is":
                self.arith(g.args[1], gi)
                self.store(g.args[0], gi)
            else:
                self.compare(COMPARISONS[name], g.args[0], g.args[1], gi)
            return
        self.call_goal(gi, g)

    def fresh_loc(self, v, gi):
        vid = id(v)
        self.seen.add(vid)
        if vid in self.perm:
            self.loc[vid] = Y(self.perm[vid])
            return self.loc[vid]
        r = self.new_temp(gi)
        self.reserved.discard(r)
        self.set_x(vid, r)
        return X(r)

    def reg_of(self, v, gi):
        if isinstance(v, Var) and id(v) in self.seen:
            return self.loc[id(v)]
        return X(self.to_xreg(v, gi))

    def to_xreg(self, t, gi) -> int:
        """Make sure ``t`` sits in some x register; returns its number."""
        if isinstance(t, Var) and id(t) in self.seen:
            l = self.loc[id(t)]
            if l[0] == "x":
                return l[1]
        r = self.new_temp(gi)
        self.put_term(t, r, gi)
        if isinstance(t, Var) and id(t) in self.seen and self.loc[id(t)][0] == "x":
            return self.loc[id(t)][1]
        return r

    def put_term(self, t, r, gi, last_call=False):
        """Load ``t`` into x(r)."""
        if isinstance(t, Var):
            vid = id(t)
            if vid not in self.seen:
                self.seen.add(vid)
                if vid in self.perm:
                    self.loc[vid] = Y(self.perm[vid])
                    self.unsafe.add(vid)
                    self.emit("put_variable", Y(self.perm[vid]), X(r))
                else:
                    self.set_x(vid, r)
                    self.emit("put_variable", X(r), X(r))
            else:
                l = self.loc[vid]
                if l == X(r):
                    return
                if last_call and l[0] == "y" and vid in self.unsafe:
                    self.emit("put_unsafe_value", l, X(r))
                else:
                    self.emit("put_value", l, X(r))
            return
        if isinstance(t, float):
            self.emit("put_large", t, X(r))
            return
        if isinstance(t, (int, str)):
            if t == NIL:
                self.emit("put_nil", X(r))
            else:
                self.emit("put_constant", t, X(r))
            return
        # build nested compounds first, bottom-up
        inner = {}
        for k, s in enumerate(t.args):
            if isinstance(s, Struct):
                rr = self.new_temp(gi)
                self.put_term(s, rr, gi)
                inner[k] = rr
        if t.name == "." and len(t.args) == 2:
            self.emit("put_list", X(r))
        else:
            self.emit("put_structure", (t.name, len(t.args)), X(r))
        voids = 0
        for k, s in enumerate(t.args):
            if isinstance(s, Var) and self.count.get(id(s), 0) == 1:
                voids += 1
                continue
            if voids:
                self.emit("unify_void", voids)
                voids = 0
            if k in inner:
                self.emit("unify_value", X(inner[k]))
                self.reserved.discard(inner[k])
            elif isinstance(s, Var):
                vid = id(s)
                if vid not in self.seen:
                    self.seen.add(vid)
                    if vid in self.perm:
                        self.loc[vid] = Y(self.perm[vid])
                        self.emit("unify_variable", Y(self.perm[vid]))
                    else:
                        rr = self.new_temp(gi, avoid=(r,))
                        self.reserved.discard(rr)
                        self.set_x(vid, rr)
                        self.emit("unify_variable", X(rr))
                else:
                    self.emit("unify_value", self.loc[vid])
            elif isinstance(s, float):
                self.emit("unify_large", s)
            else:
                self.emit("unify_constant", s)
        if voids:
            self.emit("unify_void", voids)

    def unify_goal(self, a, b, gi):
        if not isinstance(a, Var) and isinstance(b, Var):
            a, b = b, a
        if isinstance(a, Var):
            vid = id(a)
            if vid not in self.seen:
                if isinstance(b, Var) and id(b) in self.seen:
                    # alias the fresh variable to the known one
                    self.get_term(a, self.to_xreg(b, gi), gi)
                    return
                r = self.new_temp(gi)
                self.put_term(b, r, gi)
                if isinstance(b, Var) and self.loc[id(b)][0] == "x":
                    r = self.loc[id(b)][1]
                self.get_term(a, r, gi)
                return
            r = self.to_xreg(a, gi)
            self.get_term(b, r, gi)
            return
        r = self.new_temp(gi)
        self.put_term(a, r, gi)
        self.get_term(b, r, gi)

    # -- arithmetic -------------------------------------------------------------

    def simple(self, e) -> bool:
        return isinstance(e, (int, float)) and not isinstance(e, bool) or (
            isinstance(e, Var) and id(e) in self.seen
        )

    def load(self, which, e, gi):
        """first_* / later_* for a simple operand or a generic expression."""
        if isinstance(e, bool):
            raise CompileError("type_error(evaluable)", e)
        if isinstance(e, int):
            self.emit(f"{which}_constant", e)
        elif isinstance(e, float):
            self.emit(f"{which}_large", e)
        elif isinstance(e, Var) and id(e) in self.seen:
            l = self.loc[id(e)]
            self.emit(f"{which}_{l[0]}_value", l)
        else:
            r = self.to_xreg(e, gi)
            self.emit(f"{which}_expr", X(r))
            self.reserved.discard(r)

    def arith(self, e, gi):
        """Leave the value of ``e`` in accumulator A."""
        if isinstance(e, Struct) and len(e.args) == 2 and e.name in BINOPS:
            left, right = e.args
            op = "binop_" + BINOPS[e.name]
            if self.simple(right):
                self.arith(left, gi)
                self.load("later", right, gi)
            else:
                self.arith(right, gi)
                t = self.new_temp(gi)
                self.emit("store_x_variable", X(t))
                self.arith(left, gi)
                self.emit("later_x_value", X(t))
                self.reserved.discard(t)
            self.emit(op)
            return
        self.load("first", e, gi)

    def compare(self, cmp, left, right, gi):
        if self.simple(right):
            self.arith(left, gi)
            self.load("later", right, gi)
        else:
            self.arith(right, gi)
            t = self.new_temp(gi)
            self.emit("store_x_variable", X(t))
            self.arith(left, gi)
            self.emit("later_x_value", X(t))
            self.reserved.discard(t)
        self.emit(cmp, FAIL)

    def store(self, target, gi):
        if isinstance(target, Var):
            vid = id(target)
            if vid not in self.seen:
                self.seen.add(vid)
                if vid in self.perm:
                    self.loc[vid] = Y(self.perm[vid])
                    self.emit("store_y_variable", Y(self.perm[vid]))
                else:
                    r = self.new_temp(gi)
                    self.reserved.discard(r)
                    self.set_x(vid, r)
                    self.emit("store_x_variable", X(r))
            else:
                l = self.loc[vid]
                self.emit(f"store_{l[0]}_value", l)
        elif isinstance(target, float):
            self.emit("store_large", target)
        elif isinstance(target, int) and not isinstance(target, bool):
            self.emit("store_constant", target)
        else:
            # a non-number never equals a number: compare through a temporary
            r = self.new_temp(gi)
            self.emit("store_x_variable", X(r))
            self.get_term(target, r, gi)

    # -- calls ----------------------------------------------------------------

    def call_goal(self, gi, g):
        key, args = goal_key(g)
        last = gi == len(self.goals) - 1
        m = len(args)
        inplace = set()
        for j, a in enumerate(args):
            if isinstance(a, Var) and id(a) in self.seen and self.loc[id(a)] == X(j):
                inplace.add(j)
        self.reserved |= inplace
        for j in range(m):
            if j in inplace:
                continue
            for occ in self.occupants(j):
                needed = any(occ in self.var_ids(args[k]) for k in range(j, m) if k not in inplace)
                if needed:
                    r = self.new_temp(gi, avoid=range(m))
                    self.reserved.discard(r)
                    self.emit("put_value", X(j), X(r))
                    self.set_x(occ, r)
            self.reserved.add(j)
            self.put_term(args[j], j, gi, last_call=last)
        site = self.comp.callsites.record(self.file, self.goal_line(g))
        self.sites.append(site)
        if last:
            if self.env:
                self.emit("deallocate")
            self.emit("execute", key, site)
        else:
            self.emit("call", key, site)
        self.called = True


def lines_from_spans(term, spans: dict, default: int = 0) -> dict:
    """Map ``id(subterm)`` to its source line using reader span paths."""
    out: dict = {}
    stack = [(term, ())]
    while stack:
        t, path = stack.pop()
        if isinstance(t, Struct):
            out[id(t)] = spans.get(path, default)
            for k, a in enumerate(t.args):
                stack.append((a, path + (k + 1,)))
                if isinstance(a, str):
                    # atoms are shared objects: key them by their parent slot
                    out[(id(t), k + 1)] = spans.get(path + (k + 1,), default)
    return out
