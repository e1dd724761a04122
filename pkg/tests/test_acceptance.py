"""Acceptance suite: one check per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the summary
section) or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import random
import time
from pathlib import Path

import conftest
from support import SideChannel, engine_solve, keys, load

from wamlet import collector
from wamlet.attvar import ensure_attvar
from wamlet.machine import Machine
from wamlet.oracle import (
    Skip, candidate_oracle, linear_script, naive_solve, script_goal, snapshot_dyn_oracle,
    unifiable_subset,
)
from wamlet.oracle.gen import random_first_args, random_graph, random_program, random_tokens
from wamlet.oracle.rational import same_tree
from wamlet.reader import read_clauses
from wamlet.syntax import Struct, Var, variant_key
from wamlet.termops import compare_terms, unify
from wamlet.terms import ATTV_MARK, FLOAT_HDR, FUNCTORS, atom_cell, int_cell
from wamlet.toplevel import dump_code

CORPUS = Path(__file__).parent / "corpus"


def report(n: int, title: str, ok: bool, detail: str, elapsed: float, limit: float | None):
    timed_ok = limit is None or elapsed < limit
    verdict = "PASS" if ok and timed_ok else "FAIL"
    budget = f" / limit {limit:.0f} s" if limit is not None else ""
    line = f"{verdict}  {n:2d}. {title}: {detail} [{elapsed:.1f} s{budget}]"
    conftest.ACCEPTANCE.append(line)
    print(line)
    assert ok, detail
    assert timed_ok, f"took {elapsed:.1f} s, limit {limit} s"


# 1 -----------------------------------------------------------------------------------

INCMAX = """incmax/3:
    first_x_value x(0)
    binop_add_imm 1
    later_x_value x(1)
    binop_maximum
    store_x_value x(2)
    proceed
"""

LIFETIME = """lifetime_map/2:
    var x(1) else L1
    cut
    proceed
L1: get_x_variable x(2),x(1)
    put_constant 0,x(1)
    execute lifetime_map/3
"""


def test_01_listings():
    t0 = time.perf_counter()
    m = Machine()
    m.consult_text("incmax(X,Y,Z) :- Z is max(X+1,Y).\n"
                   "lifetime_map(_, Map) :- var(Map), !.\n"
                   "lifetime_map(DUs, Map) :- lifetime_map(DUs, 0, Map).\n")
    got1 = dump_code(m, "incmax/3")
    got2 = dump_code(m, "lifetime_map/2")
    ok = got1 == INCMAX and got2 == LIFETIME
    report(1, "listing reproduction", ok,
           "incmax and lifetime_map listings match" if ok else f"got:\n{got1}{got2}",
           time.perf_counter() - t0, 1.0)


# 2 -----------------------------------------------------------------------------------

def test_02_differential(target: int = 10_000):
    t0 = time.perf_counter()
    rng = random.Random(20240602)
    machines = {"merge": Machine(merge=True), "no-merge": Machine(merge=False)}
    compared = skipped = goals_run = 0
    mismatches = []
    attempt = 0
    while compared < target and attempt < 3 * target:
        attempt += 1
        clauses, goals = random_program(rng, prefix=f"q{attempt}_")
        try:
            expected = [naive_solve(clauses, g) for g in goals]
        except Skip:
            skipped += 1
            continue
        for label, m in machines.items():
            load(m, clauses)
            for g, r in zip(goals, expected):
                sols, err = engine_solve(m, g)
                goals_run += 1
                want_err = None if r.error is None else variant_key(r.error)
                got_err = None if err is None else variant_key(err)
                if keys(sols) != keys(r.solutions) or got_err != want_err:
                    mismatches.append((attempt, label, g))
        compared += 1
    ok = compared == target and not mismatches
    report(2, "differential semantics", ok,
           f"{compared} programs ({goals_run} goal runs, merge on and off), "
           f"{len(mismatches)} mismatches, {skipped} skipped by the depth/step bound",
           time.perf_counter() - t0, 300.0)


# 3 -----------------------------------------------------------------------------------

def _luv_runner():
    m = Machine()
    side = SideChannel(m)
    count = itertools.count()

    def run(tokens):
        pred = f"p{next(count)}"
        init = [Struct(pred, (100,)), Struct(pred, (101,))]
        script = linear_script(tokens, pred)
        expected = snapshot_dyn_oracle(script, init)
        m.query(f"dynamic({pred}/1), assertz({pred}(100)), assertz({pred}(101))")
        side.reset()
        sols, err = engine_solve(m, script_goal(script))
        if err is not None or len(sols) != 1:
            return False
        return [variant_key(t) for t in expected] == [variant_key(t) for t in side.log]

    return run


def exhaustive_tokens(max_len: int):
    """All scripts over {assert, retract, enumerate} up to ``max_len``.

    Asserts alternate between assertz (even positions) and asserta (odd).
    """
    for n in range(max_len + 1):
        for combo in itertools.product("xri", repeat=n):
            yield [(("z" if pos % 2 == 0 else "a"), pos) if op == "x" else (op, None)
                   for pos, op in enumerate(combo)]


def test_03_logical_update_view(n_random: int = 10_000):
    t0 = time.perf_counter()
    run = _luv_runner()
    n_ex = bad_ex = 0
    for tokens in exhaustive_tokens(8):
        n_ex += 1
        bad_ex += not run(tokens)
    rng = random.Random(7)
    bad_rand = 0
    for _ in range(n_random):
        bad_rand += not run(random_tokens(rng, rng.randint(9, 12)))
    ok = bad_ex == 0 and bad_rand == 0
    report(3, "logical update view", ok,
           f"{n_ex} exhaustive scripts (length <= 8): {bad_ex} mismatches; "
           f"{n_random} random scripts (length 9-12): {bad_rand} mismatches",
           time.perf_counter() - t0, 300.0)


# 4 -----------------------------------------------------------------------------------

def test_04_indexing(trials: int = 1000):
    t0 = time.perf_counter()
    rng = random.Random(4)
    m = Machine(profile=True)
    violations = []
    for k in range(trials):
        name = f"ix{k}"
        heads = random_first_args(rng, rng.randint(1, 8))
        clauses = [Struct(name, (h, j)) for j, h in enumerate(heads)]
        load(m, clauses)
        p = m.preds[(name, 2)]
        call_arg = random_first_args(rng, 1)[0] if rng.random() < 0.7 else rng.choice(heads)
        call = Struct(name, (call_arg, Var("J")))
        want = candidate_oracle(clauses, call)
        h = len(m.heap)
        cell = m.store.build_term(call_arg, {})
        got = sorted(cl.number for cl in p.candidates(m.arg_key(cell)))
        del m.heap[h:]
        if got != want:
            violations.append((k, "candidates", got, want))
            continue
        before = [m.counters[cl.entry_counter] for cl in p.clauses]
        tries = m.n_try
        sols, err = engine_solve(m, call)
        tries = m.n_try - tries
        entered = [j for j, cl in enumerate(p.clauses)
                   if m.counters[cl.entry_counter] != before[j]]
        if err is not None or entered != unifiable_subset(clauses, call):
            violations.append((k, "entered", entered))
        if len(want) <= 1 and tries != 0:
            violations.append((k, "choicepoints", tries))
    report(4, "first-argument indexing", not violations,
           f"{trials} predicate/call pairs, {len(violations)} violations",
           time.perf_counter() - t0, 60.0)


# 5 -----------------------------------------------------------------------------------

def _garbage(m, rng, cells):
    """Append up to ``cells`` unreachable cells; returns the unused budget."""
    heap = m.heap
    while cells >= 2:
        a = rng.randint(1, min(4, int(cells) - 1))
        m.store.make_struct(rng.choice(("f", "g", "h")),
                            [int_cell(rng.randint(0, 9)) for _ in range(a)])
        cells -= a + 1
        if cells >= 1 and rng.random() < 0.3:
            heap.append(len(heap) << 2)  # dead variable
            cells -= 1
    return cells


def _order_matrix(m, vars_):
    return [[compare_terms(m.store, a, b) for b in vars_] for a in vars_]


def test_05_variable_order(shapes: int = 100):
    t0 = time.perf_counter()
    rng = random.Random(5)
    changes = 0
    fractions = []
    for _ in range(shapes):
        m = Machine()
        frac = rng.uniform(0.2, 0.8)
        vars_ = []
        start = len(m.heap)
        # three live cells per variable (the cell and its list pair); the
        # garbage total is split into random shares between the variables
        total = 300 * frac / (1 - frac)
        weights = [rng.expovariate(1.0) for _ in range(100)]
        scale = total / sum(weights)
        owed = 0.0
        for w in weights:
            owed = _garbage(m, rng, owed + w * scale)
            vars_.append(m.store.new_var())
        lst = m.store.make_list(vars_)
        before = _order_matrix(m, vars_)
        roots = [lst]
        n0 = len(m.heap) - start
        collector.collect(m, 0, roots)
        fractions.append(1 - (len(m.heap) - start) / n0)
        after_vars = []
        c = roots[0]
        while c & 3 == 2:
            after_vars.append(m.heap[c >> 2])
            c = m.heap[(c >> 2) + 1]
        changes += before != _order_matrix(m, after_vars)
    lo, hi = min(fractions), max(fractions)
    report(5, "variable order across collection", changes == 0,
           f"{shapes} heap shapes, garbage {lo:.0%}-{hi:.0%}, {changes} order changes",
           time.perf_counter() - t0, 60.0)


# 6 -----------------------------------------------------------------------------------

def fuzz_heap(m, rng, nodes=60):
    """Random term graph with sharing, cycles, attributed variables and garbage.

    Returns the root cells.
    """
    store = m.store
    heap = m.heap
    made = []
    for _ in range(nodes):
        r = rng.random()
        pick = (lambda: rng.choice(made) if made and rng.random() < 0.7
                else rng.choice((atom_cell("a"), int_cell(rng.randint(-5, 5)))))
        if r < 0.15:
            c = store.new_var()
        elif r < 0.22:
            c = store.make_float(rng.choice((0.5, -1.25, 3.0)))
        elif r < 0.30:
            v = store.new_var()
            i = ensure_attvar(m, v)
            heap[i + 1] = store.make_list([pick()])
            c = i << 2
        elif r < 0.55:
            c = store.make_list([pick()], pick())
        else:
            c = store.make_struct(rng.choice(("f", "g")), [pick() for _ in range(rng.randint(1, 3))])
        made.append(c)
    # back and forward edges: overwrite argument slots to close cycles
    for _ in range(nodes // 4):
        c = rng.choice(made)
        if c & 3 == 1 and heap[c >> 2] != FLOAT_HDR:
            a = FUNCTORS.arities[heap[c >> 2] >> 3]
            heap[(c >> 2) + rng.randint(1, a)] = rng.choice(made)
        elif c & 3 == 2:
            heap[(c >> 2) + rng.randint(0, 1)] = rng.choice(made)
    # bind a few variables into the graph
    for c in made:
        if c & 3 == 0 and heap[(c >> 2) - 1] != ATTV_MARK and heap[c >> 2] == c \
                and rng.random() < 0.3:
            heap[c >> 2] = rng.choice(made)
    roots = rng.sample(made, max(1, nodes // 6))
    return roots


def canonical(m, roots):
    """Structure of everything reachable from ``roots``, with node identity
    replaced by discovery order.  Equal results mean isomorphic graphs."""
    heap = m.heap
    ids: dict[int, int] = {}
    out: list = []
    queue: list[int] = []

    def ref(c):
        seen: set[int] = set()
        while c & 3 == 0:
            i = c >> 2
            if i in seen:
                return ("loop",)
            seen.add(i)
            if heap[i] == c:
                break
            c = heap[i]
        t = c & 3
        if t == 3:
            return ("k", c)
        addr = c >> 2
        if t == 1 and heap[addr] == FLOAT_HDR:
            return ("flt", heap[addr + 1])
        if addr not in ids:
            ids[addr] = len(ids)
            queue.append(c)
        return ("n", ids[addr])

    root_ids = [ref(c) for c in roots]
    k = 0
    while k < len(queue):
        c = queue[k]
        k += 1
        i = c >> 2
        t = c & 3
        if t == 0:
            if heap[i - 1] == ATTV_MARK:
                out.append(("attv", ref(heap[i + 1]), ref(heap[i + 2])))
            else:
                out.append(("var",))
        elif t == 2:
            out.append(("list", ref(heap[i]), ref(heap[i + 1])))
        else:
            w = heap[i]
            a = FUNCTORS.arities[w >> 3]
            out.append(("s", w) + tuple(ref(heap[i + 1 + j]) for j in range(a)))
    return root_ids, out


def test_06_collector_soundness(heaps: int = 1000):
    t0 = time.perf_counter()
    rng = random.Random(6)
    failures = 0
    reclaimed = 0
    for _ in range(heaps):
        m = Machine()
        fuzz_heap(m, rng, rng.randint(10, 40))  # pure garbage below the live graph
        roots = fuzz_heap(m, rng, rng.randint(20, 80))
        before = canonical(m, roots)
        n, after = collector.collect(m, 0, roots)
        reclaimed += n - after
        mid = canonical(m, roots)
        n2, after2 = collector.collect(m, 0, roots)
        if mid != before or n2 != after2 or canonical(m, roots) != before:
            failures += 1
    report(6, "collector soundness", failures == 0,
           f"{heaps} fuzzed heaps, {reclaimed} cells reclaimed, "
           f"{failures} isomorphism or second-pass failures",
           time.perf_counter() - t0, 120.0)


# 7 -----------------------------------------------------------------------------------

def test_07_db_reference_safety(trials: int = 100):
    t0 = time.perf_counter()
    rng = random.Random(8)
    m = Machine()
    m.consult_text(":- dynamic r/2.\n")
    rejected = reused = wrong = 0
    for k in range(trials):
        size = rng.randint(0, 20)
        payload = "[" + ",".join(str(rng.randint(0, 9)) for _ in range(size)) + "]"
        old = m.query(f"assertz(r({k}, {payload}), R), erase(R)")[0]["R"]
        new = m.query(f"assertz(r(new{k}, {payload}), R)")[0]["R"]
        reused += old.args[0] == new.args[0]
        text = f"instance('$ref'({old.args[0]},{old.args[1]}), _)"
        try:
            m.query(text)
        except Exception as e:  # noqa: BLE001 - looking for the existence error
            if "existence_error" in str(getattr(e, "term", e)):
                rejected += 1
        got = m.query(f"instance('$ref'({new.args[0]},{new.args[1]}), C)")[0]["C"]
        if variant_key(got.args[0]) != variant_key(
                next(iter(m.query(f"X = r(new{k}, {payload})")))["X"]):
            wrong += 1
    ok = rejected == trials and wrong == 0 and reused == trials
    report(7, "db_reference safety", ok,
           f"{rejected}/{trials} stale references rejected, address reused in {reused}, "
           f"{wrong} wrong resolutions",
           time.perf_counter() - t0, None)


# 8 -----------------------------------------------------------------------------------

CLEANUP_MODES = {
    "det": ("true", "{g}"),
    "nondet+cut": ("member(_, [1,2,3])", "once({g})"),
    "fail": ("fail", "\\+ {g}"),
    "throw": ("throw(oops)", "catch({g}, oops, true)"),
}


def test_08_cleanup_exactly_once():
    t0 = time.perf_counter()
    m = Machine()
    side = SideChannel(m)
    deviations = []
    for mode, (inner, wrap) in CLEANUP_MODES.items():
        for depth in (1, 2):
            g = inner
            for level in range(depth):
                g = f"call_cleanup({g}, '$log'(c{level}))"
            side.reset()
            m.query(wrap.format(g=g) + ", '$log'(done)")
            counts = {f"c{level}": side.log.count(f"c{level}") for level in range(depth)}
            if any(v != 1 for v in counts.values()) or side.log[-1:] != ["done"]:
                deviations.append((mode, depth, side.log))
    report(8, "call_cleanup exactly once", not deviations,
           f"8 cases, {len(deviations)} deviations" + (f": {deviations}" if deviations else ""),
           time.perf_counter() - t0, None)


# 9 -----------------------------------------------------------------------------------

def test_09_mutable_trailing():
    t0 = time.perf_counter()
    m = Machine()
    probe: dict = {}

    def mark(m, x):
        probe[m.deref(x[0]) >> 3] = len(m.trail)
        return True

    m.pred(("$mark", 1)).builtin = (0, mark)
    cases = {
        # a choicepoint exists before the first update, none in between
        "no choicepoint between": (
            "create_mutable(0, M), (true ; true), '$mark'(0), update_mutable(1, M), "
            "update_mutable(2, M), '$mark'(1), !", 1),
        "choicepoint between": (
            "create_mutable(0, M), (true ; true), '$mark'(0), update_mutable(1, M), "
            "(true ; true), update_mutable(2, M), '$mark'(1), !", 2),
    }
    details = []
    ok = True
    for label, (goal, want) in cases.items():
        probe.clear()
        m.query(goal)
        got = probe[1] - probe[0]
        ok &= got == want
        details.append(f"{label}: {got} entries (want {want})")
    restore = [
        "create_mutable(0, M), ( update_mutable(1, M), update_mutable(2, M), fail "
        "; get_mutable(V, M) )",
        "create_mutable(0, M), ( update_mutable(1, M), (true ; true), update_mutable(2, M), "
        "fail ; get_mutable(V, M) )",
        "create_mutable(0, M), (true ; true), update_mutable(5, M), "
        "( update_mutable(6, M), fail ; get_mutable(V, M) ), !",
    ]
    wants = [0, 0, 5]
    got_vals = [m.query(q)[0]["V"] for q in restore]
    ok &= got_vals == wants
    details.append(f"values after backtracking {got_vals} (want {wants})")
    report(9, "mutable trailing", ok, "; ".join(details), time.perf_counter() - t0, None)


# 10 ----------------------------------------------------------------------------------

def build_graph(m, g):
    cells = {k: m.store.new_var() for k in g}
    for k, node in g.items():
        if node[0] == "$leaf":
            v = node[1]
            t = int_cell(v) if isinstance(v, int) else atom_cell(v)
        else:
            t = m.store.make_struct(node[0], [cells[j] for j in node[1]])
        assert unify(m.store, cells[k], t)
    return cells[0]


def equal_variant(rng, g):
    """Same rational tree, different graph: an unrolled copy of the root."""
    n = len(g)
    g2 = {k + 1: (node if node[0] == "$leaf" else (node[0], [j + 1 for j in node[1]]))
          for k, node in g.items()}
    root = g2[1]
    g2[0] = root if root[0] == "$leaf" else (root[0], list(root[1]))
    assert len(g2) == n + 1
    return g2


def perturbed(rng, g):
    g2 = dict(g)
    leaves = [k for k, v in g.items() if v[0] == "$leaf"]
    k = rng.choice(leaves)
    g2[k] = ("$leaf", "zz")
    return g2


def test_10_cyclic_safety(trials: int = 1000):
    t0 = time.perf_counter()
    rng = random.Random(10)
    exhausted = wrong = 0
    for _ in range(trials):
        g1 = random_graph(rng, rng.randint(3, 12), cycle_p=0.3)
        g2 = equal_variant(rng, g1) if rng.random() < 0.5 else perturbed(rng, g1)
        want = same_tree(g1, 0, g2, 0)
        m = Machine()
        a = build_graph(m, g1)
        b = build_graph(m, g2)
        try:
            cmp = compare_terms(m.store, a, b, [10**6])
            ok = unify(m.store, a, b, [10**6])
        except RuntimeError:
            exhausted += 1
            continue
        wrong += (cmp == 0) != want or ok != want
    report(10, "cyclic safety", exhausted == 0 and wrong == 0,
           f"{trials} rational-tree pairs, {exhausted} budget exhaustions, "
           f"{wrong} disagreements with bisimulation",
           time.perf_counter() - t0, None)


# 11 ----------------------------------------------------------------------------------

def test_11_profiler_counts():
    t0 = time.perf_counter()
    text = (CORPUS / "profile20.pl").read_text()
    m = Machine(profile=True)
    m.consult_text(text, "profile20.pl")
    engine_sols = len(m.query("main"))
    clauses = [a.term for a in read_clauses(text, m.ops)]
    ref = naive_solve(clauses, "main", max_depth=500, budget=10**7)
    source_keys = []
    for cl in clauses:
        h = cl.args[0] if isinstance(cl, Struct) and cl.name == ":-" else cl
        key = (h.name, len(h.args)) if isinstance(h, Struct) else (h, 0)
        if key not in source_keys:
            source_keys.append(key)
    diffs = []
    n = 0
    for key in source_keys:
        for j, cl in enumerate(m.preds[key].clauses):
            n += 1
            got = m.counters[cl.entry_counter]
            if got != ref.counts[(key, j)]:
                diffs.append((key, j, got, ref.counts[(key, j)]))
    preds = len(source_keys) - 1  # main is the driver
    ok = not diffs and engine_sols == len(ref.solutions)
    report(11, "profiler entry counts", ok,
           f"{preds} predicates + driver, {n} clauses, {len(diffs)} count differences",
           time.perf_counter() - t0, None)


# 12 ----------------------------------------------------------------------------------

HOOKS = """
dom:verify_attributes(V, Value, Goals) :-
    get_attr(V, dom, A),
    ( var(V) -> Vis = unbound ; Vis = bound ),
    '$log'(verify(A, Vis)),
    ( attvar(Value), get_attr(Value, dom, B) -> '$log'(survivor(B)) ; true ),
    Value \\== b,
    Goals = ['$log'(goal(A))].
"""

COROUTINE_CASES = [
    ("freeze(X, '$log'(g)), '$log'(before), X = 1, '$log'(after)",
     ["before", "g", "after"]),
    ("freeze(1, '$log'(g)), '$log'(after)", ["g", "after"]),
    ("freeze(X, '$log'(g1)), freeze(X, '$log'(g2)), X = a",
     ["g1", "g2"]),
    ("freeze(X, '$log'(g)), X = Y, '$log'(aliased), Y = 1",
     ["aliased", "g"]),
    ("put_attr(X, dom, d1), X = a, '$log'(ok)",
     ["verify(d1,unbound)", "goal(d1)", "ok"]),
    ("put_attr(X, dom, d1), ( X = b -> '$log'(ok) ; '$log'(failed) )",
     ["verify(d1,unbound)", "failed"]),
    ("put_attr(X, dom, d1), put_attr(Y, dom, d2), X = Y, '$log'(ok)",
     ["verify(d2,unbound)", "survivor(d1)", "goal(d2)", "ok"]),
    ("put_attr(X, dom, d1), freeze(X, '$log'(frozen)), X = a",
     ["verify(d1,unbound)", "goal(d1)", "frozen"]),
]


def test_12_coroutining():
    from wamlet.writer import term_to_text
    t0 = time.perf_counter()
    m = Machine()
    side = SideChannel(m)
    m.consult_text(HOOKS, "hooks.pl")
    bad = []
    for goal, want in COROUTINE_CASES:
        side.reset()
        m.query(goal)
        got = [term_to_text(t) for t in side.log]
        if got != want:
            bad.append((goal, got, want))
    report(12, "coroutining traces", not bad,
           f"{len(COROUTINE_CASES)} scripts, {len(bad)} trace mismatches"
           + (f": {bad}" if bad else ""),
           time.perf_counter() - t0, None)


if __name__ == "__main__":  # pragma: no cover
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
