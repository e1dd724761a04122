"""Mark-and-slide heap collector.

Marking starts from the live argument registers, the initialized slots
of every reachable environment, choicepoint argument snapshots, saved
contexts of nested runs, cleanup goals on the trail and pending wakeups.
Which permanent slots are initialized is read off the clause code: a slot
counts once the instruction that first writes it lies before some
continuation address of its environment.

The sweep slides live cells down in address order, so relative order of
everything that survives (in particular of unbound variables) is kept.
"""

from __future__ import annotations

import time
from itertools import accumulate, compress

from .memory import ResourceError
from .terms import ATTV_MARK, FLOAT_HDR, FUNCTORS, CleanupEntry


def _env_continuations(m):
    """Map id(env) -> (env, max continuation pc) for every reachable env."""
    best: dict[int, list] = {}
    todo = []

    def note(env, code, pc):
        if env is None:
            return
        ent = best.get(id(env))
        if ent is None:
            ent = best[id(env)] = [env, -1]
            todo.append(env)
        if code is not None and code is env.code and pc > ent[1]:
            ent[1] = pc

    note(m.E, m.code, m.p)
    note(m.E, m.cpc, m.cpp)
    for ctx in m.contexts:
        note(ctx.E, ctx.code, ctx.p)
        note(ctx.E, ctx.cpc, ctx.cpp)
    for cp in m.cps:
        note(cp.E, cp.cpc, cp.cpp)
    ea = m.else_alt
    if ea is not None:
        note(ea[5], ea[6], ea[7])
    k = 0
    while k < len(todo):
        env = todo[k]
        k += 1
        if env.resume is not None:
            note(env.prev, env.resume[0], env.resume[1])
        note(env.prev, env.cpc, env.cpp)
    return best


def live_slots(env, pc):
    """Indices of the permanent slots of ``env`` initialized at ``pc``."""
    if env.resume is not None or env.code is None:
        return range(len(env.y))
    yw = env.code.ywrite
    return [k for k in range(len(env.y)) if yw.get(k, 1 << 60) <= pc]


def collect(m, arity: int = 0, extra=None):
    """Collect the heap; returns ``(cells_before, cells_after)``."""
    t0 = time.perf_counter()
    heap = m.heap
    n = len(heap)
    mark = bytearray(n)
    mark[0] = 1
    stack = []
    push = stack.append

    def trace():
        while stack:
            c = stack.pop()
            t = c & 3
            if t == 3:
                continue
            i = c >> 2
            if t == 0:
                if i > 0 and heap[i - 1] == ATTV_MARK:
                    if not mark[i]:
                        mark[i - 1] = mark[i] = mark[i + 1] = mark[i + 2] = 1
                        push(heap[i])
                        push(heap[i + 1])
                        push(heap[i + 2])
                elif not mark[i]:
                    mark[i] = 1
                    push(heap[i])
            elif t == 2:
                if not mark[i]:
                    mark[i] = 1
                    push(heap[i])
                if not mark[i + 1]:
                    mark[i + 1] = 1
                    push(heap[i + 1])
            else:
                if mark[i]:
                    continue
                w = heap[i]
                if w == FLOAT_HDR:
                    mark[i] = mark[i + 1] = 1
                    continue
                a = FUNCTORS.arities[w >> 3]
                for k in range(i, i + a + 1):
                    mark[k] = 1
                stack.extend(heap[i + 1:i + a + 1])

    # roots
    x = m.x
    stack.extend(x[:arity])
    envs = _env_continuations(m)
    slots = []
    for env, pc in envs.values():
        live = live_slots(env, pc)
        slots.append((env, live))
        y = env.y
        for k in live:
            push(y[k])
    for cp in m.cps:
        stack.extend(cp.args)
    for ctx in m.contexts:
        stack.extend(ctx.x)
        stack.extend(ctx.pins)
    if extra:
        stack.extend(extra)
    trail = m.trail
    for e in trail:
        if type(e) is CleanupEntry:
            push(e.goal)
    for v, val in m.pending_wake:
        push(v << 2)
        push(val)
    trace()
    # value-reset entries keep their old values alive while the target is live
    done = set()
    while True:
        more = False
        for k, e in enumerate(trail):
            if type(e) is tuple and k not in done and mark[e[0]]:
                done.add(k)
                push(e[1])
                more = True
        if not more:
            break
        trace()

    # sweep: new[k] = live cells below k
    new = [0]
    new.extend(accumulate(mark))

    def reloc(c):
        if c & 3 == 3 or c is None:
            return c
        return (new[c >> 2] << 2) | (c & 3)

    heap[:] = [c if c & 3 == 3 else (new[c >> 2] << 2) | (c & 3)
               for c in compress(heap, mark)]
    after = len(heap)

    x[:arity] = [reloc(c) for c in x[:arity]]
    for env, live in slots:
        y = env.y
        for k in live:
            y[k] = reloc(y[k])
    for cp in m.cps:
        cp.args = [reloc(c) for c in cp.args]
        cp.H = new[cp.H] if cp.H <= n else after
    for ctx in m.contexts:
        ctx.x = [reloc(c) for c in ctx.x]
        ctx.pins[:] = [reloc(c) for c in ctx.pins]
        ea = ctx.else_alt
        if ea is not None:
            ctx.else_alt = ea[:8] + (new[min(ea[8], n)],)
    if extra:
        extra[:] = [reloc(c) for c in extra]
    ea = m.else_alt
    if ea is not None:
        m.else_alt = ea[:8] + (new[min(ea[8], n)],)
    m.pending_wake = [(new[v], reloc(val)) for v, val in m.pending_wake]

    # trail: drop entries for dead cells, remap choicepoint marks
    kept = [0] * (len(trail) + 1)
    out = []
    for k, e in enumerate(trail):
        te = type(e)
        if te is int:
            if mark[e]:
                out.append(new[e])
        elif te is tuple:
            if mark[e[0]]:
                out.append((new[e[0]], reloc(e[1]), e[2]))
        else:
            e.goal = reloc(e.goal)
            out.append(e)
        kept[k + 1] = len(out)
    for cp in m.cps:
        cp.TR = kept[min(cp.TR, len(trail))]
    trail[:] = out
    m.store.HB = m.cps[-1].H if m.cps else 0
    m.cleanup_handles = {h: e for h, e in m.cleanup_handles.items() if not e.done}

    st = m.gc_stats
    st["collections"] += 1
    st["reclaimed"] += n - after
    st["time"] += time.perf_counter() - t0
    st["last"] = (n, after)
    m.gc_yield = (n - after) / n if n else 0.0
    return n, after


def _expand(m):
    from .machine import PrologThrow
    from .syntax import Struct
    cap = m.heap_cap
    while len(m.heap) > cap - m.margin:
        cap *= 2
    if cap > m.max_heap:
        raise PrologThrow(Struct("resource_error", ("memory",)))
    try:
        m.mem.reserve_stack("heap", cap * 8)
    except ResourceError:
        raise PrologThrow(Struct("resource_error", ("memory",))) from None
    m.heap_cap = cap
    m.gc_stats["expansions"] += 1


def policy(m, arity: int, extra=None) -> str:
    """Decide between collecting and expanding after a margin breach.

    Returns "collect", "expand", "both" or "none".
    """
    collected = False
    if m.gc_yield >= 0.25:
        collect(m, arity, extra)
        collected = True
    action = "collect" if collected else "none"
    if len(m.heap) > m.heap_cap - m.margin:
        try:
            _expand(m)
            action = "both" if collected else "expand"
        except Exception:
            if collected:
                raise
            collect(m, arity, extra)
            action = "collect"
            if len(m.heap) > m.heap_cap - m.margin:
                raise
    m.heap_soft = m.heap_cap - m.margin
    m.gc_stats["last_action"] = action
    return action
