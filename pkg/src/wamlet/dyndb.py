"""Dynamic predicates under the logical update view.

Every dynamic clause carries a birth and a death stamp from one global
clock.  A call stamped ``t`` sees exactly the clauses with
``birth <= t < death``, so asserts and retracts made after the call
started never change what it enumerates.

Clauses are threaded on two doubly linked chains: the full chain and one
sub-chain, either the chain for their first-argument key or the chain of
variable-headed clauses.  Space is linear in the clause count.  A call
with a bound first argument walks its key chain and the variable chain
together, merged by clause order number.

Physical removal unlinks a clause but leaves its own ``next`` pointers
alone, so a cursor parked on (or passing through) a removed clause still
reaches every clause that was present when the cursor's call started.
"""

from __future__ import annotations

import math

INF = math.inf


class DynClause:
    __slots__ = ("pred", "order", "birth", "death", "key", "bp", "i", "j",
                 "next_all", "prev_all", "next_sub", "prev_sub", "sub", "present")

    def __init__(self, pred, order, birth, key, bp, i, j):
        self.pred = pred
        self.order = order
        self.birth = birth
        self.death = INF
        self.key = key
        self.bp = bp
        self.i = i
        self.j = j
        self.next_all = self.prev_all = None
        self.next_sub = self.prev_sub = None
        self.sub = None
        self.present = True

    def visible(self, t) -> bool:
        return self.birth <= t < self.death

    def __repr__(self):
        return f"<DynClause #{self.j} order={self.order} [{self.birth},{self.death})>"


class _Chain:
    __slots__ = ("head", "tail", "nxt", "prv")

    def __init__(self, nxt: str, prv: str):
        self.head = None
        self.tail = None
        self.nxt = nxt
        self.prv = prv

    def push_back(self, c):
        setattr(c, self.prv, self.tail)
        setattr(c, self.nxt, None)
        if self.tail is None:
            self.head = c
        else:
            setattr(self.tail, self.nxt, c)
        self.tail = c

    def push_front(self, c):
        setattr(c, self.nxt, self.head)
        setattr(c, self.prv, None)
        if self.head is None:
            self.tail = c
        else:
            setattr(self.head, self.prv, c)
        self.head = c

    def unlink(self, c):
        p = getattr(c, self.prv)
        n = getattr(c, self.nxt)
        if p is None:
            self.head = n
        else:
            setattr(p, self.nxt, n)
        if n is None:
            self.tail = p
        else:
            setattr(n, self.prv, p)
        # c keeps its own next pointer on purpose


class DynPred:
    def __init__(self, name: str, arity: int):
        self.name = name
        self.arity = arity
        self.full = _Chain("next_all", "prev_all")
        self.keyed: dict = {}
        self.var = _Chain("next_sub", "prev_sub")
        self.n_live = 0
        self.n_present = 0
        self.lo = 0
        self.hi = 0

    def start(self, key):
        """Initial cursor for a call with first-argument key ``key``."""
        if key is None or self.arity == 0:
            return ("all", self.full.head)
        ch = self.keyed.get(key)
        return ("key", ch.head if ch is not None else None, self.var.head)

    @staticmethod
    def advance(cur, t):
        """Next clause visible at ``t`` and the cursor after it."""
        if cur[0] == "all":
            c = cur[1]
            while c is not None:
                nxt = c.next_all
                if c.visible(t):
                    return c, ("all", nxt)
                c = nxt
            return None, ("all", None)
        _, a, b = cur
        while a is not None or b is not None:
            if b is None or (a is not None and a.order < b.order):
                c = a
                a = a.next_sub
            else:
                c = b
                b = b.next_sub
            if c.visible(t):
                return c, ("key", a, b)
        return None, ("key", None, None)

    def clauses(self):
        c = self.full.head
        while c is not None:
            yield c
            c = c.next_all


class DynDB:
    """Clock, clause reference table and retracted-clause registry."""

    def __init__(self, mem):
        self.mem = mem
        self.clock = 0
        self.assert_counter = 0
        self.reftable: dict[int, int] = {}  # address key i -> serial j
        self.by_addr: dict[int, DynClause] = {}
        self.registry: list[DynClause] = []
        self.n_live = 0
        self.reclaimed = 0
        self.min_stamp = lambda: INF  # installed by the machine

    def tick(self) -> int:
        self.clock += 1
        return self.clock

    def add(self, pred: DynPred, bp, key, front: bool = False) -> DynClause:
        i = self.mem.mem_alloc(max(8, 8 * len(bp)))
        self.assert_counter += 1
        j = self.assert_counter
        if front:
            pred.lo -= 1
            order = pred.lo
        else:
            pred.hi += 1
            order = pred.hi
        c = DynClause(pred, order, self.tick(), key, bp, i, j)
        if key is None or pred.arity == 0:
            sub = pred.var
        else:
            sub = pred.keyed.get(key)
            if sub is None:
                sub = pred.keyed[key] = _Chain("next_sub", "prev_sub")
        c.sub = sub
        if front:
            pred.full.push_front(c)
            sub.push_front(c)
        else:
            pred.full.push_back(c)
            sub.push_back(c)
        pred.n_live += 1
        pred.n_present += 1
        self.n_live += 1
        self.reftable[i] = j
        self.by_addr[i] = c
        return c

    def lookup(self, i: int, j: int):
        """The clause named by ``'$ref'(i, j)``, or None when stale."""
        if self.reftable.get(i) != j:
            return None
        return self.by_addr[i]

    def retract(self, c: DynClause) -> bool:
        """Kill ``c`` now; False when it was already dead."""
        if c.death != INF:
            return False
        c.death = self.tick()
        c.pred.n_live -= 1
        self.n_live -= 1
        if c.death <= self.min_stamp():
            self._reclaim(c)
        else:
            self.registry.append(c)
            if len(self.registry) > max(8, self.n_live // 4):
                self.reclaim_dead()
        return True

    def reclaim_dead(self) -> int:
        """Reclaim every registered clause no choicepoint can still see."""
        low = self.min_stamp()
        keep = []
        n = 0
        for c in self.registry:
            if c.death <= low:
                self._reclaim(c)
                n += 1
            else:
                keep.append(c)
        self.registry = keep
        return n

    def _reclaim(self, c: DynClause) -> None:
        p = c.pred
        p.full.unlink(c)
        c.sub.unlink(c)
        p.n_present -= 1
        c.present = False
        del self.reftable[c.i]
        del self.by_addr[c.i]
        self.mem.mem_free(c.i)
        self.reclaimed += 1

    def stats(self) -> dict:
        return {"clock": self.clock, "live": self.n_live, "registry": len(self.registry),
                "reclaimed": self.reclaimed, "asserted": self.assert_counter}
