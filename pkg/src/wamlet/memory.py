"""Two-layer block allocator.

The bottom layer obtains *bigmems* from the host and gives them back.  The
top layer chops bigmems into *mems*, keeps free mems on unsorted chains
indexed by size class, and congeals address-adjacent free mems from time
to time.  Addresses are plain integers in a simulated address space; a mem
handle is its base address.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

MIN_MEM = 16
ALIGN = 8
MAX_CLASS_SIZE = 1 << 20
N_CLASSES = (MAX_CLASS_SIZE // MIN_MEM).bit_length()  # last chain = overflow


class ResourceError(Exception):
    pass


class AllocatorError(Exception):
    """Internal misuse: double free or foreign handle."""


@dataclass
class Bigmem:
    base: int
    size: int
    live: int = 0
    stack: str | None = None

    @property
    def end(self):
        return self.base + self.size


def size_class(size: int) -> int:
    if size >= MAX_CLASS_SIZE:
        return N_CLASSES - 1
    return max(0, size.bit_length() - MIN_MEM.bit_length())


class MemManager:
    def __init__(self, bigmem_init: int | None = None, growth: float | None = None,
                 host_limit: int | None = None):
        if bigmem_init is None:
            bigmem_init = int(os.environ.get("WAMLET_BIGMEM_INIT", 1 << 20))
        if growth is None:
            growth = float(os.environ.get("WAMLET_BIGMEM_GROWTH", 2.0))
        self.bigmem_init = max(MIN_MEM, _round(bigmem_init))
        self.growth = growth
        self.host_limit = host_limit
        self.host_next = 1 << 16
        self.host_bytes = 0
        self.bigmems: dict[int, Bigmem] = {}
        self.chains: list[list[int]] = [[] for _ in range(N_CLASSES)]
        self.free: dict[int, tuple[int, int]] = {}  # base -> (size, bigmem base)
        self.live: dict[int, tuple[int, int]] = {}
        self.stacks: dict[str, Bigmem] = {}
        self.ops = 0  # work counter for complexity assertions
        self.n_requests = 0
        self.free_at_congeal = 0
        self.congeal_min = 64
        self._new_bigmem(self.bigmem_init)

    # -- bottom layer --------------------------------------------------------

    def _host_alloc(self, size: int) -> int:
        if self.host_limit is not None and self.host_bytes + size > self.host_limit:
            raise ResourceError("memory")
        base = self.host_next
        self.host_next += size + 4096  # leave a gap so bigmems never touch
        self.host_bytes += size
        return base

    def _new_bigmem(self, size: int, stack: str | None = None) -> Bigmem:
        base = self._host_alloc(size)
        bm = Bigmem(base, size, stack=stack)
        self.bigmems[base] = bm
        self.n_requests += 1
        if stack is None:
            self._push_free(base, size, base)
        return bm

    def _release(self, bm: Bigmem) -> None:
        del self.bigmems[bm.base]
        self.host_bytes -= bm.size

    # -- stacks --------------------------------------------------------------

    def reserve_stack(self, name: str, size: int) -> Bigmem:
        old = self.stacks.get(name)
        bm = self._new_bigmem(_round(size), stack=name)
        self.stacks[name] = bm
        if old is not None:
            self._release(old)
        return bm

    # -- top layer -----------------------------------------------------------

    def _push_free(self, base: int, size: int, owner: int) -> None:
        self.free[base] = (size, owner)
        self.chains[size_class(size)].append(base)

    def mem_alloc(self, nbytes: int) -> int:
        if nbytes <= 0:
            raise ValueError("allocation size must be positive")
        size = max(MIN_MEM, _round(nbytes))
        if len(self.free) >= max(self.congeal_min, 2 * self.free_at_congeal):
            self.congeal()
        k = size_class(size)
        base = self._take(k, size, first_fit=True)
        if base is None:
            for j in range(k + 1, N_CLASSES):
                base = self._take(j, size, first_fit=(j == N_CLASSES - 1))
                if base is not None:
                    break
        if base is None:
            want = int(self.bigmem_init * self.growth ** max(0, len(self.bigmems) - len(self.stacks) - 1))
            self._new_bigmem(max(want, size))
            base = self._take(size_class(max(want, size)), size, first_fit=True)
            assert base is not None
        msize, owner = self.free.pop(base)
        if msize - size >= MIN_MEM:
            self._push_free(base + size, msize - size, owner)
        else:
            size = msize
        self.live[base] = (size, owner)
        self.bigmems[owner].live += 1
        return base

    def _take(self, k: int, size: int, first_fit: bool) -> int | None:
        chain = self.chains[k]
        free = self.free
        for pos in range(len(chain) - 1, -1, -1):
            self.ops += 1
            base = chain[pos]
            if not first_fit or free[base][0] >= size:
                chain.pop(pos)
                return base
        return None

    def mem_free(self, base: int) -> None:
        entry = self.live.pop(base, None)
        if entry is None:
            raise AllocatorError(f"free of unallocated mem {base:#x}")
        size, owner = entry
        self.bigmems[owner].live -= 1
        self._push_free(base, size, owner)
        self.ops += 1

    def mem_size(self, base: int) -> int:
        return self.live[base][0]

    def congeal(self) -> int:
        """Merge all address-adjacent free mems; returns the merge count."""
        items = sorted(self.free.items())
        merged = 0
        out: list[tuple[int, int, int]] = []
        for base, (size, owner) in items:
            if out and out[-1][2] == owner and out[-1][0] + out[-1][1] == base:
                b, s, o = out[-1]
                out[-1] = (b, s + size, o)
                merged += 1
            else:
                out.append((base, size, owner))
        self.free = {}
        self.chains = [[] for _ in range(N_CLASSES)]
        for base, size, owner in out:
            self._push_free(base, size, owner)
        self.free_at_congeal = len(self.free)
        self.ops += len(items)
        return merged

    def trimcore(self) -> int:
        """Return every bigmem without live mems to the host."""
        idle = [bm for bm in self.bigmems.values() if bm.stack is None and bm.live == 0]
        if not idle:
            return 0
        idle_bases = {bm.base for bm in idle}
        self.free = {b: v for b, v in self.free.items() if v[1] not in idle_bases}
        self.chains = [[b for b in ch if b in self.free] for ch in self.chains]
        released = 0
        for bm in idle:
            released += bm.size
            self._release(bm)
        return released

    # -- introspection -------------------------------------------------------

    def owner_of(self, base: int) -> Bigmem:
        entry = self.live.get(base) or self.free.get(base)
        return self.bigmems[entry[1]]

    def chain_audit(self) -> bool:
        """Every free mem sits on exactly one chain, the one for its size."""
        seen = {}
        for k, chain in enumerate(self.chains):
            for base in chain:
                if base in seen or base not in self.free:
                    return False
                if size_class(self.free[base][0]) != k:
                    return False
                seen[base] = k
        return len(seen) == len(self.free)

    def stats(self) -> dict:
        return {
            "bigmems": len(self.bigmems),
            "host_bytes": self.host_bytes,
            "live_mems": len(self.live),
            "free_mems": len(self.free),
        }


def _round(n: int) -> int:
    return (n + ALIGN - 1) // ALIGN * ALIGN
