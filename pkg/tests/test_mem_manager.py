import random

import pytest

from wamlet.memory import AllocatorError, MemManager, ResourceError, size_class


def test_alloc_free_alloc_reuses_block():
    mm = MemManager(bigmem_init=4096)
    a = mm.mem_alloc(64)
    mm.mem_free(a)
    assert mm.mem_alloc(64) == a


def test_oversized_request_gets_new_bigmem():
    mm = MemManager(bigmem_init=4096)
    before = mm.n_requests
    a = mm.mem_alloc(100_000)
    assert mm.n_requests == before + 1
    assert mm.owner_of(a).size >= 100_000


def _check_no_overlap(mm):
    spans = sorted((b, b + s) for b, (s, _) in mm.live.items())
    for (a0, a1), (b0, _) in zip(spans, spans[1:]):
        assert a1 <= b0
    for b, (s, owner) in mm.live.items():
        bm = mm.bigmems[owner]
        assert bm.base <= b and b + s <= bm.end


def test_random_trace_never_overlaps():
    rng = random.Random(11)
    mm = MemManager(bigmem_init=8192)
    live = []
    for _ in range(10_000):
        if live and rng.random() < 0.45:
            mm.mem_free(live.pop(rng.randrange(len(live))))
        else:
            live.append(mm.mem_alloc(rng.choice((8, 24, 100, 700, 5000))))
    _check_no_overlap(mm)
    assert mm.chain_audit()


def test_double_free_is_an_error():
    mm = MemManager()
    a = mm.mem_alloc(32)
    mm.mem_free(a)
    with pytest.raises(AllocatorError):
        mm.mem_free(a)


def test_free_is_constant_work_and_lands_on_its_chain():
    mm = MemManager()
    blocks = [mm.mem_alloc(48) for _ in range(50)]
    k = size_class(mm.mem_size(blocks[0]))
    n = len(mm.chains[k])
    ops = mm.ops
    mm.mem_free(blocks[10])
    assert mm.ops - ops == 1
    assert len(mm.chains[k]) == n + 1


def test_congeal_merges_adjacent():
    mm = MemManager(bigmem_init=1 << 16)
    mm.congeal()  # start from one extent per bigmem
    assert mm.congeal() == 0
    a, b, c = (mm.mem_alloc(64) for _ in range(3))
    d = mm.mem_alloc(64)  # keeps c's right neighbour apart from the tail
    mm.mem_free(a)
    mm.mem_free(b)
    mm.mem_free(c)
    assert mm.congeal() == 2
    assert mm.free[a][0] == 3 * 64
    mm.mem_free(d)


def test_congeal_matches_interval_union():
    rng = random.Random(5)
    mm = MemManager(bigmem_init=1 << 15)
    mm.congeal_min = 1 << 30  # only explicit congeals
    live = []
    for _ in range(3000):
        if live and rng.random() < 0.5:
            mm.mem_free(live.pop(rng.randrange(len(live))))
        else:
            live.append(mm.mem_alloc(rng.choice((16, 40, 256))))
    spans = sorted((b, b + s, o) for b, (s, o) in mm.free.items())
    union = []
    for lo, hi, o in spans:
        if union and union[-1][1] == lo and union[-1][2] == o:
            union[-1][1] = hi
        else:
            union.append([lo, hi, o])
    mm.congeal()
    got = sorted((b, b + s, o) for b, (s, o) in mm.free.items())
    assert got == [tuple(u) for u in union]
    assert mm.chain_audit()


def test_trimcore_releases_only_idle_bigmems():
    mm = MemManager(bigmem_init=4096)
    assert mm.trimcore() == 4096
    mm = MemManager(bigmem_init=4096)
    a = mm.mem_alloc(64)
    assert mm.trimcore() == 0
    mm.mem_free(a)
    big = mm.mem_alloc(50_000)
    assert mm.trimcore() == 4096  # the first bigmem is idle again
    assert mm.owner_of(big).live == 1


def test_trimcore_after_churn_matches_idle_set():
    rng = random.Random(9)
    mm = MemManager(bigmem_init=2048)
    live = [mm.mem_alloc(rng.choice((64, 900, 3000))) for _ in range(200)]
    for b in rng.sample(live, 150):
        mm.mem_free(b)
        live.remove(b)
    idle = {bm.base for bm in mm.bigmems.values() if bm.stack is None and bm.live == 0}
    expect = sum(mm.bigmems[b].size for b in idle)
    assert mm.trimcore() == expect
    assert all(bm.live > 0 or bm.stack for bm in mm.bigmems.values())


def test_each_stack_has_its_own_bigmem():
    from wamlet.machine import Machine
    m = Machine()
    stacks = m.mem.stacks
    assert {"heap", "trail"} <= set(stacks)
    assert len({bm.base for bm in stacks.values()}) == len(stacks)


def test_host_limit_is_a_resource_error():
    mm = MemManager(bigmem_init=4096, host_limit=8192)
    with pytest.raises(ResourceError):
        mm.mem_alloc(10_000)
