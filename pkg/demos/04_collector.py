"""Run a garbage-heavy loop on a small heap and watch the collector."""

from wamlet import collector
from wamlet.machine import Machine
from wamlet.syntax import Struct
from wamlet.termops import compare_terms

m = Machine(heap_cells=4096, heap_margin=256)
m.consult_text("""
churn(0) :- !.
churn(N) :- length(L, 40), msort(L, _), N1 is N - 1, churn(N1).
""")
m.query("churn(2000)")
print(m.gc_stats)

# variables keep their relative order across a collection
vs = []
for k in range(5):
    m.store.build_term(Struct("junk", (k, k + 1)), {})
    vs.append(m.store.new_var())
before = [compare_terms(m.store, a, b) for a in vs for b in vs]
print(collector.collect(m, 0, vs))
after = [compare_terms(m.store, a, b) for a in vs for b in vs]
print("order kept:", before == after)
