"""Logical update view: a running call keeps the clause list it started with."""

from wamlet.machine import Machine
from wamlet.writer import term_to_text


def show(rows):
    for row in rows:
        print(", ".join(f"{k} = {term_to_text(v)}" for k, v in row.items()) or "true")

m = Machine()
m.consult_text("""
:- dynamic(counter/1).
counter(1).
counter(2).

grow :- counter(X), Y is X + 10, assertz(counter(Y)), write(saw(X)), nl, fail.
grow.

shrink :- counter(X), ( X == 1 -> retract(counter(2)) ; true ), write(still(X)), nl, fail.
shrink.
""")

m.query("grow")
show(m.query("findall(X, counter(X), L)"))

# retracting during the loop does not hide counter(2) from it
m.query("shrink")
show(m.query("findall(X, counter(X), L)"))

# clause references survive until the clause is erased
r = m.query("assertz(counter(99), R)")[0]["R"]
print("ref", term_to_text(r))
m.query(f"erase('$ref'({r.args[0]}, {r.args[1]}))")
show(m.query("catch(instance('$ref'(%d, %d), C), E, true)" % tuple(r.args)))
print(m.dyn.stats())
