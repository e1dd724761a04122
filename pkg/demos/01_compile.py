"""Compile a couple of clauses and look at the VM code."""

from wamlet.machine import Machine
from wamlet.writer import term_to_text


def show(rows):
    for row in rows:
        print(", ".join(f"{k} = {term_to_text(v)}" for k, v in row.items()) or "true")
    if not rows:
        print("no")
from wamlet.toplevel import dump_code

m = Machine()
m.consult_text("""
incmax(X, Y, Z) :- Z is max(X+1, Y).
lifetime_map(_, Map) :- var(Map), !.
lifetime_map(DUs, Map) :- lifetime_map(DUs, 0, Map).
""")

# arithmetic goes through the two accumulators, no term is built for X+1
print(dump_code(m, "incmax/3"))

# the var/1 test jumps straight to clause 2 when it fails
print(dump_code(m, "lifetime_map/2"))

# with the merge pass off the immediate forms disappear
plain = Machine(merge=False)
plain.consult_text("incmax(X, Y, Z) :- Z is max(X+1, Y).")
print(dump_code(plain, "incmax/3"))

show(m.query("incmax(2, 2, Z)"))
