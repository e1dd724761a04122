"""freeze/2 and a verify_attributes hook acting as a guard."""

from wamlet.machine import Machine
from wamlet.writer import term_to_text


def show(rows):
    for row in rows:
        print(", ".join(f"{k} = {term_to_text(v)}" for k, v in row.items()) or "true")
    if not rows:
        print("no")

m = Machine()
m.consult_text("""
not_b:verify_attributes(_, Value, []) :- Value \\== b.

demo :-
    freeze(X, (write(woke(X)), nl)),
    write(before), nl,
    X = 1,
    write(after), nl.
""")
m.query("demo")

show(m.query("put_attr(X, not_b, on), X = a"))
show(m.query("put_attr(X, not_b, on), X = b"))
show(m.query("put_attr(X, not_b, on), ( X = b -> R = bound ; R = refused )"))

# mutable terms trail their old value once per choicepoint segment
show(m.query("create_mutable(0, M), ( update_mutable(1, M), fail ; get_mutable(V, M) )"))
