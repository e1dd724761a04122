"""First-argument indexing and else branches, counted."""

from wamlet.machine import Machine
from wamlet.writer import term_to_text


def show(rows):
    for row in rows:
        print(", ".join(f"{k} = {term_to_text(v)}" for k, v in row.items()) or "true")
    if not rows:
        print("no")

m = Machine()
m.consult_text("""
colour(red, warm).
colour(blue, cold).
colour(green, cold).
colour(X, unknown) :- atom(X).

classify(X, C) :- integer(X), !, C = number.
classify(_, other).
""")

before = m.n_try
show(m.query("colour(blue, T)"))
print("choicepoints for colour(blue, T):", m.n_try - before)

before = m.n_try
show(m.query("colour(C, cold)"))
print("choicepoints for colour(C, cold):", m.n_try - before)

# the integer/1 test fails over to clause 2 without a choicepoint
before = m.n_try
show(m.query("classify(foo, C)"))
print("choicepoints:", m.n_try - before)

p = m.preds[("colour", 2)]
for key, bucket in p.index.items():
    print(key, [c.number for c in bucket])
