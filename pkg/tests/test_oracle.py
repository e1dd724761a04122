"""The reference oracles on their own, and the cut corpus against both sides."""

import ast
import random
import subprocess
import sys
from pathlib import Path

import pytest
from support import engine_solve, keys

from wamlet.machine import Machine
from wamlet.oracle import (
    candidate_oracle, linear_script, naive_solve, snapshot_dyn_oracle, unifiable_subset,
)
from wamlet.oracle.naive import DepthExceeded, Skip
from wamlet.reader import parse_term, read_clauses
from wamlet.syntax import Struct, Var
from wamlet.writer import term_to_text

CUT = Path(__file__).parent / "corpus" / "cut"


def host(text):
    return parse_term(text).term


def test_member_textbook():
    prog = [host("mem(X, [X|_])."), host("mem(X, [_|T]) :- mem(X, T).")]
    X = Var("X")
    res = naive_solve(prog, Struct("mem", (X, host("[1,2,3]"))))
    assert [s.args[0] for s in res.solutions] == [1, 2, 3]
    assert res.error is None


def test_naive_depth_bound():
    prog = [host("loop :- loop.")]
    with pytest.raises(DepthExceeded):
        naive_solve(prog, "loop")


def test_naive_reports_errors_after_solutions():
    prog = [host("p(1)."), host("p(a).")]
    X, Y = Var(), Var()
    res = naive_solve(prog, Struct(",", (Struct("p", (X,)), Struct("is", (Y, Struct("+", (X, 1)))))))
    assert len(res.solutions) == 1
    assert res.error.name == "type_error"


def test_naive_unknown_predicate():
    res = naive_solve([host("p.")], "q")
    assert res.error == Struct("existence_error", ("procedure", Struct("/", ("q", 0))))


def test_naive_cyclic_answer_skips():
    with pytest.raises(Skip):
        X = Var()
        naive_solve([], Struct("=", (X, Struct("f", (X,)))))


def test_empty_script_empty_log():
    assert snapshot_dyn_oracle([]) == []


def test_snapshot_oracle_frozen_view():
    # d(2) is asserted inside the outer iteration: only the inner call sees it
    script = linear_script([("z", 1), ("i", None), ("z", 2), ("i", None)], "d")
    log = [(e.name, *e.args) for e in snapshot_dyn_oracle(script)]
    assert log == [("sol", 0, Struct("d", (1,))), ("sol", 1, Struct("d", (1,))),
                   ("sol", 1, Struct("d", (2,))), ("end", 1), ("end", 0)]


def test_candidates_all_variable_heads():
    clauses = [host("p(X)."), host("p(_)."), host("p(Y) :- q(Y).")]
    assert candidate_oracle(clauses, host("p(a)")) == [0, 1, 2]


def test_candidates_disjoint_constants():
    clauses = [host("p(a)."), host("p(b)."), host("p(c).")]
    for k, c in enumerate("abc"):
        assert candidate_oracle(clauses, host(f"p({c})")) == [k]
    assert candidate_oracle(clauses, host("p(d)")) == []
    assert candidate_oracle(clauses, Struct("p", (Var(),))) == [0, 1, 2]


def test_unifiable_subset_is_stricter():
    clauses = [host("p(f(a))."), host("p(f(b))."), host("p(g).")]
    call = host("p(f(a))")
    assert candidate_oracle(clauses, call) == [0, 1]
    assert unifiable_subset(clauses, call) == [0]


def test_oracles_import_nothing_from_engine():
    code = ("import sys, wamlet.oracle; "
            "bad = [m for m in sys.modules if m.startswith('wamlet.') and "
            "m.split('.')[1] not in ('oracle', 'syntax')]; print(bad)")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert ast.literal_eval(out.stdout.strip()) == []


# -- cut corpus ------------------------------------------------------------------------

def read_expected(path):
    cases = []
    for line in path.read_text().splitlines():
        if line.startswith("?- "):
            cases.append((line[3:], []))
        elif line.strip():
            cases[-1][1].append(line)
    return cases


def answer_goal(query):
    at = parse_term(query)
    names = [n for n in at.varnames if not n.startswith("_")]
    ans = Var("Ans")
    goal = Struct(",", (at.term, Struct("=", (ans, Struct("ans", tuple(at.varnames[n] for n in names))))))
    return goal, names


def render(sol, names):
    vals = sol.args[1].args[1].args
    if not names:
        return "true"
    return ", ".join(f"{n} = {term_to_text(v)}" for n, v in zip(names, vals))


CORPUS = sorted(p.stem for p in CUT.glob("*.pl"))


@pytest.mark.parametrize("name", CORPUS)
def test_cut_corpus(name):
    text = (CUT / f"{name}.pl").read_text()
    program = [at.term for at in read_clauses(text)]
    m = Machine()
    errors: list = []
    m.consult_text(text, f"{name}.pl", errors)
    assert not errors
    for query, expected in read_expected(CUT / f"{name}.expected"):
        goal, names = answer_goal(query)
        ref = naive_solve(program, goal, max_depth=50)
        assert ref.error is None
        assert [render(s, names) for s in ref.solutions] == expected, ("oracle", query)
        ours, err = engine_solve(m, goal)
        assert err is None
        assert [render(s, names) for s in ours] == expected, ("engine", query)


def test_random_programs_small_sample():
    from wamlet.oracle.gen import random_program
    rng = random.Random(11)
    compared = 0
    for n in range(150):
        clauses, goals = random_program(rng, f"s{n}_")
        m = Machine()
        from support import load
        load(m, clauses)
        for g in goals:
            try:
                ref = naive_solve(clauses, g)
            except Skip:
                continue
            ours, err = engine_solve(m, g)
            assert keys(ours) == keys(ref.solutions)
            assert (err is None) == (ref.error is None)
            compared += 1
    assert compared > 50
