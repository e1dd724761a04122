import io
import subprocess
import sys
from pathlib import Path

from wamlet.machine import Machine
from wamlet.toplevel import main, repl

CORPUS = Path(__file__).parent / "corpus"


def cli(*args, stdin=""):
    p = subprocess.run([sys.executable, "-m", "wamlet", *args], input=stdin,
                       capture_output=True, text=True, timeout=120)
    return p.returncode, p.stdout, p.stderr


def session(m, text):
    out = io.StringIO()
    code = repl(m, io.StringIO(text), out)
    return code, out.getvalue()


def test_goal_success_prints_and_exits_zero():
    code, out, _ = cli("--goal", "X is 1+2, write(X)")
    assert (code, out) == (0, "3")


def test_goal_failure_exit_one():
    assert cli("--goal", "fail")[0] == 1


def test_uncaught_exception_exit_two(tmp_path):
    f = tmp_path / "bad.pl"
    f.write_text("main :-\n    helper(1).\n")
    code, _, err = cli("--load", str(f), "--goal", "main")
    assert code == 2
    assert "existence_error(procedure,helper/1)" in err
    assert f"{f}:2" in err


def test_unknown_flag_exit_64():
    code, _, err = cli("--frobnicate")
    assert code == 64 and "usage" in err


def test_bad_dump_spec_exit_64():
    assert cli("--dump-code", "nonsense")[0] == 64


def test_halt_with_code():
    assert cli("--goal", "halt(7)")[0] == 7


def test_dump_code_notation(tmp_path):
    f = tmp_path / "inc.pl"
    f.write_text("incmax(X,Y,Z) :- Z is max(X+1,Y).\n")
    code, out, _ = cli("--load", str(f), "--dump-code", "incmax/3", "--goal", "true")
    assert code == 0
    assert out.splitlines()[:3] == ["incmax/3:", "    first_x_value x(0)", "    binop_add_imm 1"]


def test_no_merge_flag(tmp_path):
    f = tmp_path / "inc.pl"
    f.write_text("incmax(X,Y,Z) :- Z is max(X+1,Y).\n")
    _, out, _ = cli("--no-merge", "--load", str(f), "--dump-code", "incmax/3", "--goal", "true")
    assert "later_constant 1" in out


def test_profile_table():
    code, out, _ = cli("--load", str(CORPUS / "profile20.pl"), "--profile", "--goal", "main")
    assert code == 0
    lines = out.splitlines()
    head = lines.index("predicate\tclause\tentries\texits")
    rows = [l.split("\t") for l in lines[head + 1:]]
    assert any(r[0] == "queens/2" for r in rows)
    assert all(len(r) == 4 and r[2].isdigit() for r in rows)


def test_stats_and_memory_flags():
    code, out, _ = cli("--heap-margin", "512", "--bigmem-init", "65536", "--stats",
                       "--goal", "length(L, 100)")
    assert code == 0 and "heap" in out


def test_batch_output_deterministic(tmp_path):
    f = tmp_path / "p.pl"
    f.write_text("main :- member(X, [c,b,a]), write(X), nl, fail.\nmain.\n")
    a = cli("--load", str(f), "--goal", "main")
    b = cli("--load", str(f), "--goal", "main")
    assert a == b and a[1] == "c\nb\na\n"


def test_consult_reports_syntax_error_line(tmp_path):
    f = tmp_path / "s.pl"
    f.write_text("a(1).\na(2 3).\na(3).\n")
    code, out, err = cli("--load", str(f), "--goal", "findall(X, a(X), L), write(L)")
    assert code == 0 and out == "[1,3]"
    assert f"{f}:2" in err


def test_repl_bindings_and_yes():
    code, out = session(Machine(), "X = 1.\n")
    assert code == 0
    assert "X = 1\nyes" in out


def test_repl_next_solution():
    _, out = session(Machine(), "member(X, [1,2]).\n;\n")
    assert "X = 1 ? \nX = 2" in out


def test_repl_stop_after_first():
    _, out = session(Machine(), "member(X, [1,2]).\n\n")
    assert "X = 1 ? yes" in out
    assert "X = 2" not in out


def test_repl_no_and_errors():
    m = Machine()
    m.consult_text("r :-\n  nope.\n", "t.pl")
    _, out = session(m, "fail.\nr.\n")
    assert "no\n" in out
    assert "existence_error(procedure,nope/0)" in out and "t.pl:2" in out


def test_repl_halt():
    code, _ = session(Machine(), "halt(3).\n")
    assert code == 3


def test_main_in_process(capsys):
    assert main(["--goal", "write(hi)"]) == 0
    assert capsys.readouterr().out == "hi"
