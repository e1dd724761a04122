"""Tokenizer and operator-precedence reader.

Every subterm of a read clause is annotated with the line on which it
occurs.  Annotations are keyed by argument path: ``()`` is the root,
``(2, 1)`` is the first argument of the second argument, and so on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import NIL, Struct, Var, mklist


class PrologSyntaxError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.message = message
        self.line = line


@dataclass(slots=True)
class Token:
    kind: str  # atom var int float string bq punct end error
    text: str
    line: int
    layout: bool = False  # layout text immediately precedes the token
    value: object = None


SYMBOL_CHARS = set("+-*/\\^<>=~:.?@#&$")
SOLO = set("!;")
PUNCT = set("()[]{},|")
ALNUM = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


def _is_lower(c):
    return "a" <= c <= "z"


def _is_var_start(c):
    return c == "_" or "A" <= c <= "Z"


def _is_digit(c):
    return "0" <= c <= "9"


class _Lexer:
    def __init__(self, text: str):
        self.s = text
        self.i = 0
        self.line = 1

    def peekc(self, k=0):
        j = self.i + k
        return self.s[j] if j < len(self.s) else ""

    def skip_layout(self) -> bool:
        start = self.i
        s = self.s
        while self.i < len(s):
            c = s[self.i]
            if c == "\n":
                self.line += 1
                self.i += 1
            elif c.isspace():
                self.i += 1
            elif c == "%":
                while self.i < len(s) and s[self.i] != "\n":
                    self.i += 1
            elif c == "/" and self.peekc(1) == "*":
                end = s.find("*/", self.i + 2)
                if end < 0:
                    raise PrologSyntaxError("unterminated block comment", self.line)
                self.line += s.count("\n", self.i, end)
                self.i = end + 2
            else:
                break
        return self.i > start

    def tokens(self):
        s = self.s
        while True:
            try:
                layout = self.skip_layout()
            except PrologSyntaxError as e:
                yield Token("error", e.message, e.line)
                return
            if self.i >= len(s):
                yield Token("eof", "", self.line, layout)
                return
            line = self.line
            try:
                tok = self.next_token(line, layout)
            except PrologSyntaxError as e:
                yield Token("error", e.message, e.line)
                # resynchronise at the next line
                while self.i < len(s) and s[self.i] != "\n":
                    self.i += 1
                continue
            yield tok

    def next_token(self, line, layout):
        s = self.s
        c = s[self.i]
        if _is_digit(c):
            return self.number(line, layout)
        if _is_var_start(c):
            j = self.i
            while self.i < len(s) and s[self.i] in ALNUM:
                self.i += 1
            return Token("var", s[j:self.i], line, layout)
        if _is_lower(c):
            j = self.i
            while self.i < len(s) and s[self.i] in ALNUM:
                self.i += 1
            return Token("atom", s[j:self.i], line, layout)
        if c == "'":
            return Token("qatom", self.quoted("'"), line, layout)
        if c == '"':
            return Token("string", self.quoted('"'), line, layout)
        if c == "`":
            return Token("bq", self.quoted("`"), line, layout)
        if c in PUNCT:
            self.i += 1
            return Token("punct", c, line, layout)
        if c in SOLO:
            self.i += 1
            return Token("atom", c, line, layout)
        if c in SYMBOL_CHARS:
            if c == "." and (self.peekc(1) == "" or self.peekc(1).isspace() or self.peekc(1) == "%"):
                self.i += 1
                return Token("end", ".", line, layout)
            j = self.i
            while self.i < len(s) and s[self.i] in SYMBOL_CHARS:
                self.i += 1
            return Token("atom", s[j:self.i], line, layout)
        raise PrologSyntaxError(f"illegal character {c!r}", line)

    def number(self, line, layout):
        s = self.s
        j = self.i
        if s[j] == "0" and self.peekc(1) == "'":
            self.i += 2
            ch = self.peekc()
            if ch == "\\":
                code = self.escape("'")
                return Token("int", s[j:self.i], line, layout, code)
            if ch == "'" and self.peekc(1) == "'":
                self.i += 2
                return Token("int", s[j:self.i], line, layout, ord("'"))
            if ch == "":
                raise PrologSyntaxError("end of file in character code", line)
            self.i += 1
            return Token("int", s[j:self.i], line, layout, ord(ch))
        if s[j] == "0" and self.peekc(1) in ("x", "o", "b"):
            base = {"x": 16, "o": 8, "b": 2}[self.peekc(1)]
            digits = "0123456789abcdefABCDEF"[: base if base <= 10 else 22]
            k = self.i + 2
            while k < len(s) and s[k] in digits:
                k += 1
            if k > self.i + 2:
                self.i = k
                return Token("int", s[j:k], line, layout, int(s[j + 2:k], base))
        while self.i < len(s) and _is_digit(s[self.i]):
            self.i += 1
        is_float = False
        if self.peekc() == "." and _is_digit(self.peekc(1)):
            is_float = True
            self.i += 1
            while self.i < len(s) and _is_digit(s[self.i]):
                self.i += 1
            if self.peekc() in ("e", "E"):
                k = self.i + 1
                if k < len(s) and s[k] in "+-":
                    k += 1
                if k < len(s) and _is_digit(s[k]):
                    while k < len(s) and _is_digit(s[k]):
                        k += 1
                    self.i = k
        text = s[j:self.i]
        if is_float:
            return Token("float", text, line, layout, float(text))
        return Token("int", text, line, layout, int(text))

    def escape(self, q):
        # at a backslash inside a quoted item; returns the code point
        s = self.s
        self.i += 1
        c = self.peekc()
        simple = {"n": 10, "t": 9, "r": 13, "a": 7, "b": 8, "f": 12, "v": 11,
                  "0": None, "\\": 92, "'": 39, '"': 34, "`": 96, "e": 27, "s": 32}
        if c == "x":
            k = self.i + 1
            while k < len(s) and s[k] in "0123456789abcdefABCDEF":
                k += 1
            code = int(s[self.i + 1:k], 16)
            self.i = k + 1 if k < len(s) and s[k] == "\\" else k
            return code
        if c.isdigit():
            k = self.i
            while k < len(s) and s[k] in "01234567":
                k += 1
            code = int(s[self.i:k], 8)
            self.i = k + 1 if k < len(s) and s[k] == "\\" else k
            return code
        if c in simple and simple[c] is not None:
            self.i += 1
            return simple[c]
        raise PrologSyntaxError(f"undefined escape sequence \\{c}", self.line)

    def quoted(self, q):
        s = self.s
        start_line = self.line
        self.i += 1
        out = []
        while True:
            if self.i >= len(s):
                raise PrologSyntaxError("unterminated quoted item", start_line)
            c = s[self.i]
            if c == q:
                if self.peekc(1) == q:
                    out.append(q)
                    self.i += 2
                    continue
                self.i += 1
                return "".join(out)
            if c == "\\":
                if self.peekc(1) == "\n":
                    self.i += 2
                    self.line += 1
                    continue
                out.append(chr(self.escape(q)))
                continue
            if c == "\n":
                self.line += 1
            out.append(c)
            self.i += 1


def tokenize(text: str) -> list[Token]:
    """Tokenize ``text``.  The list always ends with an ``eof`` token."""
    out = []
    for tok in _Lexer(text).tokens():
        if tok.kind == "error":
            raise PrologSyntaxError(tok.text, tok.line)
        out.append(tok)
    if not out or out[-1].kind != "eof":
        out.append(Token("eof", "", out[-1].line if out else 1))
    return out


# -- operators ---------------------------------------------------------------

PREFIX_TYPES = ("fy", "fx")
INFIX_TYPES = ("xfx", "xfy", "yfx")
POSTFIX_TYPES = ("xf", "yf")

DEFAULT_OPS = [
    (1200, "xfx", ":-"), (1200, "xfx", "-->"), (1200, "fx", ":-"), (1200, "fx", "?-"),
    (1150, "fx", "dynamic"), (1150, "fx", "discontiguous"), (1150, "fx", "initialization"),
    (1100, "xfy", ";"), (1100, "xfy", "|"), (1050, "xfy", "->"), (1050, "xfy", "*->"),
    (1000, "xfy", ","), (900, "fy", "\\+"),
    (700, "xfx", "="), (700, "xfx", "\\="), (700, "xfx", "=="), (700, "xfx", "\\=="),
    (700, "xfx", "@<"), (700, "xfx", "@>"), (700, "xfx", "@=<"), (700, "xfx", "@>="),
    (700, "xfx", "=.."), (700, "xfx", "is"), (700, "xfx", "=:="), (700, "xfx", "=\\="),
    (700, "xfx", "<"), (700, "xfx", ">"), (700, "xfx", "=<"), (700, "xfx", ">="),
    (550, "xfy", ":"),
    (500, "yfx", "+"), (500, "yfx", "-"), (500, "yfx", "/\\"), (500, "yfx", "\\/"),
    (400, "yfx", "*"), (400, "yfx", "/"), (400, "yfx", "//"), (400, "yfx", "rem"),
    (400, "yfx", "mod"), (400, "yfx", "<<"), (400, "yfx", ">>"), (400, "yfx", "div"),
    (200, "xfx", "**"), (200, "xfy", "^"), (200, "fy", "-"), (200, "fy", "+"), (200, "fy", "\\"),
]

# Priorities of these may not be changed by user programs.
PROTECTED_OPS = {",", "|"}


class OpTable:
    def __init__(self, ops=DEFAULT_OPS):
        self.prefix: dict[str, tuple[int, str]] = {}
        self.infix: dict[str, tuple[int, str]] = {}
        self.postfix: dict[str, tuple[int, str]] = {}
        for p, t, n in ops:
            self._set(p, t, n)

    def copy(self) -> "OpTable":
        new = OpTable(())
        new.prefix = dict(self.prefix)
        new.infix = dict(self.infix)
        new.postfix = dict(self.postfix)
        return new

    def _set(self, p, t, name):
        table = self.prefix if t in PREFIX_TYPES else self.infix if t in INFIX_TYPES else self.postfix
        if p == 0:
            table.pop(name, None)
        else:
            table[name] = (p, t)

    def add(self, priority: int, type_: str, name: str) -> "OpTable":
        if type_ not in PREFIX_TYPES + INFIX_TYPES + POSTFIX_TYPES:
            raise ValueError(("domain_error", "operator_specifier", type_))
        if not isinstance(priority, int) or not 0 <= priority <= 1200:
            raise ValueError(("domain_error", "operator_priority", priority))
        if name in PROTECTED_OPS or name in ("[]", "{}"):
            raise PermissionError(("permission_error", "modify", "operator", name))
        # an atom may not be both infix and postfix
        if type_ in INFIX_TYPES and name in self.postfix and priority:
            raise PermissionError(("permission_error", "create", "operator", name))
        if type_ in POSTFIX_TYPES and name in self.infix and priority:
            raise PermissionError(("permission_error", "create", "operator", name))
        self._set(priority, type_, name)
        return self

    def is_op(self, name) -> bool:
        return name in self.prefix or name in self.infix or name in self.postfix


def add_op(priority: int, type_: str, name: str, ops: OpTable) -> OpTable:
    return ops.add(priority, type_, name)


# -- parser ------------------------------------------------------------------

@dataclass
class AnnotatedTerm:
    term: object
    spans: dict = field(default_factory=dict)
    varnames: dict = field(default_factory=dict)
    singletons: list = field(default_factory=list)
    line: int = 0

    def line_of(self, path) -> int:
        return self.spans.get(tuple(path), self.line)


_TERM_END = {")", "]", "}", ",", "|"}


class _Parser:
    def __init__(self, tokens: list[Token], pos: int, ops: OpTable):
        self.toks = tokens
        self.pos = pos
        self.ops = ops
        self.varmap: dict[str, Var] = {}
        self.varcount: dict[str, int] = {}

    def peek(self, k=0) -> Token:
        j = self.pos + k
        return self.toks[j] if j < len(self.toks) else self.toks[-1]

    def advance(self) -> Token:
        t = self.peek()
        self.pos += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise PrologSyntaxError(msg, tok.line)

    def expect(self, text):
        tok = self.advance()
        if tok.kind != "punct" or tok.text != text:
            self.error(f"expected {text!r}, found {tok.text or tok.kind!r}", tok)

    # Each parse routine returns (term, annotation, priority); an annotation
    # is (line, [child annotations]).

    def name_of(self, tok):
        """Name if the token can act as an operator atom."""
        if tok.kind in ("atom", "qatom"):
            return tok.text
        if tok.kind == "punct" and tok.text in (",", "|"):
            return tok.text
        return None

    def is_term_start(self, tok) -> bool:
        if tok.kind in ("end", "eof"):
            return False
        if tok.kind == "punct":
            return tok.text in ("(", "[", "{")
        if tok.kind == "atom" and tok.text in self.ops.infix and tok.text not in self.ops.prefix:
            nxt = self.peek(1)
            # an infix-only operator followed by '(' is still a functor
            return nxt.kind == "punct" and nxt.text == "(" and not nxt.layout
        return True

    def parse(self, maxprec: int, in_arg: bool = False):
        # in_arg: argument of a compound or list element; ',' and '|' end
        # the argument but other operators above 999 are still accepted.
        # "stop" marks an operand nested inside such an argument.
        left, ann, lp = self.primary(maxprec)
        return self.infix(left, ann, lp, maxprec, in_arg)

    def primary(self, maxprec):
        tok = self.advance()
        k = tok.kind
        if k == "int" or k == "float":
            return tok.value, (tok.line, []), 0
        if k == "var":
            if tok.text == "_":
                return Var("_"), (tok.line, []), 0
            v = self.varmap.get(tok.text)
            if v is None:
                v = self.varmap[tok.text] = Var(tok.text)
            self.varcount[tok.text] = self.varcount.get(tok.text, 0) + 1
            return v, (tok.line, []), 0
        if k == "string" or k == "bq":
            codes = [ord(c) for c in tok.text]
            t = mklist(codes)
            return t, (tok.line, []), 0
        if k == "punct":
            if tok.text == "(":
                t, ann, _ = self.parse(1200)
                self.expect(")")
                return t, ann, 0
            if tok.text == "[":
                nxt = self.peek()
                if nxt.kind == "punct" and nxt.text == "]":
                    self.advance()
                    return self.atom_or_compound(NIL, tok, maxprec)
                return self.list_tail(tok)
            if tok.text == "{":
                nxt = self.peek()
                if nxt.kind == "punct" and nxt.text == "}":
                    self.advance()
                    return self.atom_or_compound("{}", tok, maxprec)
                t, ann, _ = self.parse(1200)
                self.expect("}")
                return Struct("{}", (t,)), (tok.line, [ann]), 0
            if tok.text == ",":
                self.error("unexpected comma", tok)
            if tok.text == "|":
                return self.atom_or_compound("|", tok, maxprec)
            self.error(f"unexpected {tok.text!r}", tok)
        if k == "atom" or k == "qatom":
            return self.atom_or_compound(tok.text, tok, maxprec)
        if k in ("end", "eof"):
            self.error("unexpected end of clause", tok)
        self.error(f"unexpected token {tok.text!r}", tok)

    def atom_or_compound(self, name, tok, maxprec):
        nxt = self.peek()
        if nxt.kind == "punct" and nxt.text == "(" and not nxt.layout:
            self.advance()
            args, anns = [], []
            while True:
                a, an, _ = self.parse(999, True)
                args.append(a)
                anns.append(an)
                t = self.advance()
                if t.kind == "punct" and t.text == ",":
                    continue
                if t.kind == "punct" and t.text == ")":
                    break
                self.error(f"expected ',' or ')' in arguments, found {t.text or t.kind!r}", t)
            return Struct(name, args), (tok.line, anns), 0
        if name == "-" and tok.kind == "atom" and nxt.kind in ("int", "float") and not nxt.layout:
            self.advance()
            return -nxt.value, (tok.line, []), 0
        if tok.kind == "atom" and name in self.ops.prefix:
            p, typ = self.ops.prefix[name]
            if not self.is_term_start(nxt):
                pr = p if name in self.ops.infix or name in self.ops.postfix else 0
                return name, (tok.line, []), min(pr, maxprec) if pr <= maxprec else 0
            if p > maxprec:
                p, typ = 999, typ
            argmax = p if typ == "fy" else p - 1
            arg, ann, _ = self.parse(argmax)
            return Struct(name, (arg,)), (tok.line, [ann]), p
        pr = 0
        if tok.kind == "atom" and (name in self.ops.infix or name in self.ops.postfix):
            pr = max(self.ops.infix.get(name, (0,))[0], self.ops.postfix.get(name, (0,))[0])
            if pr > maxprec:
                pr = 0
        return name, (tok.line, []), pr

    def list_tail(self, open_tok):
        items, anns = [], []
        while True:
            a, an, _ = self.parse(999, True)
            items.append(a)
            anns.append(an)
            t = self.advance()
            if t.kind == "punct" and t.text == ",":
                continue
            if t.kind == "punct" and t.text == "|":
                tail, tann, _ = self.parse(999, True)
                self.expect("]")
                break
            if t.kind == "punct" and t.text == "]":
                tail, tann = NIL, (t.line, [])
                break
            self.error(f"expected ',', '|' or ']' in list, found {t.text or t.kind!r}", t)
        term, ann = tail, tann
        for item, ian in zip(reversed(items), reversed(anns)):
            term = Struct(".", (item, term))
            ann = (ian[0], [ian, ann])
        return term, (open_tok.line, ann[1]), 0

    def infix(self, left, lann, lp, maxprec, in_arg=False):
        while True:
            tok = self.peek()
            name = self.name_of(tok)
            if name is None:
                return left, lann, lp
            if in_arg:
                if tok.kind == "punct":
                    return left, lann, lp
                if in_arg is True:
                    maxprec = 1200
            if tok.kind == "punct" and name == "|":
                entry = (1100, "xfy")
            else:
                entry = self.ops.infix.get(name)
            if entry is not None:
                p, typ = entry
                lmax = p if typ == "yfx" else p - 1
                rmax = p if typ == "xfy" else p - 1
                if p <= maxprec and lp <= lmax:
                    self.advance()
                    right, rann, _ = self.parse(rmax, "stop" if in_arg else False)
                    if name == "|":
                        name = ";"
                    left = Struct(name, (left, right))
                    lann = (tok.line, [lann, rann])
                    lp = p
                    continue
            entry = self.ops.postfix.get(name) if tok.kind == "atom" or tok.kind == "qatom" else None
            if entry is not None:
                p, typ = entry
                lmax = p if typ == "yf" else p - 1
                if p <= maxprec and lp <= lmax:
                    self.advance()
                    left = Struct(name, (left,))
                    lann = (tok.line, [lann])
                    lp = p
                    continue
            return left, lann, lp


def _flatten_spans(ann, path, out):
    line, kids = ann
    out[path] = line
    for i, k in enumerate(kids, 1):
        _flatten_spans(k, path + (i,), out)


def read_term(tokens: list[Token], ops: OpTable, pos: int = 0):
    """Parse one clause starting at ``pos``.

    Returns ``(AnnotatedTerm, next_pos)``; ``AnnotatedTerm`` is ``None`` at
    end of input.
    """
    if tokens[pos].kind == "eof":
        return None, pos
    p = _Parser(tokens, pos, ops)
    first = tokens[pos]
    term, ann, _ = p.parse(1200)
    end = p.advance()
    if end.kind != "end":
        p.error(f"operator expected, found {end.text or end.kind!r}", end)
    spans = {}
    _flatten_spans(ann, (), spans)
    singles = [n for n, c in p.varcount.items() if c == 1 and not n.startswith("_")]
    at = AnnotatedTerm(term, spans, dict(p.varmap), singles, first.line)
    return at, p.pos


def skip_clause(tokens: list[Token], pos: int) -> int:
    """Position just after the next end token (error recovery)."""
    while tokens[pos].kind not in ("end", "eof"):
        pos += 1
    return pos + 1 if tokens[pos].kind == "end" else pos


def read_clauses(text: str, ops: OpTable | None = None):
    """Yield AnnotatedTerm or PrologSyntaxError items for every clause."""
    ops = ops or OpTable()
    toks = []
    for tok in _Lexer(text).tokens():
        toks.append(tok)
    pos = 0
    while pos < len(toks):
        tok = toks[pos]
        if tok.kind == "eof":
            return
        if tok.kind == "error":
            yield PrologSyntaxError(tok.text, tok.line)
            pos += 1
            continue
        try:
            at, pos = read_term(toks, ops, pos)
        except PrologSyntaxError as e:
            yield e
            pos = skip_clause(toks, _error_pos(toks, pos, e))
            continue
        if at is None:
            return
        yield at


def _error_pos(toks, pos, err):
    # resume scanning from the first token on or after the offending line
    while toks[pos].kind not in ("end", "eof") and toks[pos].line < err.line:
        pos += 1
    return pos


def parse_term(text: str, ops: OpTable | None = None) -> AnnotatedTerm:
    """Read a single term from ``text``; a final '.' is optional."""
    ops = ops or OpTable()
    stripped = text.rstrip()
    if not stripped.endswith(".") or stripped.endswith(".."):
        text = stripped + " ."
    toks = tokenize(text)
    at, pos = read_term(toks, ops, 0)
    if at is None:
        raise PrologSyntaxError("empty input", 1)
    if toks[pos].kind != "eof":
        raise PrologSyntaxError("extra text after term", toks[pos].line)
    return at
