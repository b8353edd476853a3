"""Strategy language: abstract syntax, parser and printer.

Binding, tightest first: postfix iterators and specifiers, then ``;``, then
``|``, then ``||``; ``if p then s else s'`` extends as far right as possible.
A config file is a sequence of ``NAME = strategy`` lines; a line ending in a
backslash continues on the next line and lines starting with ``#`` are
comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

MODIFIERS = ("nono",)


class StrategyError(ValueError):
    pass


class StrategySyntaxError(StrategyError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Proc:
    """A processor call or a reference to a named definition."""

    name: str
    flags: tuple[tuple[str, Union[int, float, None]], ...] = ()


@dataclass(frozen=True)
class Fail:
    pass


@dataclass(frozen=True)
class Succ:
    pass


@dataclass(frozen=True)
class Seq:
    first: "Strategy"
    second: "Strategy"


@dataclass(frozen=True)
class Choice:
    first: "Strategy"
    second: "Strategy"


@dataclass(frozen=True)
class Par:
    first: "Strategy"
    second: "Strategy"


@dataclass(frozen=True)
class If:
    pred: str
    then: "Strategy"
    orelse: "Strategy"


@dataclass(frozen=True)
class Opt:
    body: "Strategy"


@dataclass(frozen=True)
class Star:
    body: "Strategy"


@dataclass(frozen=True)
class Plus:
    body: "Strategy"


@dataclass(frozen=True)
class IterN:
    body: "Strategy"
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise StrategyError("iteration count must be at least 1")


@dataclass(frozen=True)
class IterTimed:
    body: "Strategy"
    secs: float

    def __post_init__(self):
        if self.secs <= 0:
            raise StrategyError("time bound must be positive")


@dataclass(frozen=True)
class Bang:
    body: "Strategy"


@dataclass(frozen=True)
class Abort:
    body: "Strategy"


@dataclass(frozen=True)
class Timed:
    body: "Strategy"
    secs: float

    def __post_init__(self):
        if self.secs <= 0:
            raise StrategyError("time bound must be positive")


@dataclass(frozen=True)
class Modified:
    body: "Strategy"
    modifier: str

    def __post_init__(self):
        if self.modifier not in MODIFIERS:
            raise StrategyError(f"unknown modifier {self.modifier}")


Strategy = Union[Proc, Fail, Succ, Seq, Choice, Par, If, Opt, Star, Plus, IterN, IterTimed, Bang, Abort, Timed, Modified]


@dataclass
class StrategyDefs:
    defs: dict[str, Strategy] = field(default_factory=dict)
    entry: str = ""

    def __getitem__(self, name: str) -> Strategy:
        return self.defs[name]

    def with_entry(self, entry: str) -> "StrategyDefs":
        return StrategyDefs(dict(self.defs), entry)

    def text(self) -> str:
        return "".join(f"{name} = {unparse(ast)}\n" for name, ast in self.defs.items())


# ------------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<par>\|\|)
  | (?P<num>(?<![A-Za-z0-9_'])\d+(?:\.\d+)?|\.\d+)
  | (?P<flag>-[A-Za-z][A-Za-z0-9_]*)
  | (?P<neg>-\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*(?:-[A-Za-z][A-Za-z0-9_']*)*)
  | (?P<sym>[()\[\]{};|?*+!%])
    """,
    re.VERBOSE,
)

KEYWORDS = ("if", "then", "else")


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int
    glued: bool  # no whitespace before this token


def _lex(text: str, line_of) -> list[_Tok]:
    toks: list[_Tok] = []
    i = 0
    glued = False
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            ln, col = line_of(i)
            raise StrategySyntaxError(f"unexpected character {text[i]!r}", ln, col)
        kind = m.lastgroup
        if kind == "ws":
            glued = False
        else:
            toks.append(_Tok(kind, m.group(), i, glued))
            glued = True
        i = m.end()
    return toks


def _number(s: str) -> int | float:
    return float(s) if "." in s else int(s)


class _Parser:
    def __init__(self, text: str, known: frozenset[str], origin: tuple[int, int] = (1, 1), offsets=None):
        self.text = text
        self.known = known
        self.offsets = offsets
        self.origin = origin
        self.toks = _lex(text, self.where)
        self.i = 0

    def where(self, pos: int) -> tuple[int, int]:
        if self.offsets is not None:
            return self.offsets(pos)
        line = self.text.count("\n", 0, pos)
        col = pos - (self.text.rfind("\n", 0, pos) + 1)
        return self.origin[0] + line, (self.origin[1] if line == 0 else 1) + col

    def error(self, message: str, tok: _Tok | None = None) -> StrategySyntaxError:
        tok = tok or self.peek()
        pos = tok.pos if tok else len(self.text)
        return StrategySyntaxError(message, *self.where(pos))

    def peek(self, k: int = 0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.kind in ("sym", "par", "ident") and t.text == text

    def take(self, text: str | None = None) -> _Tok:
        t = self.peek()
        if t is None:
            raise self.error(f"expected {text!r}, found end of input" if text else "unexpected end of input")
        if text is not None and t.text != text:
            raise self.error(f"expected {text!r}, found {t.text!r}")
        self.i += 1
        return t

    def parse_all(self) -> Strategy:
        if not self.toks:
            raise self.error("empty strategy")
        node = self.expr()
        if self.peek() is not None:
            raise self.error(f"unexpected {self.peek().text!r}")
        return node

    def expr(self) -> Strategy:
        if self.at("if"):
            self.take("if")
            t = self.take()
            if t.kind != "ident" or t.text in KEYWORDS:
                raise self.error("expected predicate name", t)
            self.take("then")
            then = self.expr()
            self.take("else")
            orelse = self.expr()
            return If(t.text, then, orelse)
        node = self.choice()
        while self.at("||"):
            self.take()
            node = Par(node, self.choice_or_if())
        return node

    def choice_or_if(self) -> Strategy:
        return self.expr_if() if self.at("if") else self.choice()

    def expr_if(self) -> Strategy:
        return self.expr()

    def choice(self) -> Strategy:
        node = self.seq()
        while self.at("|"):
            self.take()
            node = Choice(node, self.expr_if() if self.at("if") else self.seq())
        return node

    def seq(self) -> Strategy:
        node = self.postfix()
        while self.at(";"):
            self.take()
            node = Seq(node, self.expr_if() if self.at("if") else self.postfix())
        return node

    def postfix(self) -> Strategy:
        node = self.atom()
        while True:
            t = self.peek()
            if t is None:
                return node
            if t.kind == "sym" and t.text in "?*+!%":
                self.i += 1
                node = {"?": Opt, "*": Star, "+": Plus, "!": Bang, "%": Abort}[t.text](node)
            elif t.kind == "num" and self._next_is("*", 1):
                self.i += 2
                n = _number(t.text)
                if not isinstance(n, int) or n < 1:
                    raise self.error("iteration count must be a positive integer", t)
                node = IterN(node, n)
            elif t.kind == "sym" and t.text == "[":
                self.i += 1
                num = self.take()
                if num.kind != "num":
                    raise self.error("expected a number of seconds", num)
                self.take("]")
                secs = float(_number(num.text))
                if secs <= 0:
                    raise self.error("time bound must be positive", num)
                if self._next_is("*", 0):
                    self.i += 1
                    node = IterTimed(node, secs)
                else:
                    node = Timed(node, secs)
            else:
                return node

    def _next_is(self, text: str, k: int) -> bool:
        t = self.peek(k)
        return t is not None and t.kind == "sym" and t.text == text

    def atom(self) -> Strategy:
        t = self.take()
        if t.kind == "sym" and t.text == "(":
            node = self.expr()
            self.take(")")
            return node
        if t.kind == "sym" and t.text == "{":
            node = self.expr()
            self.take("}")
            mod = self.take()
            if mod.kind != "ident" or mod.text not in MODIFIERS:
                raise self.error(f"unknown modifier {mod.text!r}", mod)
            return Modified(node, mod.text)
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error(f"unexpected {t.text!r}", t)
        name = t.text
        # ``name3*`` is ``name`` iterated three times when ``name`` is known
        m = re.fullmatch(r"(.*?[^0-9])([0-9]+)", name)
        if m and self._next_is("*", 0) and self.peek().glued and m.group(1) in self.known and name not in self.known:
            self.i -= 1
            self.toks[self.i] = _Tok("ident", m.group(1), t.pos, t.glued)
            self.toks.insert(self.i + 1, _Tok("num", m.group(2), t.pos + len(m.group(1)), True))
            self.i += 1
        if name == "fail" and not self._flag_next():
            return Fail()
        if name == "succ" and not self._flag_next():
            return Succ()
        name = self.toks[self.i - 1].text
        flags: list[tuple[str, int | float | None]] = []
        while self._flag_next():
            f = self.take()
            value = None
            nxt = self.peek()
            if nxt is not None and nxt.kind in ("num", "neg") and not self._next_is("*", 1):
                self.i += 1
                value = _number(nxt.text)
            flags.append((f.text[1:], value))
        return Proc(name, tuple(flags))

    def _flag_next(self) -> bool:
        t = self.peek()
        return t is not None and t.kind == "flag"


def parse_expression(text: str, known=frozenset()) -> Strategy:
    """Parse a single strategy expression."""
    return _Parser(text, frozenset(known) | _registry_names()).parse_all()


def _registry_names() -> frozenset[str]:
    from . import engine

    return frozenset(engine.PROCESSORS) | frozenset(engine.PREDICATES)


_DEF = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_']*)\s*=(.*)", re.S)


def _logical_lines(text: str):
    """Join continued lines; yield (first physical line number, text, offset map)."""
    buf: list[tuple[int, str]] = []
    for no, raw in enumerate(text.splitlines(), 1):
        raw = raw.split("#", 1)[0]
        stripped = raw.strip()
        if not buf and not stripped:
            continue
        if raw.rstrip().endswith("\\"):
            buf.append((no, raw.rstrip()[:-1]))
            continue
        buf.append((no, raw))
        yield buf
        buf = []
    if buf:
        yield buf


def parse_strategy(text: str, entry: str | None = None) -> StrategyDefs:
    """Parse a config file of ``NAME = strategy`` definitions."""
    raw_defs: list[tuple[str, str, list]] = []
    for chunk in _logical_lines(text):
        joined = " ".join(part for _, part in chunk)
        m = _DEF.match(joined)
        if not m:
            raise StrategySyntaxError("expected 'NAME = strategy'", chunk[0][0], 1)
        raw_defs.append((m.group(1), m.group(2), chunk))
    names = [n for n, _, _ in raw_defs]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise StrategySyntaxError(f"duplicate definition of {sorted(dup)[0]}")
    known = frozenset(names) | _registry_names()
    defs: dict[str, Strategy] = {}
    for name, body, chunk in raw_defs:
        joined = " ".join(part for _, part in chunk)
        body_start = joined.index("=") + 1
        starts = []
        acc = 0
        for no, part in chunk:
            starts.append((acc, no))
            acc += len(part) + 1

        def offsets(pos, starts=starts, base=body_start):
            absolute = pos + base
            line, begin = starts[0][1], 0
            for off, no in starts:
                if off <= absolute:
                    line, begin = no, off
            return line, absolute - begin + 1

        defs[name] = _Parser(body, known, offsets=offsets).parse_all()
    result = StrategyDefs(defs, entry or (names[0] if names else ""))
    check_acyclic(result)
    return result


def references(node: Strategy) -> set[str]:
    out: set[str] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Proc):
            out.add(n.name)
        for attr in ("first", "second", "then", "orelse", "body"):
            child = getattr(n, attr, None)
            if child is not None:
                stack.append(child)
    return out


def check_acyclic(defs: StrategyDefs) -> None:
    state: dict[str, int] = {}

    def visit(name: str, path: list[str]):
        state[name] = 1
        for ref in sorted(references(defs.defs[name])):
            if ref not in defs.defs:
                continue
            if state.get(ref) == 1:
                cycle = path[path.index(ref):] + [ref] if ref in path else [name, ref]
                raise StrategyError(f"cyclic definition: {' -> '.join(cycle)}")
            if ref not in state:
                visit(ref, path + [ref])
        state[name] = 2

    for name in defs.defs:
        if name not in state:
            visit(name, [name])


# ----------------------------------------------------------------- printer

_PREC = {If: 0, Par: 1, Choice: 2, Seq: 3}


def _num(x) -> str:
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return str(x)


def unparse(node: Strategy) -> str:
    """Text that parses back to ``node``."""

    def go(n, ctx: int) -> str:
        if isinstance(n, Fail):
            return "fail"
        if isinstance(n, Succ):
            return "succ"
        if isinstance(n, Proc):
            parts = [n.name]
            for f, v in n.flags:
                parts.append(f"-{f}" if v is None else f"-{f} {_num(v)}")
            text = " ".join(parts)
            return f"({text})" if n.flags and ctx > 3 else text
        if isinstance(n, If):
            text = f"if {n.pred} then {go(n.then, 0)} else {go(n.orelse, 0)}"
            return f"({text})" if ctx > 0 else text
        for cls, op in ((Par, " || "), (Choice, " | "), (Seq, ";")):
            if isinstance(n, cls):
                p = _PREC[cls]
                text = go(n.first, p) + op + go(n.second, p + 1)
                return f"({text})" if ctx > p else text
        body = go(n.body, 4)
        if isinstance(n, Opt):
            return body + "?"
        if isinstance(n, Star):
            return body + "*"
        if isinstance(n, Plus):
            return body + "+"
        if isinstance(n, Bang):
            return body + "!"
        if isinstance(n, Abort):
            return body + "%"
        if isinstance(n, IterN):
            if not body.endswith(")"):
                body = f"({body})"
            return f"{body}{n.n}*"
        if isinstance(n, IterTimed):
            return f"{body}[{_num(n.secs)}]*"
        if isinstance(n, Timed):
            return f"{body}[{_num(n.secs)}]"
        if isinstance(n, Modified):
            return "{" + go(n.body, 0) + "}" + n.modifier
        raise TypeError(f"not a strategy node: {n!r}")

    return go(node, 0)
