"""Reading and writing problems in the ``.trs`` surface syntax.

Grammar (whitespace and newlines are insignificant)::

    problem   ::= directive*
    directive ::= "(" "VAR" ident* ")"
                | "(" "RULES" rule* ")"
                | "(" OTHER balanced-text ")"      kept verbatim as a comment
    rule      ::= term "->" term
    term      ::= ident | ident "(" [term ("," term)*] ")"
    ident     ::= [A-Za-z0-9_']+

An identifier is a variable iff it is declared in a VAR block.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .terms import App, Rule, Term, Trs, Var, vars_of

ERROR_KINDS = ("syntax", "arity", "variable-lhs", "unbound-rhs-var")
ANSWERS = ("YES", "NO", "MAYBE")


class TrsParseError(ValueError):
    def __init__(self, kind: str, message: str, line: int = 0, col: int = 0):
        assert kind in ERROR_KINDS
        super().__init__(f"{line}:{col}: {kind}: {message}")
        self.kind = kind
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class ProblemFile:
    name: str
    trs: Trs
    comment: str | None = None


def _is_ident_char(c: str) -> bool:
    return c.isascii() and (c.isalnum() or c in "_'")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.i = 0

    def where(self, i: int | None = None) -> tuple[int, int]:
        i = self.i if i is None else i
        line = self.text.count("\n", 0, i) + 1
        col = i - (self.text.rfind("\n", 0, i) + 1) + 1
        return line, col

    def error(self, kind: str, message: str, at: int | None = None) -> TrsParseError:
        line, col = self.where(at)
        return TrsParseError(kind, message, line, col)

    def skip_ws(self) -> None:
        t = self.text
        while self.i < len(t) and t[self.i].isspace():
            self.i += 1

    def peek(self) -> str:
        self.skip_ws()
        if self.i >= len(self.text):
            return ""
        if self.text.startswith("->", self.i):
            return "->"
        return self.text[self.i]

    def expect(self, tok: str) -> None:
        if self.peek() != tok:
            got = self.peek() or "end of input"
            raise self.error("syntax", f"expected {tok!r}, found {got!r}")
        self.i += len(tok)

    def ident(self) -> tuple[str, int]:
        self.skip_ws()
        start = self.i
        t = self.text
        while self.i < len(t) and _is_ident_char(t[self.i]):
            self.i += 1
        if self.i == start:
            got = t[start] if start < len(t) else "end of input"
            raise self.error("syntax", f"expected identifier, found {got!r}")
        return t[start:self.i], start

    def balanced(self) -> str:
        """Raw text up to the parenthesis closing the current directive."""
        depth = 0
        start = self.i
        t = self.text
        while self.i < len(t):
            c = t[self.i]
            if c == "(":
                depth += 1
            elif c == ")":
                if depth == 0:
                    body = t[start:self.i]
                    self.i += 1
                    return body.strip()
                depth -= 1
            self.i += 1
        raise self.error("syntax", "unterminated directive", start)


class _Parser:
    def __init__(self, text: str):
        self.s = _Scanner(text)
        self.variables: set[str] = set()
        self.arities: dict[str, tuple[int, int]] = {}
        self.rules: list[Rule] = []
        self.comments: list[str] = []

    def parse(self) -> tuple[Trs, str | None]:
        s = self.s
        while s.peek():
            s.expect("(")
            key, _ = s.ident()
            if key == "VAR":
                while s.peek() not in (")", ""):
                    name, _ = s.ident()
                    self.variables.add(name)
                s.expect(")")
            elif key == "RULES":
                while s.peek() not in (")", ""):
                    self.rule()
                s.expect(")")
            else:
                body = s.balanced()
                self.comments.append(f"({key} {body})" if body else f"({key})")
        for name in self.variables:
            if name in self.arities:
                raise s.error("syntax", f"variable {name} used as a function symbol", self.arities[name][1])
        trs = Trs(tuple(self.rules), frozenset(self.variables))
        return trs, ("\n".join(self.comments) or None)

    def rule(self) -> None:
        s = self.s
        s.skip_ws()
        start = s.i
        lhs = self.term()
        s.expect("->")
        rhs = self.term()
        if type(lhs) is Var:
            raise s.error("variable-lhs", f"left-hand side {lhs} is a variable", start)
        missing = vars_of(rhs) - vars_of(lhs)
        if missing:
            raise s.error("unbound-rhs-var", f"variables {sorted(missing)} occur only on the right-hand side", start)
        self.rules.append(Rule(lhs, rhs))

    def term(self) -> Term:
        s = self.s
        name, at = s.ident()
        if s.peek() != "(":
            if name in self.variables:
                return Var(name)
            self.note_arity(name, 0, at)
            return App(name, ())
        if name in self.variables:
            raise s.error("syntax", f"variable {name} applied to arguments", at)
        s.expect("(")
        args: list[Term] = []
        if s.peek() != ")":
            args.append(self.term())
            while s.peek() == ",":
                s.expect(",")
                args.append(self.term())
        s.expect(")")
        self.note_arity(name, len(args), at)
        return App(name, tuple(args))

    def note_arity(self, name: str, arity: int, at: int) -> None:
        seen = self.arities.setdefault(name, (arity, at))
        if seen[0] != arity:
            line, col = self.s.where(seen[1])
            raise self.s.error("arity", f"symbol {name} used with arity {arity}, first used with arity {seen[0]} at {line}:{col}", at)


def parse_problem(text: str | bytes, name: str = "") -> ProblemFile:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TrsParseError("syntax", f"input is not UTF-8: {exc.reason}", 1, exc.start + 1) from None
    parser = _Parser(text)
    try:
        trs, comment = parser.parse()
    except RecursionError:
        raise TrsParseError("syntax", "term nesting too deep", *parser.s.where()) from None
    return ProblemFile(name, Trs(trs.rules, trs.variables, name), comment)


def parse_trs(text: str | bytes) -> Trs:
    return parse_problem(text).trs


def read_problem(path: str | Path) -> ProblemFile:
    path = Path(path)
    return parse_problem(path.read_bytes(), path.stem)


def _term_text(t: Term) -> str:
    return str(t)


def print_trs(trs: Trs) -> str:
    head = "(VAR" + "".join(f" {v}" for v in sorted(trs.variables)) + ")"
    if not trs.rules:
        return head + "\n(RULES)"
    body = "\n".join(f"  {_term_text(r.lhs)} -> {_term_text(r.rhs)}" for r in trs.rules)
    return f"{head}\n(RULES\n{body}\n)"


def print_problem(problem: ProblemFile) -> str:
    text = print_trs(problem.trs)
    if problem.comment:
        text += "\n" + problem.comment
    return text + "\n"


def write_problem(path: str | Path, trs: Trs, comment: str | None = None) -> None:
    Path(path).write_text(print_problem(ProblemFile(trs.name, trs, comment)), encoding="utf-8")


def parse_answer(output: str) -> str:
    """The verdict on the first non-empty line of prover output; MAYBE if absent."""
    for line in output.splitlines():
        word = line.strip().split(" ", 1)[0] if line.strip() else ""
        if word:
            return word if word in ANSWERS else "MAYBE"
    return "MAYBE"
