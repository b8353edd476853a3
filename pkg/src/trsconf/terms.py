"""First-order terms, substitutions, matching and unification.

Terms are immutable and hash-consed by value: ``Var`` holds a variable name,
``App`` a function symbol name plus a tuple of argument terms.  Constants are
``App`` nodes with no arguments.  Positions are tuples of 1-based child indices
with ``()`` for the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

Position = tuple[int, ...]
Subst = Mapping[str, "Term"]

# Variables frozen by ``ground_freeze`` become constants in this namespace.  The
# brackets are not identifier characters, so a parsed problem can never clash.
FROZEN_PREFIX = "<"
FROZEN_SUFFIX = ">"


class Var:
    __slots__ = ("name", "_hash")

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("V", name))

    @property
    def size(self) -> int:
        return 1

    def __eq__(self, other):
        return self is other or (type(other) is Var and other.name == self.name)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Var({self.name!r})"

    def __str__(self):
        return self.name


class App:
    __slots__ = ("fn", "args", "size", "_hash")

    def __init__(self, fn: str, args: tuple = ()):
        self.fn = fn
        self.args = tuple(args)
        self.size = 1 + sum(a.size for a in self.args)
        self._hash = hash((fn, self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    def __eq__(self, other):
        if self is other:
            return True
        return (
            type(other) is App
            and self._hash == other._hash
            and self.fn == other.fn
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"App({self.fn!r}, {self.args!r})"

    def __str__(self):
        if not self.args:
            return self.fn
        return f"{self.fn}({','.join(str(a) for a in self.args)})"


Term = Var | App


def const(name: str) -> App:
    return App(name, ())


@dataclass(frozen=True, order=True)
class Symbol:
    name: str
    arity: int

    def __post_init__(self):
        if not self.name:
            raise ValueError("symbol name must be non-empty")
        if self.arity < 0:
            raise ValueError("arity must be non-negative")


@dataclass(frozen=True)
class Rule:
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if isinstance(self.lhs, Var):
            raise ValueError(f"left-hand side of {self} is a variable")
        missing = vars_of(self.rhs) - vars_of(self.lhs)
        if missing:
            raise ValueError(f"rule {self} has fresh variables {sorted(missing)} on its right-hand side")

    def __str__(self):
        return f"{self.lhs} -> {self.rhs}"


@dataclass(frozen=True)
class Trs:
    """An ordered rule list with declared variables.

    Two TRSs compare equal when rules and declared variables agree; the name
    is informational.
    """

    rules: tuple[Rule, ...] = ()
    variables: frozenset[str] = frozenset()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "variables", frozenset(self.variables))
        arities: dict[str, int] = {}
        for rule in self.rules:
            for side in (rule.lhs, rule.rhs):
                for sym in function_symbols(side):
                    if arities.setdefault(sym.name, sym.arity) != sym.arity:
                        raise ValueError(f"symbol {sym.name} used with arities {arities[sym.name]} and {sym.arity}")

    @property
    def signature(self) -> frozenset[Symbol]:
        return frozenset(s for r in self.rules for side in (r.lhs, r.rhs) for s in function_symbols(side))

    def with_rules(self, rules) -> "Trs":
        return Trs(tuple(rules), self.variables, self.name)

    def __len__(self):
        return len(self.rules)

    def __str__(self):
        return "{" + ", ".join(str(r) for r in self.rules) + "}"


# ---------------------------------------------------------------- traversal


def vars_of(t: Term) -> set[str]:
    out: set[str] = set()
    stack = [t]
    while stack:
        s = stack.pop()
        if type(s) is Var:
            out.add(s.name)
        else:
            stack.extend(s.args)
    return out


def var_occurrences(t: Term) -> list[str]:
    """Variable names in left-to-right order, with repetitions."""
    if type(t) is Var:
        return [t.name]
    out: list[str] = []
    for a in t.args:
        out.extend(var_occurrences(a))
    return out


def function_symbols(t: Term) -> set[Symbol]:
    out: set[Symbol] = set()
    stack = [t]
    while stack:
        s = stack.pop()
        if type(s) is App:
            out.add(Symbol(s.fn, len(s.args)))
            stack.extend(s.args)
    return out


def is_ground(t: Term) -> bool:
    return not vars_of(t)


def is_linear(t: Term) -> bool:
    occ = var_occurrences(t)
    return len(occ) == len(set(occ))


def positions(t: Term) -> Iterator[Position]:
    """All positions in pre-order: outermost first, then left to right."""
    yield ()
    if type(t) is App:
        for i, a in enumerate(t.args, 1):
            for p in positions(a):
                yield (i,) + p


def fun_positions(t: Term) -> list[Position]:
    return [p for p in positions(t) if type(subterm_at(t, p)) is App]


def var_positions(t: Term) -> list[Position]:
    return [p for p in positions(t) if type(subterm_at(t, p)) is Var]


def subterm_at(t: Term, p: Position) -> Term:
    for i in p:
        if type(t) is Var or not 1 <= i <= len(t.args):
            raise IndexError(f"invalid position {p}")
        t = t.args[i - 1]
    return t


def replace_at(t: Term, p: Position, s: Term) -> Term:
    if not p:
        return s
    if type(t) is Var or not 1 <= p[0] <= len(t.args):
        raise IndexError(f"invalid position {p}")
    i = p[0] - 1
    args = list(t.args)
    args[i] = replace_at(args[i], p[1:], s)
    return App(t.fn, tuple(args))


def subterms(t: Term) -> Iterator[tuple[Position, Term]]:
    yield (), t
    if type(t) is App:
        for i, a in enumerate(t.args, 1):
            for p, s in subterms(a):
                yield (i,) + p, s


# ------------------------------------------------------------ substitutions


def apply_subst(t: Term, sigma: Subst) -> Term:
    if not sigma:
        return t
    if type(t) is Var:
        return sigma.get(t.name, t)
    if not t.args:
        return t
    return App(t.fn, tuple(apply_subst(a, sigma) for a in t.args))


def rename(t: Term, mapping: Mapping[str, str]) -> Term:
    return apply_subst(t, {k: Var(v) for k, v in mapping.items()})


def rename_rule(rule: Rule, suffix: str) -> Rule:
    names = vars_of(rule.lhs)
    mapping = {v: Var(v + suffix) for v in names}
    return Rule(apply_subst(rule.lhs, mapping), apply_subst(rule.rhs, mapping))


def match_term(pattern: Term, subject: Term) -> dict[str, Term] | None:
    """One-way matching: sigma with pattern*sigma == subject, or None."""
    sigma: dict[str, Term] = {}
    stack = [(pattern, subject)]
    while stack:
        p, s = stack.pop()
        if type(p) is Var:
            bound = sigma.get(p.name)
            if bound is None:
                sigma[p.name] = s
            elif bound != s:
                return None
        elif type(s) is Var or p.fn != s.fn or len(p.args) != len(s.args):
            return None
        else:
            stack.extend(zip(p.args, s.args))
    return sigma


def _occurs(name: str, t: Term, sigma: dict[str, Term]) -> bool:
    stack = [t]
    while stack:
        s = stack.pop()
        if type(s) is Var:
            if s.name == name:
                return True
            bound = sigma.get(s.name)
            if bound is not None:
                stack.append(bound)
        else:
            stack.extend(s.args)
    return False


def _walk(t: Term, sigma: dict[str, Term]) -> Term:
    while type(t) is Var and t.name in sigma:
        t = sigma[t.name]
    return t


def unify(s: Term, t: Term) -> dict[str, Term] | None:
    """Most general unifier with occurs check, returned in idempotent form."""
    sigma: dict[str, Term] = {}
    stack = [(s, t)]
    while stack:
        a, b = stack.pop()
        a = _walk(a, sigma)
        b = _walk(b, sigma)
        if a == b:
            continue
        if type(a) is Var:
            if _occurs(a.name, b, sigma):
                return None
            sigma[a.name] = b
        elif type(b) is Var:
            if _occurs(b.name, a, sigma):
                return None
            sigma[b.name] = a
        elif a.fn != b.fn or len(a.args) != len(b.args):
            return None
        else:
            stack.extend(zip(a.args, b.args))
    # triangular form -> idempotent
    resolved: dict[str, Term] = {}

    def resolve(u: Term) -> Term:
        if type(u) is Var:
            if u.name in resolved:
                return resolved[u.name]
            if u.name in sigma:
                r = resolve(sigma[u.name])
                resolved[u.name] = r
                return r
            return u
        if not u.args:
            return u
        return App(u.fn, tuple(resolve(x) for x in u.args))

    return {k: resolve(Var(k)) for k in sigma}


def is_variant(s: Term, t: Term) -> bool:
    """True iff s and t are equal up to a bijective variable renaming."""
    m1 = match_term(s, t)
    if m1 is None:
        return False
    images = list(m1.values())
    return all(type(v) is Var for v in images) and len({v.name for v in images}) == len(images)


def rule_is_variant(r1: Rule, r2: Rule) -> bool:
    return is_variant(App("->", (r1.lhs, r1.rhs)), App("->", (r2.lhs, r2.rhs)))


def frozen_name(var: str) -> str:
    return f"{FROZEN_PREFIX}{var}{FROZEN_SUFFIX}"


def ground_freeze(t: Term) -> Term:
    """Replace each variable x by the reserved constant <x>."""
    if type(t) is Var:
        return App(frozen_name(t.name), ())
    if not t.args:
        return t
    return App(t.fn, tuple(ground_freeze(a) for a in t.args))


def var(name: str) -> Var:
    return Var(name)


def app(fn: str, *args: Term) -> App:
    return App(fn, args)
