"""One-step rewriting, bounded reachability and joinability search."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

from .runtime import checkpoint
from .terms import App, Position, Rule, Term, Trs, Var, apply_subst, match_term, var_occurrences, vars_of

UNBOUNDED = -1
DEFAULT_MAX_TERMS = 20000


@dataclass(frozen=True)
class Reduct:
    position: Position
    rule: int
    term: Term


@dataclass(frozen=True)
class Step:
    """One rewrite step ``source ->[position, rule] target``; source is implicit."""

    position: Position
    rule: int
    target: Term


def _root_index(trs: Trs) -> dict[str, list[tuple[int, Rule]]]:
    idx = trs.__dict__.get("_root_index")
    if idx is None:
        idx = {}
        for i, rule in enumerate(trs.rules):
            idx.setdefault(rule.lhs.fn, []).append((i, rule))
        object.__setattr__(trs, "_root_index", idx)
    return idx


def rewrite_at(t: Term, position: Position, rule: Rule) -> Term | None:
    """Apply ``rule`` at ``position`` of ``t``; None if the rule does not match there."""
    if not position:
        sigma = match_term(rule.lhs, t)
        return None if sigma is None else apply_subst(rule.rhs, sigma)
    if type(t) is Var or not 1 <= position[0] <= len(t.args):
        return None
    i = position[0] - 1
    inner = rewrite_at(t.args[i], position[1:], rule)
    if inner is None:
        return None
    args = list(t.args)
    args[i] = inner
    return App(t.fn, tuple(args))


def one_step_reducts(t: Term, trs: Trs) -> list[Reduct]:
    """All single-step successors, leftmost-outermost positions first, then rule order."""
    checkpoint()
    index = _root_index(trs)
    out: list[Reduct] = []

    def visit(s: Term, pos: Position, rebuild):
        if type(s) is Var:
            return
        for i, rule in index.get(s.fn, ()):
            sigma = match_term(rule.lhs, s)
            if sigma is not None:
                out.append(Reduct(pos, i, rebuild(apply_subst(rule.rhs, sigma))))
        for k, a in enumerate(s.args):
            def rb(new, s=s, k=k, rebuild=rebuild):
                args = list(s.args)
                args[k] = new
                return rebuild(App(s.fn, tuple(args)))
            visit(a, pos + (k + 1,), rb)

    visit(t, (), lambda x: x)
    return out


def is_normal_form(t: Term, trs: Trs) -> bool:
    index = _root_index(trs)
    stack = [t]
    while stack:
        s = stack.pop()
        if type(s) is Var:
            continue
        for _, rule in index.get(s.fn, ()):
            if match_term(rule.lhs, s) is not None:
                return False
        stack.extend(s.args)
    return True


def _successors(t: Term, trs: Trs, width: int) -> list[Reduct]:
    reducts = one_step_reducts(t, trs)
    if width is not None and width >= 0:
        reducts = reducts[:width]
    return reducts


@dataclass
class Reach:
    """Breadth-first reduct set with predecessor links for path recovery."""

    root: Term
    pred: dict  # term -> (parent term, Step) or None for the root
    dist: dict  # term -> number of steps
    complete: bool  # no term was dropped by the size cap
    frontier_empty: bool  # search ran out of new terms before the depth bound

    def path(self, target: Term) -> list[Step]:
        steps: list[Step] = []
        cur = target
        while self.pred[cur] is not None:
            parent, step = self.pred[cur]
            steps.append(step)
            cur = parent
        steps.reverse()
        return steps


def reach(t: Term, trs: Trs, depth: int, width: int = UNBOUNDED, max_terms: int = DEFAULT_MAX_TERMS) -> Reach:
    """Terms reachable from ``t`` in at most ``depth`` steps (depth -1: until closure or cap)."""
    pred = {t: None}
    dist = {t: 0}
    frontier = [t]
    d = 0
    complete = True
    while frontier and (depth < 0 or d < depth):
        d += 1
        nxt = []
        for s in frontier:
            for r in _successors(s, trs, width):
                if r.term in pred:
                    continue
                if len(pred) >= max_terms:
                    complete = False
                    break
                pred[r.term] = (s, Step(r.position, r.rule, r.term))
                dist[r.term] = d
                nxt.append(r.term)
            if not complete:
                break
        frontier = nxt
        if not complete:
            break
    return Reach(t, pred, dist, complete, not frontier)


class JoinStatus(enum.Enum):
    JOINABLE = "joinable"
    NOT_PROVEN = "not-proven"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class Join:
    left: Term
    right: Term
    meet: Term
    left_steps: tuple[Step, ...]
    right_steps: tuple[Step, ...]

    def certificate(self) -> str:
        return f"JOIN {self.left} ->{len(self.left_steps)} {self.meet} <-{len(self.right_steps)} {self.right}"


def find_join(s: Term, t: Term, trs: Trs, depth: int, width: int = UNBOUNDED,
              max_terms: int = DEFAULT_MAX_TERMS) -> tuple[JoinStatus, Join | None]:
    """Alternating breadth-first search from both sides for a common reduct."""
    if s == t:
        return JoinStatus.JOINABLE, Join(s, t, s, (), ())
    sides = [
        {"pred": {s: None}, "frontier": [s]},
        {"pred": {t: None}, "frontier": [t]},
    ]

    def path(pred, term):
        steps = []
        while pred[term] is not None:
            parent, step = pred[term]
            steps.append(step)
            term = parent
        steps.reverse()
        return tuple(steps)

    exhausted = False
    d = 0
    while depth < 0 or d < depth:
        d += 1
        progressed = False
        for k in (0, 1):
            me, other = sides[k], sides[1 - k]
            nxt = []
            for u in me["frontier"]:
                for r in _successors(u, trs, width):
                    if r.term in me["pred"]:
                        continue
                    if len(me["pred"]) >= max_terms:
                        exhausted = True
                        break
                    me["pred"][r.term] = (u, Step(r.position, r.rule, r.term))
                    nxt.append(r.term)
                    if r.term in other["pred"]:
                        lp = path(sides[0]["pred"], r.term)
                        rp = path(sides[1]["pred"], r.term)
                        return JoinStatus.JOINABLE, Join(s, t, r.term, lp, rp)
                if exhausted:
                    break
            me["frontier"] = nxt
            progressed = progressed or bool(nxt)
            if exhausted:
                break
        if exhausted:
            return JoinStatus.EXHAUSTED, None
        if not progressed:
            break
    return JoinStatus.NOT_PROVEN, None


def bounded_join(s: Term, t: Term, trs: Trs, depth: int, width: int = UNBOUNDED,
                 max_terms: int = DEFAULT_MAX_TERMS) -> JoinStatus:
    return find_join(s, t, trs, depth, width, max_terms)[0]


def replay(source: Term, steps, trs: Trs) -> bool:
    """Check that ``steps`` is a valid rewrite sequence from ``source``."""
    cur = source
    for step in steps:
        if not 0 <= step.rule < len(trs.rules):
            return False
        nxt = rewrite_at(cur, step.position, trs.rules[step.rule])
        if nxt is None or nxt != step.target:
            return False
        cur = nxt
    return True


def replay_join(join: Join, trs: Trs) -> bool:
    end_l = join.left_steps[-1].target if join.left_steps else join.left
    end_r = join.right_steps[-1].target if join.right_steps else join.right
    return (
        replay(join.left, join.left_steps, trs)
        and replay(join.right, join.right_steps, trs)
        and end_l == join.meet
        and end_r == join.meet
    )


def normalize(t: Term, trs: Trs, max_steps: int) -> tuple[Term, tuple[Step, ...]] | None:
    """Leftmost-outermost normalisation; None if no normal form within ``max_steps``."""
    steps: list[Step] = []
    cur = t
    for _ in range(max_steps + 1):
        reducts = one_step_reducts(cur, trs)
        if not reducts:
            return cur, tuple(steps)
        r = reducts[0]
        steps.append(Step(r.position, r.rule, r.term))
        cur = r.term
    return None


@dataclass(frozen=True)
class Predicates:
    left_linear: bool
    right_linear: bool
    linear: bool
    ground: bool
    collapsing: bool
    duplicating: bool


def syntactic_predicates(trs: Trs) -> Predicates:
    def linear(t):
        occ = var_occurrences(t)
        return len(occ) == len(set(occ))

    ll = all(linear(r.lhs) for r in trs.rules)
    rl = all(linear(r.rhs) for r in trs.rules)
    ground = all(not vars_of(r.lhs) and not vars_of(r.rhs) for r in trs.rules)
    collapsing = any(type(r.rhs) is Var for r in trs.rules)
    duplicating = False
    for r in trs.rules:
        lc = Counter(var_occurrences(r.lhs))
        rc = Counter(var_occurrences(r.rhs))
        if any(n > lc[x] for x, n in rc.items()):
            duplicating = True
            break
    return Predicates(ll, rl, ll and rl, ground, collapsing, duplicating)
