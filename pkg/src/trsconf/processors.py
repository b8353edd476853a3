"""Confluence and non-confluence criteria and redundant-rule transformations.

Criteria return a :class:`ProcResult` whose YES/NO answers carry a witness
that :func:`validate_witness` can replay against the analysed system.
Transformations return a new :class:`Trs`.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from .critical_pairs import Peak, critical_pairs, variable_peaks
from .rewriting import (
    DEFAULT_MAX_TERMS,
    UNBOUNDED,
    Join,
    JoinStatus,
    Step,
    find_join,
    is_normal_form,
    normalize,
    one_step_reducts,
    reach,
    replay,
    replay_join,
    rewrite_at,
    syntactic_predicates,
)
from .runtime import checkpoint
from .termination import TermBudget, prove_termination
from .terms import App, Rule, Term, Trs, Var, apply_subst, ground_freeze, rename_rule, unify, var_occurrences, vars_of

YES, NO, FAIL = "YES", "NO", "FAIL"
GUARD_MAX_TERMS = 4000
PAIR_CAP = 20000


class SoundnessError(AssertionError):
    """A NO witness was refuted by the joinability re-check."""


@dataclass(frozen=True)
class JoinWitness:
    """A peak together with a join of its two sides."""

    peak: Peak
    join: Join

    def lines(self) -> list[str]:
        return [self.peak.certificate(), self.join.certificate()]


@dataclass(frozen=True)
class NonJoinWitness:
    """``peak.left ->* left`` and ``peak.right ->* right`` with a non-joinable pair."""

    peak: Peak
    left: Term
    right: Term
    left_steps: tuple[Step, ...]
    right_steps: tuple[Step, ...]
    method: str  # "tcap" or "nf"

    def lines(self) -> list[str]:
        out = [self.peak.certificate()]
        if self.left_steps:
            out.append(f"REDUCE {self.peak.left} ->{len(self.left_steps)} {self.left}")
        if self.right_steps:
            out.append(f"REDUCE {self.peak.right} ->{len(self.right_steps)} {self.right}")
        out.append(f"NONJOINABLE {self.left} {self.right} by {self.method}")
        return out


@dataclass(frozen=True)
class ProcResult:
    outcome: str
    reason: str = ""
    elapsed: float = 0.0
    witness: tuple = ()
    problem: Trs | None = None

    @property
    def certificate(self) -> str:
        lines = [self.reason] if self.reason else []
        for w in self.witness:
            lines.extend(w.lines())
        return "\n".join(lines)


def _timed(fn):
    def wrapper(trs: Trs, *args, **kwargs) -> ProcResult:
        start = time.monotonic()
        res = fn(trs, *args, **kwargs)
        return ProcResult(res.outcome, res.reason, time.monotonic() - start, res.witness, trs)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ------------------------------------------------------------------- YES


@_timed
def proc_orthogonal(trs: Trs) -> ProcResult:
    """Weak orthogonality: left-linear and every critical pair trivial."""
    if not syntactic_predicates(trs).left_linear:
        return ProcResult(FAIL, "not left-linear")
    witnesses = []
    for cp in critical_pairs(trs):
        if cp.left != cp.right:
            return ProcResult(FAIL, f"non-trivial critical pair {cp}")
        witnesses.append(JoinWitness(cp.as_peak(), Join(cp.left, cp.right, cp.left, (), ())))
    return ProcResult(YES, "weakly orthogonal", witness=tuple(witnesses))


def _closing_join(s: Term, t: Term, trs: Trs, n: int, width: int) -> Join | None:
    """A join ``s ->^{<=n} u <-^{=} t`` if one exists."""
    rs = reach(s, trs, n, width, DEFAULT_MAX_TERMS)
    rt = reach(t, trs, 1, width, DEFAULT_MAX_TERMS)
    for u in rt.pred:  # t itself first, then its one-step reducts
        if u in rs.pred:
            return Join(s, t, u, tuple(rs.path(u)), tuple(rt.path(u)))
    return None


@_timed
def proc_strongly_closed(trs: Trs, n: int = 3, width: int = UNBOUNDED) -> ProcResult:
    """Linear and every critical pair strongly closed within ``n`` steps."""
    if not syntactic_predicates(trs).linear:
        return ProcResult(FAIL, "not linear")
    witnesses = []
    for cp in critical_pairs(trs):
        forward = _closing_join(cp.left, cp.right, trs, n, width)
        if forward is None:
            return ProcResult(FAIL, f"critical pair {cp} not strongly closed")
        backward = _closing_join(cp.right, cp.left, trs, n, width)
        if backward is None:
            return ProcResult(FAIL, f"critical pair {cp} not strongly closed")
        witnesses.append(JoinWitness(cp.as_peak(), forward))
        swapped = cp.as_peak()
        witnesses.append(JoinWitness(Peak(swapped.source, swapped.right, swapped.left,
                                          swapped.right_step, swapped.left_step), backward))
    return ProcResult(YES, f"strongly closed (n={n})", witness=tuple(witnesses))


@_timed
def proc_knuth_bendix(trs: Trs, term_budget: TermBudget = TermBudget(), join_depth: int = 1000) -> ProcResult:
    """Termination plus joinability of critical pairs via normal forms."""
    term = prove_termination(trs, term_budget)
    if not term.terminating:
        return ProcResult(FAIL, "termination not shown")
    witnesses = []
    for cp in critical_pairs(trs):
        left = normalize(cp.left, trs, join_depth)
        right = normalize(cp.right, trs, join_depth)
        if left is None or right is None:
            return ProcResult(FAIL, f"normalisation of {cp} exceeded {join_depth} steps")
        (nl, ls), (nr, rs) = left, right
        if nl == nr:
            witnesses.append(JoinWitness(cp.as_peak(), Join(cp.left, cp.right, nl, ls, rs)))
        else:
            w = NonJoinWitness(cp.as_peak(), nl, nr, ls, rs, "nf")
            return ProcResult(NO, "critical pair with distinct normal forms", witness=(w,))
    return ProcResult(YES, f"terminating ({term.certificate}) and locally confluent", witness=tuple(witnesses))


# -------------------------------------------------------------------- NO


class _Fresh:
    def __init__(self, prefix: str = "?"):
        self.prefix = prefix
        self.n = itertools.count(1)

    def __call__(self) -> Var:
        return Var(f"{self.prefix}{next(self.n)}")


def _renamed_lhss(trs: Trs) -> list[Term]:
    cached = trs.__dict__.get("_tcap_lhss")
    if cached is None:
        cached = [rename_rule(r, "#cap").lhs for r in trs.rules]
        object.__setattr__(trs, "_tcap_lhss", cached)
    return cached


def tcap(t: Term, trs: Trs, fresh: _Fresh | None = None) -> Term:
    """Replace every subterm that might be rewritten by a fresh variable."""
    fresh = fresh or _Fresh()
    lhss = _renamed_lhss(trs)

    def go(u: Term) -> Term:
        if type(u) is Var:
            return fresh()
        capped = App(u.fn, tuple(go(a) for a in u.args))
        for lhs in lhss:
            if lhs.fn == capped.fn and unify(lhs, capped) is not None:
                return fresh()
        return capped

    return go(t)


def tcap_nonjoinable(s: Term, t: Term, trs: Trs) -> bool:
    fresh = _Fresh()
    return unify(tcap(s, trs, fresh), tcap(t, trs, fresh)) is None


def nf_nonjoinable(s: Term, t: Term, trs: Trs) -> bool:
    return s != t and is_normal_form(s, trs) and is_normal_form(t, trs)


@dataclass(frozen=True)
class NonconfluenceConfig:
    steps: int = 2
    width: int = UNBOUNDED
    overlap_mode: str = "fun"  # fun, var or both
    use_tcap: bool = True
    use_nf: bool = False
    join_guard_depth: int = 6

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.overlap_mode not in ("fun", "var", "both"):
            raise ValueError(f"unknown overlap mode {self.overlap_mode}")


def _peaks(trs: Trs, mode: str) -> list[Peak]:
    out: list[Peak] = []
    if mode in ("fun", "both"):
        out.extend(cp.as_peak() for cp in critical_pairs(trs))
    if mode in ("var", "both"):
        out.extend(variable_peaks(trs))
    return out


def _by_distance(ra, rb):
    """Candidate pairs ordered by total number of steps."""
    la = sorted(ra.dist.items(), key=lambda kv: kv[1])
    lb = sorted(rb.dist.items(), key=lambda kv: kv[1])
    maxd = (la[-1][1] if la else 0) + (lb[-1][1] if lb else 0)
    count = 0
    for total in range(maxd + 1):
        for a, da in la:
            if da > total:
                break
            for b, db in lb:
                if da + db == total:
                    count += 1
                    if count > PAIR_CAP:
                        return
                    yield a, b
                elif da + db > total:
                    break


def _guard(s: Term, t: Term, trs: Trs, depth: int) -> None:
    if depth <= 0:
        return
    status, join = find_join(s, t, trs, depth, UNBOUNDED, GUARD_MAX_TERMS)
    if status is JoinStatus.JOINABLE:
        raise SoundnessError(f"claimed non-joinable pair {s}, {t} joins at {join.meet}")


@_timed
def proc_nonconfluence(trs: Trs, cfg: NonconfluenceConfig = NonconfluenceConfig()) -> ProcResult:
    """Search reducts of peaks for a provably non-joinable pair."""
    if not (cfg.use_tcap or cfg.use_nf):
        return ProcResult(FAIL, "no non-joinability test enabled")
    for peak in _peaks(trs, cfg.overlap_mode):
        if peak.left == peak.right:
            continue
        ra = reach(peak.left, trs, cfg.steps, cfg.width)
        rb = reach(peak.right, trs, cfg.steps, cfg.width)
        # freezing and capping are per term, so do them once per side
        frozen: dict[Term, Term] = {}
        capped: dict[tuple[str, Term], Term] = {}
        normal: dict[Term, bool] = {}

        def freeze(u: Term) -> Term:
            if u not in frozen:
                frozen[u] = ground_freeze(u)
            return frozen[u]

        def cap(side: str, u: Term) -> Term:
            if (side, u) not in capped:
                capped[side, u] = tcap(freeze(u), trs, _Fresh(f"?{side}"))
            return capped[side, u]

        def is_nf(u: Term) -> bool:
            if u not in normal:
                normal[u] = is_normal_form(freeze(u), trs)
            return normal[u]

        for a, b in _by_distance(ra, rb):
            checkpoint()
            if a == b:
                continue
            fa, fb = freeze(a), freeze(b)
            method = None
            if cfg.use_tcap and unify(cap("l", a), cap("r", b)) is None:
                method = "tcap"
            elif cfg.use_nf and fa != fb and is_nf(a) and is_nf(b):
                method = "nf"
            if method is None:
                continue
            _guard(fa, fb, trs, cfg.join_guard_depth)
            w = NonJoinWitness(peak, a, b, tuple(ra.path(a)), tuple(rb.path(b)), method)
            return ProcResult(NO, "non-joinable peak", witness=(w,))
    return ProcResult(FAIL, "no non-joinable peak found")


# --------------------------------------------------------------- witnesses


def _peak_valid(peak: Peak, trs: Trs) -> bool:
    for target, step in ((peak.left, peak.left_step), (peak.right, peak.right_step)):
        if step is None:
            return False
        pos, idx = step
        if not 0 <= idx < len(trs.rules):
            return False
        if rewrite_at(peak.source, pos, trs.rules[idx]) != target:
            return False
    return True


def validate_witness(result: ProcResult, trs: Trs | None = None) -> bool:
    """Replay every step recorded in a YES/NO witness."""
    trs = trs if trs is not None else result.problem
    if result.outcome == FAIL:
        return True
    if result.outcome == NO:
        if len(result.witness) != 1:
            return False
        w = result.witness[0]
        if not isinstance(w, NonJoinWitness) or not _peak_valid(w.peak, trs):
            return False
        if not (replay(w.peak.left, w.left_steps, trs) and replay(w.peak.right, w.right_steps, trs)):
            return False
        end_l = w.left_steps[-1].target if w.left_steps else w.peak.left
        end_r = w.right_steps[-1].target if w.right_steps else w.peak.right
        if end_l != w.left or end_r != w.right:
            return False
        fl, fr = ground_freeze(w.left), ground_freeze(w.right)
        if w.method == "tcap":
            return tcap_nonjoinable(fl, fr, trs)
        if w.method == "nf":
            return nf_nonjoinable(fl, fr, trs)
        return False
    for w in result.witness:
        if not isinstance(w, JoinWitness):
            return False
        if not _peak_valid(w.peak, trs) or w.join.left != w.peak.left or w.join.right != w.peak.right:
            return False
        if not replay_join(w.join, trs):
            return False
    return True


# ---------------------------------------------------------- redundant rules


@dataclass(frozen=True)
class RedundantConfig:
    js: bool = False
    rhs: bool = False
    develop: int | None = None
    size_cap: int = -1
    join_m: int = 0
    remove_depth: int = -1
    join_depth: int = 5
    max_new: int = 200

    def __post_init__(self):
        if self.develop is not None and self.develop < 1:
            raise ValueError("develop needs k >= 1")

    @property
    def empty(self) -> bool:
        return not (self.js or self.rhs or self.develop)


def tidy_rule(rule: Rule, trs: Trs) -> Rule:
    """Rename a derived rule's variables to plain identifiers, in order of first occurrence."""
    taken = {s.name for s in trs.signature}
    pool = sorted(v for v in trs.variables if v not in taken)
    fresh = (f"z{i}" for i in itertools.count(1))
    mapping: dict[str, Term] = {}
    for name in var_occurrences(rule.lhs):
        if name not in mapping:
            if pool:
                mapping[name] = Var(pool.pop(0))
            else:
                cand = next(fresh)
                while cand in taken:
                    cand = next(fresh)
                mapping[name] = Var(cand)
    return Rule(apply_subst(rule.lhs, mapping), apply_subst(rule.rhs, mapping))


def _acceptable(lhs: Term, rhs: Term, cfg: RedundantConfig) -> bool:
    if type(lhs) is Var or lhs == rhs or not vars_of(rhs) <= vars_of(lhs):
        return False
    return cfg.size_cap < 0 or rhs.size < cfg.size_cap


def _reaches(lhs: Term, rhs: Term, trs: Trs, depth: int) -> bool:
    return rhs in reach(lhs, trs, depth, UNBOUNDED, DEFAULT_MAX_TERMS).pred


def _candidates(trs: Trs, cfg: RedundantConfig):
    """Yield ``(lhs, rhs, derivation length bound)`` for each proposed rule."""
    if cfg.js and cfg.join_m >= 0:
        for cp in critical_pairs(trs):
            status, join = find_join(cp.left, cp.right, trs, cfg.join_depth)
            if status is not JoinStatus.JOINABLE:
                continue
            best = len(join.left_steps) + len(join.right_steps)
            ra = reach(cp.left, trs, best + cfg.join_m)
            rb = reach(cp.right, trs, best + cfg.join_m)
            meets = sorted(
                ((ra.dist[u] + rb.dist[u], ra.dist[u], u) for u in ra.dist if u in rb.dist
                 and ra.dist[u] + rb.dist[u] <= best + cfg.join_m),
                key=lambda m: m[:2],
            )
            for _, da, u in meets:
                yield cp.peak, u, 1 + da
    if cfg.rhs:
        for rule in trs.rules:
            checkpoint()
            for r in one_step_reducts(rule.rhs, trs):
                yield rule.lhs, r.term, 2
    if cfg.develop:
        for cp in critical_pairs(trs):
            for side in (cp.left, cp.right):
                rs = reach(side, trs, cfg.develop, UNBOUNDED, cfg.max_new)
                for u, d in rs.dist.items():
                    if d >= 1:
                        yield cp.peak, u, 1 + d


def redundant_add(trs: Trs, cfg: RedundantConfig) -> Trs:
    """Add rules ``l -> r`` with ``l ->* r``; returns ``trs`` itself if nothing is added."""
    if cfg.empty:
        return trs
    rules = list(trs.rules)
    seen = set(rules)
    added = 0
    for lhs, rhs, bound in _candidates(trs, cfg):
        if added >= cfg.max_new:
            break
        if not _acceptable(lhs, rhs, cfg):
            continue
        rule = tidy_rule(Rule(lhs, rhs), trs)
        if rule in seen:
            continue
        if not _reaches(lhs, rhs, trs, bound):
            continue
        seen.add(rule)
        rules.append(rule)
        added += 1
    if not added:
        return trs
    out = Trs(tuple(rules), trs.variables | {v for r in rules for v in vars_of(r.lhs)}, trs.name)
    if cfg.remove_depth != -1:
        out = redundant_remove(out, cfg.remove_depth)
    return out


def redundant_remove(trs: Trs, n: int = 2) -> Trs:
    """Drop, greedily in rule order, each rule ``l -> r`` with ``l ->^{<=n} r`` in the rest."""
    rules = list(trs.rules)
    i = 0
    while i < len(rules):
        rest = trs.with_rules(rules[:i] + rules[i + 1:])
        rule = rules[i]
        if rule.rhs in reach(rule.lhs, rest, n, UNBOUNDED, DEFAULT_MAX_TERMS).pred:
            rules.pop(i)
        else:
            i += 1
    if len(rules) == len(trs.rules):
        return trs
    return trs.with_rules(rules)
