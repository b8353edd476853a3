"""Termination via LPO, KBO and linear interpretations over the naturals."""

from __future__ import annotations

import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

from .runtime import Timeout, activate, checkpoint, deadline_ctx
from .terms import App, Symbol, Term, Trs, Var, subterms, var_occurrences, vars_of

EXHAUSTIVE_PREC_LIMIT = 6
GREEDY_RESTARTS = 100
INTERP_EXHAUSTIVE_CAP = 20000
KBO_WEIGHT_CAP = 4096


# ------------------------------------------------------------------ orders


@dataclass(frozen=True)
class Precedence:
    """Symbol ranks; a higher rank is greater.  Unranked symbols are incomparable."""

    rank: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def from_order(cls, symbols_high_to_low) -> "Precedence":
        syms = list(symbols_high_to_low)
        return cls({s: len(syms) - i for i, s in enumerate(syms)})

    def greater(self, f: str, g: str) -> bool:
        rf, rg = self.rank.get(f), self.rank.get(g)
        return rf is not None and rg is not None and rf > rg

    def __hash__(self):
        return hash(tuple(sorted(self.rank.items())))


def lpo_greater(s: Term, t: Term, prec: Precedence) -> bool:
    if type(s) is Var:
        return False
    if type(t) is Var:
        return t.name in vars_of(s)
    for si in s.args:
        if si == t or lpo_greater(si, t, prec):
            return True
    if s.fn == t.fn and len(s.args) == len(t.args):
        if not all(lpo_greater(s, tj, prec) for tj in t.args):
            return False
        for si, ti in zip(s.args, t.args):
            if si != ti:
                return lpo_greater(si, ti, prec)
        return False
    if prec.greater(s.fn, t.fn):
        return all(lpo_greater(s, tj, prec) for tj in t.args)
    return False


@dataclass(frozen=True)
class WeightFn:
    w0: int
    weights: Mapping[Symbol, int]

    def __hash__(self):
        return hash((self.w0, tuple(sorted(self.weights.items()))))

    def by_name(self) -> dict[str, int]:
        return {s.name: w for s, w in self.weights.items()}


def check_admissible(w: WeightFn, prec: Precedence) -> None:
    if w.w0 <= 0:
        raise ValueError("w0 must be positive")
    for sym, weight in w.weights.items():
        if weight < 0:
            raise ValueError(f"negative weight for {sym.name}")
        if sym.arity == 0 and weight < w.w0:
            raise ValueError(f"constant {sym.name} has weight {weight} < w0 = {w.w0}")
        if sym.arity == 1 and weight == 0:
            others = [o.name for o in w.weights if o.name != sym.name]
            if not all(prec.greater(sym.name, o) for o in others):
                raise ValueError(f"unary symbol {sym.name} of weight 0 is not maximal in the precedence")


def _kbo_weight(t: Term, w: dict[str, int], w0: int) -> int:
    if type(t) is Var:
        return w0
    return w[t.fn] + sum(_kbo_weight(a, w, w0) for a in t.args)


def _kbo(s: Term, t: Term, prec: Precedence, w: dict[str, int], w0: int) -> bool:
    if type(s) is Var:
        return False
    cs, ct = Counter(var_occurrences(s)), Counter(var_occurrences(t))
    if any(n > cs[x] for x, n in ct.items()):
        return False
    ws, wt = _kbo_weight(s, w, w0), _kbo_weight(t, w, w0)
    if ws > wt:
        return True
    if ws < wt:
        return False
    if type(t) is Var:
        # s = f^n(t) with f unary, n >= 1
        u = s
        while type(u) is App and len(u.args) == 1:
            u = u.args[0]
        return u == t and s != t
    if s.fn != t.fn or len(s.args) != len(t.args):
        return prec.greater(s.fn, t.fn)
    for si, ti in zip(s.args, t.args):
        if si != ti:
            return _kbo(si, ti, prec, w, w0)
    return False


def kbo_greater(s: Term, t: Term, prec: Precedence, w: WeightFn) -> bool:
    check_admissible(w, prec)
    names = w.by_name()
    for _, sub in itertools.chain(subterms(s), subterms(t)):
        if type(sub) is App and sub.fn not in names:
            raise ValueError(f"no weight for symbol {sub.fn}")
    return _kbo(s, t, prec, names, w.w0)


# --------------------------------------------------------- interpretations


@dataclass(frozen=True)
class LinearInterp:
    """``f(x1..xn) = a0 + a1*x1 + ... + an*xn`` per symbol, naturals, ai >= 1."""

    coeffs: Mapping[str, tuple[int, tuple[int, ...]]]

    def __post_init__(self):
        for f, (a0, ais) in self.coeffs.items():
            if a0 < 0 or any(a < 1 for a in ais):
                raise ValueError(f"interpretation of {f} is not strictly monotone over the naturals")

    def __hash__(self):
        return hash(tuple(sorted(self.coeffs.items())))

    def __str__(self):
        parts = []
        for f in sorted(self.coeffs):
            a0, ais = self.coeffs[f]
            xs = [f"x{i + 1}" for i in range(len(ais))]
            body = " + ".join([f"{a}*{x}" if a != 1 else x for a, x in zip(ais, xs)] + [str(a0)])
            parts.append(f"{f}({','.join(xs)}) = {body}")
        return "; ".join(parts)


def interp_value(t: Term, interp: LinearInterp, assignment: Mapping[str, int]) -> int:
    if type(t) is Var:
        if t.name not in assignment:
            raise KeyError(f"no value assigned to variable {t.name}")
        return assignment[t.name]
    a0, ais = interp.coeffs[t.fn]
    return a0 + sum(a * interp_value(x, interp, assignment) for a, x in zip(ais, t.args))


def interp_poly(t: Term, interp: Mapping[str, tuple[int, tuple[int, ...]]]) -> tuple[int, dict[str, int]]:
    """Linear polynomial ``(constant, {var: coefficient})`` of a term."""
    if type(t) is Var:
        return 0, {t.name: 1}
    a0, ais = interp[t.fn]
    const = a0
    coefs: dict[str, int] = {}
    for a, x in zip(ais, t.args):
        c, cs = interp_poly(x, interp)
        const += a * c
        for v, k in cs.items():
            coefs[v] = coefs.get(v, 0) + a * k
    return const, coefs


def poly_greater(lhs: tuple[int, dict], rhs: tuple[int, dict]) -> bool:
    """Sufficient test for ``lhs > rhs`` at every natural assignment."""
    (cl, vl), (cr, vr) = lhs, rhs
    if any(vl.get(v, 0) < k for v, k in vr.items()):
        return False
    return cl > cr


def interp_orients(trs: Trs, interp: LinearInterp) -> bool:
    coeffs = interp.coeffs
    return all(poly_greater(interp_poly(r.lhs, coeffs), interp_poly(r.rhs, coeffs)) for r in trs.rules)


# ------------------------------------------------------------ certificates


@dataclass(frozen=True)
class LpoCert:
    precedence: Precedence

    def __str__(self):
        order = sorted(self.precedence.rank, key=lambda s: -self.precedence.rank[s])
        return "LPO with precedence " + " > ".join(order)


@dataclass(frozen=True)
class KboCert:
    precedence: Precedence
    weights: WeightFn

    def __str__(self):
        order = sorted(self.precedence.rank, key=lambda s: -self.precedence.rank[s])
        ws = ", ".join(f"w({s.name})={w}" for s, w in sorted(self.weights.weights.items()))
        return f"KBO with precedence {' > '.join(order)}, w0={self.weights.w0}, {ws}"


@dataclass(frozen=True)
class InterpCert:
    interp: LinearInterp

    def __str__(self):
        return f"linear interpretation {self.interp}"


@dataclass(frozen=True)
class EmptyCert:
    def __str__(self):
        return "no rules"


Certificate = LpoCert | KboCert | InterpCert | EmptyCert


@dataclass(frozen=True)
class TermResult:
    status: str  # "terminating" or "unknown"
    certificate: Certificate | None = None

    @property
    def terminating(self) -> bool:
        return self.status == "terminating"


def check_certificate(trs: Trs, cert: Certificate) -> bool:
    """Independent re-check that every rule decreases under the certified order."""
    if isinstance(cert, EmptyCert):
        return not trs.rules
    if isinstance(cert, LpoCert):
        return all(lpo_greater(r.lhs, r.rhs, cert.precedence) for r in trs.rules)
    if isinstance(cert, KboCert):
        try:
            return all(kbo_greater(r.lhs, r.rhs, cert.precedence, cert.weights) for r in trs.rules)
        except ValueError:
            return False
    if isinstance(cert, InterpCert):
        for r in trs.rules:
            lhs = interp_poly(r.lhs, cert.interp.coeffs)
            rhs = interp_poly(r.rhs, cert.interp.coeffs)
            if not poly_greater(lhs, rhs):
                return False
        return True
    return False


# ------------------------------------------------------------------ search


@dataclass(frozen=True)
class TermBudget:
    lpo: bool = True
    kbo: bool = True
    interp: bool = True
    coeff_bound: int = 3
    weight_bound: int = 3
    time_cap: float | None = None
    seed: int = 0


def _obviously_looping(trs: Trs) -> bool:
    for r in trs.rules:
        if any(sub == r.lhs for _, sub in subterms(r.rhs)):
            return True
    return False


def _precedences(symbols: list[str], oriented, rng: random.Random):
    """Yield total precedences: all of them for small signatures, else greedy climbs.

    ``oriented(prec)`` counts the rules a precedence orients; the climb moves one
    symbol at a time to the position that orients most rules.
    """
    if len(symbols) <= EXHAUSTIVE_PREC_LIMIT:
        for perm in itertools.permutations(symbols):
            yield Precedence.from_order(perm)
        return
    for _ in range(GREEDY_RESTARTS):
        order = symbols[:]
        rng.shuffle(order)
        best = oriented(Precedence.from_order(order))
        improved = True
        while improved:
            improved = False
            for sym in list(order):
                checkpoint()
                base = [s for s in order if s != sym]
                for k in range(len(base) + 1):
                    cand = base[:k] + [sym] + base[k:]
                    score = oriented(Precedence.from_order(cand))
                    if score > best:
                        order, best, improved = cand, score, True
                        break
        yield Precedence.from_order(order)


def _search_lpo(trs: Trs, symbols: list[str], rng: random.Random) -> LpoCert | None:
    def oriented(prec):
        checkpoint()
        return sum(lpo_greater(r.lhs, r.rhs, prec) for r in trs.rules)

    n = len(trs.rules)
    for prec in _precedences(symbols, oriented, rng):
        if oriented(prec) == n:
            return LpoCert(prec)
    return None


def _weight_candidates(sig: list[Symbol], bound: int, rng: random.Random):
    domains = []
    for sym in sig:
        lo = 1 if sym.arity == 0 else 0
        domains.append(range(lo, max(lo, bound) + 1))
    total = 1
    for d in domains:
        total *= len(d)
    if total <= KBO_WEIGHT_CAP:
        yield from itertools.product(*domains)
        return
    seen = set()
    for _ in range(KBO_WEIGHT_CAP):
        ws = tuple(rng.choice(d) for d in domains)
        if ws not in seen:
            seen.add(ws)
            yield ws


def _search_kbo(trs: Trs, sig: list[Symbol], bound: int, rng: random.Random) -> KboCert | None:
    for r in trs.rules:
        cl, cr = Counter(var_occurrences(r.lhs)), Counter(var_occurrences(r.rhs))
        if any(k > cl[x] for x, k in cr.items()):
            return None
    names = [s.name for s in sig]
    for ws in _weight_candidates(sig, bound, rng):
        checkpoint()
        w = dict(zip(names, ws))
        zero_unary = [s.name for s, x in zip(sig, ws) if s.arity == 1 and x == 0]
        if len(zero_unary) > 1:
            continue
        diffs = [_kbo_weight(r.lhs, w, 1) - _kbo_weight(r.rhs, w, 1) for r in trs.rules]
        if any(d < 0 for d in diffs):
            continue
        wf = WeightFn(1, dict(zip(sig, ws)))
        top = zero_unary[0] if zero_unary else None

        def oriented(prec, w=w):
            checkpoint()
            return sum(_kbo(r.lhs, r.rhs, prec, w, 1) for r in trs.rules)

        rest = [s for s in names if s != top]
        for prec in _precedences(rest, oriented, rng):
            if top is not None:
                prec = Precedence({**prec.rank, top: len(names) + 1})
            if oriented(prec) == len(trs.rules):
                return KboCert(prec, wf)
            if all(d > 0 for d in diffs):
                break
    return None


def _search_interp(trs: Trs, sig: list[Symbol], bound: int, rng: random.Random) -> InterpCert | None:
    choices = []
    for sym in sig:
        consts = range(0, bound + 1)
        mults = list(itertools.product(range(1, max(1, bound) + 1), repeat=sym.arity))
        choices.append([(a0, m) for a0 in consts for m in mults] if sym.arity else [(a0, ()) for a0 in consts])
    total = 1
    for c in choices:
        total *= len(c)

    def candidates():
        if total <= INTERP_EXHAUSTIVE_CAP:
            yield from itertools.product(*choices)
        else:
            for _ in range(INTERP_EXHAUSTIVE_CAP):
                yield tuple(rng.choice(c) for c in choices)

    names = [s.name for s in sig]
    for cand in candidates():
        checkpoint()
        coeffs = dict(zip(names, cand))
        if all(poly_greater(interp_poly(r.lhs, coeffs), interp_poly(r.rhs, coeffs)) for r in trs.rules):
            return InterpCert(LinearInterp(coeffs))
    return None


def _prove(trs: Trs, budget: TermBudget) -> TermResult:
    if not trs.rules:
        return TermResult("terminating", EmptyCert())
    if _obviously_looping(trs):
        return TermResult("unknown")
    sig = sorted(trs.signature)
    rng = random.Random(budget.seed)
    if budget.lpo:
        cert = _search_lpo(trs, [s.name for s in sig], rng)
        if cert:
            return TermResult("terminating", cert)
    if budget.kbo:
        cert = _search_kbo(trs, sig, budget.weight_bound, rng)
        if cert:
            return TermResult("terminating", cert)
    if budget.interp:
        cert = _search_interp(trs, sig, budget.coeff_bound, rng)
        if cert:
            return TermResult("terminating", cert)
    return TermResult("unknown")


def prove_termination(trs: Trs, budget: TermBudget = TermBudget()) -> TermResult:
    if budget.time_cap is None:
        return _prove(trs, budget)
    ctx = deadline_ctx(budget.time_cap)
    try:
        with activate(ctx):
            return _prove(trs, budget)
    except Timeout as exc:
        if exc.ctx is ctx:
            return TermResult("unknown")
        raise
