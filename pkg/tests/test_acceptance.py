"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed as the tests run and repeated in the terminal summary.
"""

import random
import time

import pytest

import synthetic_bench as bench
from conftest import DIAMOND, GRAMLICH, OVERLAP, R1, TRS_A, TRS_B, record_criterion, term, trs
from helpers import brute_equivalent, naive_reach, naive_reducts, naive_subst, perturb_trs, random_term, rename_trs
from test_scheduler import exhaustive, random_instance
from test_strategy import SHRINK, random_strategy
from trsconf import processors as P
from trsconf.critical_pairs import critical_pairs
from trsconf.dataset import HUMAN, Problem, canonical_form, dedup
from trsconf.engine import default_strategy, eval_expression, eval_strategy
from trsconf.generator import GenConfig, generate
from trsconf.portfolio import Hyper, SyntheticRunner, grackle_loop, make_strategy
from trsconf.scheduler import best_schedule, covered
from trsconf.strategy import parse_strategy
from trsconf.terms import App, Rule, Trs, Var, vars_of
from trsconf.termination import LinearInterp, check_certificate, interp_orients, prove_termination

pytestmark = pytest.mark.acceptance


class Criterion:
    """Collects named checks; the report line lists the ones that failed."""

    def __init__(self, number):
        self.number = number
        self.failed = []
        self.notes = []
        self.start = time.monotonic()

    def check(self, name, ok):
        if not ok:
            self.failed.append(name)
        return ok

    def note(self, text):
        self.notes.append(text)

    def finish(self):
        elapsed = time.monotonic() - self.start
        detail = "; ".join(self.notes + [f"{elapsed:.1f}s"])
        if self.failed:
            detail = "failed: " + ", ".join(self.failed) + " | " + detail
        record_criterion(self.number, not self.failed, detail)
        assert not self.failed, self.failed


def _timed(fn):
    t = time.monotonic()
    value = fn()
    return value, time.monotonic() - t


# ------------------------------------------------------------- criterion 1


def test_criterion_1_examples():
    c = Criterion(1)
    o, dt = _timed(lambda: eval_strategy(default_strategy(), trs(GRAMLICH), 10))
    c.check("Gramlich NO", o.answer == "NO" and P.validate_witness(o.proof) and dt < 1)

    b = trs(TRS_B)
    o, dt = _timed(lambda: eval_expression("nonconfluence -steps 2 -var -nf", b, 10))
    c.check("TRS B NO", o.answer == "NO" and P.validate_witness(o.proof) and dt < 1)
    for steps in (3, 4):
        o = eval_expression(f"nonconfluence -steps {steps} -var -nf", b, 10)
        c.check(f"TRS B NO with {steps} steps", o.answer == "NO" and P.validate_witness(o.proof))

    a = trs(TRS_A)
    res, dt1 = _timed(lambda: prove_termination(a))
    o, dt2 = _timed(lambda: eval_expression("kb!", a, 10))
    c.check("TRS A unknown", res.status == "unknown" and o.answer == "MAYBE" and dt1 + dt2 < 1)

    r1 = trs(R1)
    res, dt = _timed(lambda: prove_termination(r1))
    c.check("R1 terminating", res.terminating and check_certificate(r1, res.certificate) and dt < 1)
    c.check("R1 interpretation", interp_orients(r1, LinearInterp({"f": (1, (2, 1))})))

    cps, dt = _timed(lambda: critical_pairs(trs(OVERLAP)))
    c.check("overlap CP", [(cp.left, cp.right, cp.peak) for cp in cps]
            == [(term("f(a,c)"), term("f(b,b)"), term("f(a,g(b))"))] and dt < 1)
    c.finish()


# ------------------------------------------------------------- criterion 2

ORACLE_DEPTH = 6


def closure(t, rules, depth=ORACLE_DEPTH, cap=400):
    """Rewrite graph from ``t`` to ``depth``; ``complete`` when it is closed under rewriting."""
    graph = {t: None}
    frontier = [t]
    for _ in range(depth):
        nxt = []
        for u in frontier:
            graph[u] = naive_reducts(u, rules)
            for r in graph[u]:
                if r not in graph:
                    graph[r] = None
                    nxt.append(r)
        if len(graph) > cap:
            return graph, False
        frontier = nxt
    for u in frontier:
        graph[u] = naive_reducts(u, rules)
    return graph, all(r in graph for rs in graph.values() for r in rs)


def refutes_confluence(source, rules):
    """True when the explored graph proves two diverging reducts of ``source`` never meet."""
    graph, complete = closure(source, rules)
    if len({u for u, rs in graph.items() if rs is not None and not rs}) > 1:
        return True
    if not complete or len(graph) > 120:
        return False
    reach = {}
    for u in graph:
        seen, stack = {u}, [u]
        while stack:
            for r in graph[stack.pop()]:
                if r not in seen:
                    seen.add(r)
                    stack.append(r)
        reach[u] = seen
    nodes = list(graph)
    return any(not reach[a] & reach[b] for i, a in enumerate(nodes) for b in nodes[i + 1:])


def peak_sources(system, rng):
    """Left-hand sides, critical peaks and lhs instances over the system's ground subterms."""
    out = {r.lhs for r in system.rules} | {cp.peak for cp in critical_pairs(system)}
    consts = [App(s.name, ()) for s in system.signature if s.arity == 0] or [App("k0", ())]
    pool = consts + [t for r in system.rules for t in (r.lhs, r.rhs) if not vars_of(t)]
    for r in system.rules:
        names = sorted(vars_of(r.lhs))
        for _ in range(6):
            out.add(naive_subst(r.lhs, {v: rng.choice(pool) for v in names}))
    return sorted(out, key=str)


def meets_within(a, b, rules):
    ga, _ = closure(a, rules, cap=3000)
    gb, _ = closure(b, rules, cap=3000)
    return bool(set(ga) & set(gb))


def test_criterion_2_oracle_equivalence():
    c = Criterion(2)
    cfg = GenConfig(max_funs=3, max_consts=2, max_vars=2, max_rules=4, max_term_size=7, seed=2024)
    rng = random.Random(0)
    d = default_strategy()
    counts = {"YES": 0, "NO": 0, "MAYBE": 0}
    contradictions, refuted_no = [], 0
    for system, info in generate(cfg, 500):
        o = eval_strategy(d, system, 2)
        counts[o.answer] += 1
        if o.answer == "YES":
            if any(refutes_confluence(s, system.rules) for s in peak_sources(system, rng)):
                contradictions.append(info.name)
        elif o.answer == "NO":
            w = o.proof.witness[0]
            if not P.validate_witness(o.proof) or meets_within(w.left, w.right, o.proof.problem.rules):
                contradictions.append(info.name)
            refuted_no += any(refutes_confluence(s, system.rules) for s in peak_sources(system, rng))
    c.check("no contradictions", not contradictions)
    c.check("under 5 min", time.monotonic() - c.start < 300)
    c.note(f"{counts['YES']} YES, {counts['NO']} NO, {counts['MAYBE']} MAYBE, "
           f"{len(contradictions)} contradictions, oracle refutes {refuted_no}/{counts['NO']} NO independently")
    c.finish()


# ------------------------------------------------------------- criterion 3


def _weight(t, w):
    return w[t.fn] + sum(_weight(a, w) for a in t.args)


def _positions(t, p=()):
    yield p, t
    for i, a in enumerate(t.args):
        yield from _positions(a, p + (i,))


def _replace(t, p, s):
    if not p:
        return s
    i = p[0]
    return App(t.fn, t.args[:i] + (_replace(t.args[i], p[1:], s),) + t.args[i + 1:])


def ground_acyclic(rng):
    """Ground rules oriented by a positive symbol weight, so every step lowers the total weight."""
    funs = [("f", 1), ("g", 2)][: rng.randint(1, 2)]
    consts = ["a", "b", "c"][: rng.randint(2, 3)]
    w = {n: rng.randint(1, 3) for n, _ in funs}
    w.update({name: rng.randint(1, 4) for name in consts})
    rules = set()
    want = rng.randint(2, 5)
    while len(rules) < want:
        s, t = random_term(rng, funs, consts, [], 2), random_term(rng, funs, consts, [], 2)
        if _weight(s, w) > _weight(t, w):
            rules.add(Rule(s, t))
        elif _weight(t, w) > _weight(s, w):
            rules.add(Rule(t, s))
    return Trs(tuple(sorted(rules, key=str)))


def newman_confluent(system):
    """Every one-step peak between ground rules joins; with termination that is confluence."""
    for i, ri in enumerate(system.rules):
        for j, rj in enumerate(system.rules):
            for p, sub in _positions(ri.lhs):
                if sub != rj.lhs or (i == j and p == ()):
                    continue
                left = naive_reach(ri.rhs, system.rules, 200, 100_000)
                right = naive_reach(_replace(ri.lhs, p, rj.rhs), system.rules, 200, 100_000)
                if not left & right:
                    return False
    return True


def test_criterion_3_newman():
    c = Criterion(3)
    rng = random.Random(11)
    systems = set()
    while len(systems) < 200:
        systems.add(ground_acyclic(rng))
    decided = agree = confluent = 0
    for system in sorted(systems, key=str):
        truth = newman_confluent(system)
        confluent += truth
        r = P.proc_knuth_bendix(system)
        if r.outcome in ("YES", "NO"):
            decided += 1
            agree += (r.outcome == "YES") == truth
            c.check("witness replays", P.validate_witness(r))
    c.check("all decided agree", agree == decided)
    c.check("some decided", decided > 0)
    c.note(f"{decided}/200 decided, {agree} agree, {confluent} confluent by the oracle")
    c.finish()


# ------------------------------------------------------------- criterion 4


def _size(t):
    return 1 if isinstance(t, Var) else 1 + sum(_size(a) for a in t.args)


def test_criterion_4_generator():
    c = Criterion(4)
    n = forced = 0
    sizes_ok = wf_ok = True
    for system, info in generate(GenConfig(seed=2024), 10_000):
        n += 1
        forced += info.forced_left_linear
        for rule in system.rules:
            sizes_ok &= _size(rule.lhs) <= 15 and _size(rule.rhs) <= 15
            wf_ok &= isinstance(rule.lhs, App) and vars_of(rule.rhs) <= vars_of(rule.lhs)
    frac = forced / n
    c.check("forced left-linear fraction", abs(frac - 0.6) <= 0.015)
    c.check("term sizes", sizes_ok)
    c.check("well-formed rules", wf_ok)
    c.check("under 60 s", time.monotonic() - c.start < 60)
    c.note(f"forced left-linear {frac:.4f} over {n}")
    c.finish()


# ------------------------------------------------------------- criterion 5


def test_criterion_5_strategy_laws():
    c = Criterion(5)
    rng = random.Random(5)
    small = GenConfig(max_funs=3, max_consts=2, max_vars=2, max_rules=3, max_term_size=6, seed=5)
    mismatches = 0
    for system, _ in generate(small, 100):
        s = random_strategy(rng)
        plus = eval_expression(f"(({s})+)!", system, 10)
        star_seq = eval_expression(f"(({s})*; {s})!", system, 10)
        mismatches += plus.answer != star_seq.answer
    c.check("s+ equals s*;s", mismatches == 0)

    shrink, step = trs(SHRINK), "(redundant_remove -depth 2)"
    c.check("s+ differs from s;s*",
            eval_expression(f"({step}+ ; kb) | fail", shrink).answer == "MAYBE"
            and eval_expression(f"({step} ; {step}* ; kb) | fail", shrink).answer == "YES")

    slow, worst = trs(TRS_A), 0.0
    for _ in range(100):
        t = time.monotonic()
        eval_expression("(nonconfluence -steps 50 -var -nf)[0.1]", slow, 5)
        worst = max(worst, time.monotonic() - t)
    c.check("s[0.1] within 0.2 s", worst <= 0.2)
    c.note(f"{mismatches} mismatches over 100 pairs; worst s[0.1] {worst:.3f}s")
    c.finish()


# ------------------------------------------------------------- criterion 6


def test_criterion_6_grackle_synthetic():
    c = Criterion(6)
    sp = bench.space()
    c.check("six params of at most five values", len(sp.params) == 6 and all(len(p.domain) <= 5 for p in sp.params))
    # the planted optimum: one specialist per group, each mastering its group alone
    specialists = [dict(sp.defaults(), **{f"lvl{k}": "4"}) for k in (1, 2, 3)]
    groups = [{p for p in bench.SOLVABLE if bench.answer(a, p)[0] == "YES" and not p.startswith("g0")}
              for a in specialists]
    c.check("three disjoint mastered sets", all(groups) and not (groups[0] & groups[1] or groups[1] & groups[2]
                                                                  or groups[0] & groups[2]))
    start = [p for p in bench.SOLVABLE if bench.answer(sp.defaults(), p)[0] == "YES"]
    c.check("defaults at most 60%", len(start) / len(bench.SOLVABLE) <= 0.6)

    st = grackle_loop([make_strategy(sp, sp.defaults())], bench.PROBLEMS, Hyper(eval_limit=10, max_evals=200),
                      SyntheticRunner(bench.answer), random.Random(0), sp)
    coverage = len(st.covered() & set(bench.SOLVABLE)) / len(bench.SOLVABLE)
    forbidden = sum(sp.is_forbidden(dict(a)) for a in st.visited)
    c.check("coverage 95%", coverage >= 0.95)
    c.check("at most 200 evaluations", len(st.evaluated) <= 200)
    c.check("no forbidden visits", forbidden == 0)
    c.check("under 2 min", time.monotonic() - c.start < 120)
    c.note(f"start {len(start) / len(bench.SOLVABLE):.2f}, coverage {coverage:.2f} "
           f"after {len(st.evaluated)} evaluations, {forbidden} forbidden")
    c.finish()


# ------------------------------------------------------------- criterion 7


def test_criterion_7_scheduler():
    c = Criterion(7)
    rng = random.Random(7)
    exact = below_single = 0
    for _ in range(200):
        times, pattern = random_instance(rng)
        s = best_schedule(times, 60, 100, random.Random(rng.random()), patterns=[pattern])
        opt = exhaustive(times, [pattern, (60.0,)])
        single = max((len(covered([(sid, 60)], times)) for sid in times), default=0)
        below_single += len(s.solved) < single
        exact += len(s.solved) == opt
    c.check("95% optimal", exact >= 190)
    c.check("never below best single", below_single == 0)
    c.check("under 30 s", time.monotonic() - c.start < 30)
    c.note(f"{exact}/200 optimal, {below_single} below best single")
    c.finish()


# ------------------------------------------------------------- criterion 8


def test_criterion_8_dedup():
    c = Criterion(8)
    rng = random.Random(8)
    systems = [s for s, _ in generate(GenConfig(seed=88), 1000)]
    missed = sum(canonical_form(rename_trs(s, rng)) != canonical_form(s) for s in systems)
    c.check("renamings detected", missed == 0)

    small = GenConfig(max_funs=4, max_consts=3, max_vars=3, max_rules=4, max_term_size=8, seed=89)
    false_merges = unverified = 0
    for s, _ in generate(small, 1000):
        p = perturb_trs(s, rng)
        if canonical_form(p) == canonical_form(s):
            truth = brute_equivalent(s, p)
            false_merges += truth is not True
            unverified += truth is None
    c.check("no false merges", false_merges == 0)

    wrong = 0
    problems = []
    for i, s in enumerate(systems[:100]):
        problems += [Problem(f"g{i:03d}a", s), Problem(f"z{i:03d}h", rename_trs(s, rng), HUMAN),
                     Problem(f"g{i:03d}b", rename_trs(s, rng))]
    classes, survivors = dedup(problems)
    survivors = set(survivors)
    for cl in classes:
        humans = [m for m in cl.members if m.startswith("z")]
        wrong += not humans or not any(h in survivors for h in humans)
        wrong += sum(m in survivors for m in cl.members) != 1
    c.check("human survivors", wrong == 0)
    c.note(f"{missed} missed renamings, {false_merges} false merges ({unverified} unverifiable), "
           f"{len(classes)} mixed classes, {wrong} bad survivors")
    c.finish()


# ------------------------------------------------------------- criterion 9

AUDIT_STRATEGIES = [
    "orthogonal!",
    "kb!",
    "(closed -strongly 3)!",
    "(nonconfluence -steps 2 -fun -tcap)!",
    "(nonconfluence -steps 2 -var -nf)!",
    "(redundant -js -size 12 ; (kb | orthogonal | closed -strongly 3))!",
    "(redundant_remove -depth 2 ; (orthogonal | kb))!",
    "(redundant -rhs -size 12 ; nonconfluence -steps 2 -var -nf -tcap)!",
]


def test_criterion_9_soundness_audit():
    c = Criterion(9)
    corpus = {name: trs(text) for name, text in
              [("gramlich", GRAMLICH), ("a", TRS_A), ("b", TRS_B), ("r1", R1), ("overlap", OVERLAP),
               ("diamond", DIAMOND), ("shrink", SHRINK)]}
    small = GenConfig(max_funs=3, max_consts=2, max_vars=2, max_rules=4, max_term_size=7, seed=99)
    corpus.update({info.name: s for s, info in generate(small, 120)})
    corpus.update({info.name: s for s, info in generate(GenConfig(seed=98, max_rules=6), 30)})
    strategies = [(text, parse_strategy(f"S = {text}")) for text in AUDIT_STRATEGIES]
    strategies.append(("default", default_strategy()))
    conflicts, bad_witness, decided = [], [], 0
    for name, system in corpus.items():
        answers = set()
        for label, defs in strategies:
            o = eval_strategy(defs, system, 2)
            if o.answer in ("YES", "NO"):
                decided += 1
                answers.add(o.answer)
                if not (P.validate_witness(o.proof) and o.certificate):
                    bad_witness.append((name, label))
        if answers == {"YES", "NO"}:
            conflicts.append(name)
    c.check("no YES/NO conflict", not conflicts)
    c.check("witnesses replay", not bad_witness)
    c.note(f"{len(corpus)} problems x {len(strategies)} strategies, {decided} decided, "
           f"{len(conflicts)} conflicts, {len(bad_witness)} bad witnesses")
    c.finish()
