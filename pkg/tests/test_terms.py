import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import term, trs
from helpers import naive_reach, naive_reducts, random_term
from trsconf.rewriting import (
    JoinStatus,
    bounded_join,
    find_join,
    is_normal_form,
    normalize,
    one_step_reducts,
    reach,
    replay_join,
    rewrite_at,
    syntactic_predicates,
)
from trsconf.terms import (
    App,
    Rule,
    Trs,
    Var,
    apply_subst,
    ground_freeze,
    match_term,
    rename_rule,
    replace_at,
    subterm_at,
    unify,
    vars_of,
)
from trsconf.trs_io import TrsParseError, parse_trs, print_trs

FUNS = [("f", 2), ("g", 1), ("h", 1)]
CONSTS = ["a", "b"]
VARS = ["x", "y", "z"]


@st.composite
def terms(draw, variables=VARS, depth=4):
    seed = draw(st.integers(0, 10**9))
    return random_term(random.Random(seed), FUNS, CONSTS, variables, depth)


class TestVarsOf:
    def test_gramlich_lhs(self):
        assert vars_of(term("f(g(x),h(x))")) == {"x"}

    def test_constant(self):
        assert vars_of(term("a")) == set()

    def test_two_vars(self):
        assert vars_of(term("f(x,g(y))")) == {"x", "y"}


class TestSubstitution:
    def test_overlap_instance(self):
        assert apply_subst(term("f(a,g(x))"), {"x": term("b")}) == term("f(a,g(b))")

    def test_empty_substitution_is_identity(self):
        t = term("f(x,g(y))")
        assert apply_subst(t, {}) == t

    def test_nonlinear_instance(self):
        assert apply_subst(term("f(x,x)"), {"x": term("c")}) == term("f(c,c)")


class TestMatch:
    def test_ground_match(self):
        assert match_term(term("g(b)"), term("g(b)")) == {}

    def test_nonlinear_pattern_clash(self):
        assert match_term(term("f(x,x)"), term("f(c,g(c))")) is None

    def test_variable_pattern(self):
        t = term("f(a,g(b))")
        assert match_term(Var("x"), t) == {"x": t}

    @settings(max_examples=200, deadline=None)
    @given(terms(), terms(variables=[], depth=3))
    def test_soundness(self, p, s):
        sigma = match_term(p, s)
        if sigma is not None:
            assert apply_subst(p, sigma) == s

    @settings(max_examples=200, deadline=None)
    @given(terms(), st.integers(0, 10**9))
    def test_matches_instances(self, p, seed):
        r = random.Random(seed)
        sigma = {v: random_term(r, FUNS, CONSTS, [], 2) for v in vars_of(p)}
        assert match_term(p, apply_subst(p, sigma)) is not None


class TestUnify:
    def test_overlap_unifier(self):
        assert unify(term("g(b)"), term("g(x)")) == {"x": term("b")}

    def test_occurs_check(self):
        assert unify(Var("x"), term("g(x)")) is None

    def test_renamed_apart_occurs_check(self):
        left = term("f(x,x)")
        right = apply_subst(term("f(x,g(x))"), {"x": Var("x'")})
        # x = x' and x' = g(x) leaves a cycle
        assert unify(left, right) is None

    @settings(max_examples=300, deadline=None)
    @given(terms(), terms(variables=["u", "v", "w"]))
    def test_soundness_and_idempotence(self, s, t):
        sigma = unify(s, t)
        if sigma is not None:
            assert apply_subst(s, sigma) == apply_subst(t, sigma)
            for v in sigma:
                assert apply_subst(apply_subst(Var(v), sigma), sigma) == apply_subst(Var(v), sigma)

    def test_completeness_on_planted_pairs(self):
        r = random.Random(7)
        counter = [0]

        def generalize(t, prefix):
            # replace random subterms by fresh variables; t stays an instance
            if r.random() < 0.25:
                counter[0] += 1
                return Var(f"{prefix}{counter[0]}")
            if isinstance(t, App):
                return App(t.fn, tuple(generalize(a, prefix) for a in t.args))
            return t

        for _ in range(10_000):
            common = random_term(r, FUNS, CONSTS, [], 4)
            s, t = generalize(common, "u"), generalize(common, "w")
            sigma = unify(s, t)
            assert sigma is not None
            assert apply_subst(s, sigma) == apply_subst(t, sigma)


class TestOneStepReducts:
    def test_gramlich_peak(self, gramlich):
        got = {r.term for r in one_step_reducts(term("f(g(b),h(b))"), gramlich)}
        assert term("a") in got
        assert term("f(d,h(b))") in got

    def test_normal_form(self, gramlich):
        assert one_step_reducts(term("a"), gramlich) == []
        assert is_normal_form(term("f(d,h(b))"), gramlich)

    def test_loop_rule(self, trs_b):
        rs = one_step_reducts(term("c"), trs_b)
        assert [(r.position, r.rule, r.term) for r in rs] == [((), 2, term("g(c)"))]

    def test_leftmost_outermost_order(self, diamond):
        t = term("f(a,a)")
        positions = [r.position for r in one_step_reducts(t, diamond)]
        assert positions == sorted(positions, key=lambda p: (len(p) > 0, p))

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 10**9))
    def test_against_naive_oracle(self, seed):
        r = random.Random(seed)
        rules = []
        while len(rules) < 3:
            lhs = random_term(r, FUNS, CONSTS, ["x", "y"], 2)
            if isinstance(lhs, Var):
                continue
            rhs = random_term(r, FUNS, CONSTS, sorted(vars_of(lhs)), 2)
            rules.append(Rule(lhs, rhs))
        system = Trs(tuple(rules), frozenset({"x", "y"}))
        t = random_term(r, FUNS, CONSTS, [], 3)
        got = one_step_reducts(t, system)
        assert {x.term for x in got} == naive_reducts(t, rules)
        for x in got:
            assert rewrite_at(t, x.position, system.rules[x.rule]) == x.term

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**9))
    def test_closed_under_context_and_substitution(self, seed):
        r = random.Random(seed)
        system = trs("(VAR x)\n(RULES\n  g(g(x)) -> h(x)\n  h(a) -> b\n)")
        t = random_term(r, FUNS, CONSTS, ["x"], 3)
        reducts = {x.term for x in one_step_reducts(t, system)}
        sigma = {"x": random_term(r, FUNS, CONSTS, [], 2)}
        ctx_arg = random_term(r, FUNS, CONSTS, [], 1)
        wrapped = App("f", (ctx_arg, apply_subst(t, sigma)))
        wrapped_reducts = {x.term for x in one_step_reducts(wrapped, system)}
        for u in reducts:
            assert App("f", (ctx_arg, apply_subst(u, sigma))) in wrapped_reducts


class TestBoundedJoin:
    def test_diamond(self, diamond):
        assert bounded_join(term("b"), term("c"), diamond, 1) is JoinStatus.JOINABLE

    def test_reflexive(self, diamond):
        assert bounded_join(term("b"), term("b"), diamond, 0) is JoinStatus.JOINABLE

    @pytest.mark.parametrize("depth", [0, 1, 5, -1])
    def test_gramlich_not_proven(self, gramlich, depth):
        assert bounded_join(term("a"), term("f(d,h(b))"), gramlich, depth) is JoinStatus.NOT_PROVEN

    def test_exhausted_on_cap(self, trs_b):
        # c -> g(c) -> g(g(c)) ... never meets the normal form a
        assert bounded_join(term("c"), term("a"), trs_b, -1, max_terms=50) is JoinStatus.EXHAUSTED
        assert bounded_join(term("f(c,c)"), term("f(g(c),c)"), trs_b, 3) is JoinStatus.JOINABLE

    def test_join_replays(self, diamond):
        status, join = find_join(term("b"), term("c"), diamond, 3)
        assert status is JoinStatus.JOINABLE
        assert replay_join(join, diamond)
        assert join.certificate() == "JOIN b ->1 d <-1 c"

    def test_monotone_in_depth(self):
        r = random.Random(3)
        system = trs("(VAR x)\n(RULES\n  f(x) -> g(x)\n  g(a) -> b\n  h(x) -> f(x)\n)")
        for _ in range(200):
            s = random_term(r, [("f", 1), ("g", 1), ("h", 1)], ["a", "b"], [], 3)
            t = random_term(r, [("f", 1), ("g", 1), ("h", 1)], ["a", "b"], [], 3)
            seen = False
            for d in range(6):
                ok = bounded_join(s, t, system, d) is JoinStatus.JOINABLE
                assert ok or not seen
                seen = seen or ok


class TestReach:
    def test_against_naive_reach(self, trs_b):
        t = term("f(c,c)")
        got = reach(t, trs_b, 3)
        assert set(got.dist) == naive_reach(t, list(trs_b.rules), 3)

    def test_path_replays(self, trs_b):
        t = term("f(c,c)")
        got = reach(t, trs_b, 3)
        for u in got.dist:
            cur = t
            for step in got.path(u):
                cur = rewrite_at(cur, step.position, trs_b.rules[step.rule])
            assert cur == u

    def test_normalize(self, diamond):
        nf, steps = normalize(term("a"), diamond, 10)
        assert nf == term("d") and len(steps) == 2

    def test_normalize_gives_up(self, trs_b):
        assert normalize(term("c"), trs_b, 20) is None


class TestPredicates:
    def test_gramlich(self, gramlich):
        p = syntactic_predicates(gramlich)
        # each variable occurs once per lhs subterm, but x occurs twice in f(g(x),h(x))
        assert p.left_linear is False

    def test_nonlinear(self, trs_b):
        assert syntactic_predicates(trs_b).left_linear is False

    def test_empty(self):
        p = syntactic_predicates(trs("(VAR)\n(RULES)"))
        assert (p.left_linear, p.right_linear, p.linear, p.ground) == (True, True, True, True)
        assert (p.collapsing, p.duplicating) == (False, False)

    def test_collapsing_and_duplicating(self):
        p = syntactic_predicates(trs("(VAR x)\n(RULES\n  f(x) -> x\n  g(x) -> h(x,x)\n)"))
        assert p.collapsing and p.duplicating and not p.right_linear


class TestFreeze:
    def test_distinct_variables(self):
        t = ground_freeze(term("f(x,y)"))
        assert t.args[0] != t.args[1]
        assert all(isinstance(a, App) and not a.args for a in t.args)

    def test_ground_unchanged(self):
        assert ground_freeze(term("a")) == term("a")

    def test_same_variable_same_constant(self):
        t = ground_freeze(term("f(x,x)"))
        assert t.args[0] == t.args[1]

    def test_reserved_namespace(self):
        frozen = ground_freeze(term("g(x)"))
        text = print_trs(Trs((Rule(frozen, frozen),), frozenset()))
        with pytest.raises(TrsParseError):
            parse_trs(text)


class TestPositions:
    def test_subterm_and_replace(self):
        t = term("f(a,g(b))")
        assert subterm_at(t, (2, 1)) == term("b")
        assert replace_at(t, (2,), term("c")) == term("f(a,c)")

    def test_rename_rule(self):
        r = rename_rule(Rule(term("f(x,y)"), term("x")), "#1")
        assert vars_of(r.lhs) == {"x#1", "y#1"}
