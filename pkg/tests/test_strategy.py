import random
import time

import pytest

from conftest import TRS_A, trs
from trsconf.engine import answer_of, default_strategy, eval_expression, eval_strategy, validate
from trsconf.generator import GenConfig, generate
from trsconf.strategy import (
    Bang,
    Choice,
    Fail,
    IterN,
    IterTimed,
    Modified,
    Par,
    Proc,
    Seq,
    StrategyError,
    StrategySyntaxError,
    parse_expression,
    parse_strategy,
    unparse,
)

SHRINK = "(VAR)\n(RULES\n a -> b\n b -> c\n a -> c\n)"
SLOW = "nonconfluence -steps 50 -var -nf"

ATOMS = [
    "orthogonal", "kb", "closed -strongly 2", "nonconfluence -steps 1", "nonconfluence -steps 1 -var -nf",
    "redundant_remove -depth 2", "redundant -rhs -size 8", "redundant -js", "fail", "succ",
]


def random_strategy(rng, depth=2):
    if depth == 0 or rng.random() < 0.3:
        return f"({rng.choice(ATOMS)})"
    a, b = random_strategy(rng, depth - 1), random_strategy(rng, depth - 1)
    form = rng.choice(["{a};{b}", "{a}|{b}", "({a})?", "({a})*", "({a})2*", "({a})!", "{a};{b}!"])
    return "(" + form.format(a=a, b=b) + ")"


class TestParse:
    def test_two_definitions(self):
        d = parse_strategy("A = fail\nB = (A || orthogonal)")
        assert list(d.defs) == ["A", "B"]
        assert d["A"] == Fail()
        assert d["B"] == Par(Proc("A"), Proc("orthogonal"))

    def test_bang(self):
        assert parse_strategy("KB = (kb)!")["KB"] == Bang(Proc("kb"))

    def test_bounded_iteration(self):
        assert parse_strategy("S = orthogonal3*")["S"] == IterN(Proc("orthogonal"), 3)

    def test_precedence(self):
        node = parse_expression("a;b | c || d")
        assert node == Par(Choice(Seq(Proc("a"), Proc("b")), Proc("c")), Proc("d"))

    def test_flags(self):
        node = parse_expression("nonconfluence -steps 1 -tcap -fun[10]")
        assert node.secs == 10
        assert node.body == Proc("nonconfluence", (("steps", 1), ("tcap", None), ("fun", None)))

    def test_timed_iteration_and_modifier(self):
        assert parse_expression("kb[0.5]*") == IterTimed(Proc("kb"), 0.5)
        assert parse_expression("{kb}nono") == Modified(Proc("kb"), "nono")

    def test_continuation_and_comments(self):
        d = parse_strategy("# header\nS = orthogonal \\\n  | kb  # trailing\n\nT = S")
        assert d["S"] == Choice(Proc("orthogonal"), Proc("kb"))
        assert d.entry == "S"

    def test_syntax_error_position(self):
        with pytest.raises(StrategySyntaxError) as err:
            parse_strategy("A = kb\nB = (kb ;; fail)")
        assert err.value.line == 2

    def test_cycle(self):
        with pytest.raises(StrategyError):
            parse_strategy("A = B\nB = A;kb")

    def test_undefined_name(self):
        with pytest.raises(StrategyError):
            validate(parse_strategy("A = nosuchproc"))

    def test_bad_flag(self):
        with pytest.raises(StrategyError):
            validate(parse_strategy("A = kb -steps 3"))

    def test_zero_iterations(self):
        with pytest.raises(StrategyError):
            parse_expression("kb0*")

    def test_unparse_round_trip(self):
        rng = random.Random(1)
        for _ in range(300):
            node = parse_expression(random_strategy(rng, 3))
            assert parse_expression(unparse(node)) == node

    def test_default_strategy_valid(self):
        validate(default_strategy())


class TestEval:
    def test_gramlich_nonconfluence(self, gramlich):
        o = eval_strategy(parse_strategy("N = nonconfluence -steps 1 -tcap -fun[10]"), gramlich, 20)
        assert o.answer == "NO" and o.success

    def test_fail(self, diamond):
        o = eval_strategy(parse_strategy("S = fail"), diamond, 5)
        assert o.answer == "MAYBE" and not o.success

    def test_cleanup_then_kb(self, diamond):
        assert eval_strategy(parse_strategy("S = (redundant_remove?; kb)!"), diamond, 10).answer == "YES"

    def test_bare_transformation_is_maybe(self, diamond):
        assert eval_expression("redundant -js", diamond).answer == "MAYBE"
        assert answer_of(eval_expression("succ", diamond)) == "MAYBE"

    def test_choice_falls_through(self, gramlich):
        assert eval_expression("orthogonal | nonconfluence -steps 1", gramlich).answer == "NO"

    def test_nono_modifier(self, gramlich):
        assert eval_expression("{nonconfluence -steps 1}nono", gramlich).answer == "MAYBE"

    def test_if(self, trs_b, diamond):
        s = "if left_linear then orthogonal else nonconfluence -steps 2 -var -nf"
        assert eval_expression(s, trs_b).answer == "NO"
        assert eval_expression("if ground then kb else fail", diamond).answer == "YES"

    def test_par_first_success(self, diamond):
        o = eval_expression(f"({SLOW}) || kb", diamond, 5, workers=2)
        assert o.answer == "YES" and o.total < 4

    def test_par_single_worker(self, diamond):
        o = eval_expression(f"({SLOW})[0.5] || kb", diamond, 5, workers=1)
        assert o.answer == "YES"

    def test_default_strategy(self, gramlich, diamond, trs_b):
        d = default_strategy()
        assert eval_strategy(d, gramlich, 10).answer == "NO"
        assert eval_strategy(d, diamond, 10).answer == "YES"
        assert eval_strategy(d, trs_b, 10).answer == "NO"

    def test_trs_a(self):
        # orthogonal, yet not terminating, so the completion route gives up
        assert eval_strategy(default_strategy(), trs(TRS_A), 3).answer == "YES"
        assert eval_expression("kb!", trs(TRS_A), 3).answer == "MAYBE"

    def test_budget_exhausted(self):
        t = time.monotonic()
        assert eval_expression(SLOW, trs(TRS_A), 0.3).answer == "MAYBE"
        assert time.monotonic() - t < 0.6

    def test_bad_budget(self, diamond):
        with pytest.raises(ValueError):
            eval_expression("kb", diamond, 0)


class TestLaws:
    def test_plus_is_star_then_body(self):
        rng = random.Random(5)
        systems = [s for s, _ in generate(GenConfig(max_funs=3, max_consts=2, max_vars=2, max_rules=3,
                                                   max_term_size=6, seed=5), 100)]
        for system in systems:
            s = random_strategy(rng)
            plus = eval_expression(f"(({s})+)!", system, 10)
            star_seq = eval_expression(f"(({s})*; {s})!", system, 10)
            assert plus.answer == star_seq.answer, s

    def test_plus_differs_from_body_then_star(self):
        system = trs(SHRINK)
        s = "(redundant_remove -depth 2)"
        assert eval_expression(f"({s}+ ; kb) | fail", system).answer == "MAYBE"
        assert eval_expression(f"({s} ; {s}* ; kb) | fail", system).answer == "YES"

    def test_opt_and_star_never_fail(self):
        """Behind ``?`` or ``*`` the following step always runs."""
        rng = random.Random(6)
        atoms = [a for a in ATOMS if not a.startswith("redundant ")]
        for _ in range(60):
            inner = f"({rng.choice(atoms)})"
            for wrap in ("?", "*"):
                o = eval_expression(f"({inner}{wrap}) ; orthogonal", trs("(VAR x)\n(RULES f(x) -> x)"), 10)
                assert o.answer == "YES", inner + wrap

    def test_timeout_contract(self):
        slow = trs(TRS_A)
        for _ in range(100):
            t = time.monotonic()
            eval_expression(f"({SLOW})[0.1]", slow, 5)
            assert time.monotonic() - t <= 0.2

    def test_deterministic_single_worker(self, gramlich, trs_b):
        d = default_strategy()
        for system in (gramlich, trs_b):
            a, b = eval_strategy(d, system, 10), eval_strategy(d, system, 10)
            assert a.answer == b.answer
            assert [e.proc for e in a.trace] == [e.proc for e in b.trace]

    def test_par_trace_is_closed(self, diamond):
        o = eval_expression(f"({SLOW}) || kb", diamond, 5, workers=2)
        n = len(o.trace)
        time.sleep(0.3)
        assert len(o.trace) == n
