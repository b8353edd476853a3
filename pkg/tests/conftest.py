import pytest

from trsconf.trs_io import parse_trs

GRAMLICH = """(VAR x)
(RULES
  f(g(x),h(x)) -> a
  g(b) -> d
  h(c) -> d
)"""

TRS_A = """(VAR x y)
(RULES
  f(x) -> g(f(x))
  g(y) -> f(g(y))
)"""

TRS_B = """(VAR x)
(RULES
  f(x,x) -> a
  f(x,g(x)) -> b
  c -> g(c)
)"""

R1 = """(VAR x y z)
(RULES
  f(f(x,y),z) -> f(x,f(y,z))
)"""

OVERLAP = """(VAR x)
(RULES
  f(a,g(x)) -> f(x,x)
  g(b) -> c
)"""

DIAMOND = """(VAR)
(RULES
  a -> b
  a -> c
  b -> d
  c -> d
)"""


def term(text, variables="x y z u v w"):
    """Parse a single term; names in ``variables`` are variables."""
    trs = parse_trs(f"(VAR {variables})\n(RULES\n  wrap__({text}) -> wrap__({text})\n)")
    return trs.rules[0].lhs.args[0]


def trs(text):
    return parse_trs(text)


@pytest.fixture
def gramlich():
    return parse_trs(GRAMLICH)


@pytest.fixture
def trs_a():
    return parse_trs(TRS_A)


@pytest.fixture
def trs_b():
    return parse_trs(TRS_B)


@pytest.fixture
def r1():
    return parse_trs(R1)


@pytest.fixture
def overlap_trs():
    return parse_trs(OVERLAP)


@pytest.fixture
def diamond():
    return parse_trs(DIAMOND)


# one line per acceptance criterion, printed at the end of the session
CRITERIA: dict[int, str] = {}


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
