"""Portfolio invention: evaluate, reduce, select and specialise strategies.

A parameter space is a list of discrete parameters plus forbidden partial
assignments; a template turns a full assignment into strategy text.  Template
placeholders:

``${P}``
    the value of ``P``.
``${-P}``
    a processor flag named after the last ``_``-component of ``P``: ``-flag``
    for ``yes``, nothing for ``no`` or ``-1``, ``-flag value`` otherwise.
``${?P: text}``
    ``text`` if ``P`` is ``yes``, ``fail`` otherwise.

A ``yes``/``no`` parameter named like a definition of the template replaces that
definition by ``fail`` when set to ``no``.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from . import strategy as S

YES_NO = ("yes", "no")


class SpaceError(ValueError):
    pass


# ----------------------------------------------------------- parameter space


@dataclass(frozen=True)
class Param:
    name: str
    domain: tuple[str, ...]
    default: str

    def __post_init__(self):
        if len(set(self.domain)) != len(self.domain):
            raise SpaceError(f"parameter {self.name} has repeated values")
        if self.default not in self.domain:
            raise SpaceError(f"default {self.default!r} of {self.name} not in its domain")

    @property
    def boolean(self) -> bool:
        return set(self.domain) == set(YES_NO)


Assignment = Mapping[str, str]


@dataclass(frozen=True)
class ParamSpace:
    params: tuple[Param, ...]
    forbidden: tuple[tuple[tuple[str, str], ...], ...] = ()
    template: str = ""

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate parameter names")
        by = {p.name: p for p in self.params}
        for pattern in self.forbidden:
            for k, v in pattern:
                if k not in by:
                    raise SpaceError(f"forbidden pattern names unknown parameter {k}")
                if v not in by[k].domain:
                    raise SpaceError(f"forbidden pattern value {k}={v} outside the domain")

    def param(self, name: str) -> Param:
        for p in self.params:
            if p.name == name:
                return p
        raise SpaceError(f"unknown parameter {name}")

    def defaults(self) -> dict[str, str]:
        return {p.name: p.default for p in self.params}

    def is_forbidden(self, a: Assignment) -> bool:
        return any(all(a.get(k) == v for k, v in pattern) for pattern in self.forbidden)

    def check(self, a: Assignment) -> None:
        names = {p.name for p in self.params}
        extra = set(a) - names
        if extra:
            raise SpaceError(f"unknown parameter {sorted(extra)[0]}")
        for p in self.params:
            if p.name not in a:
                raise SpaceError(f"missing parameter {p.name}")
            if a[p.name] not in p.domain:
                raise SpaceError(f"value {a[p.name]!r} outside the domain of {p.name}")
        if self.is_forbidden(a):
            raise SpaceError("forbidden assignment")

    def neighbours(self, a: Assignment) -> list[dict[str, str]]:
        out = []
        for p in self.params:
            for v in p.domain:
                if v != a[p.name]:
                    b = dict(a)
                    b[p.name] = v
                    if not self.is_forbidden(b):
                        out.append(b)
        return out


_PARAM_LINE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*\{([^}]*)\}\s*\[([^\]]*)\]\s*$")
_FORBID_LINE = re.compile(r"FORBID\s*\{([^}]*)\}\s*$")


def parse_space(text: str, template: str = "") -> ParamSpace:
    params: list[Param] = []
    forbidden = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _FORBID_LINE.match(line)
        if m:
            pairs = []
            for item in m.group(1).split(","):
                if "=" not in item:
                    raise SpaceError(f"line {no}: expected p=v in FORBID")
                k, v = (s.strip() for s in item.split("=", 1))
                pairs.append((k, v))
            forbidden.append(tuple(pairs))
            continue
        m = _PARAM_LINE.match(line)
        if not m:
            raise SpaceError(f"line {no}: expected 'name {{v1,...}}[default]' or 'FORBID {{p=v,...}}'")
        domain = tuple(v.strip() for v in m.group(2).split(",") if v.strip())
        params.append(Param(m.group(1), domain, m.group(3).strip()))
    return ParamSpace(tuple(params), tuple(forbidden), template)


def print_space(space: ParamSpace) -> str:
    lines = [f"{p.name} {{{','.join(p.domain)}}}[{p.default}]" for p in space.params]
    lines += ["FORBID {" + ", ".join(f"{k}={v}" for k, v in pat) + "}" for pat in space.forbidden]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- instantiation

_PLACEHOLDER = re.compile(r"\$\{(\?([A-Za-z_][A-Za-z0-9_]*):([^{}]*)|-([A-Za-z_][A-Za-z0-9_]*)|([A-Za-z_][A-Za-z0-9_]*))\}")


def _flag_name(param: str) -> str:
    return param.rsplit("_", 1)[-1]


def render(space: ParamSpace, a: Assignment) -> str:
    """Template text with every placeholder replaced."""

    def sub(m: re.Match) -> str:
        if m.group(2):
            name = m.group(2)
            value = _value(name)
            return m.group(3).strip() if value == "yes" else "fail"
        if m.group(4):
            name = m.group(4)
            value = _value(name)
            if value in ("no", "-1"):
                return ""
            if value == "yes":
                return f"-{_flag_name(name)}"
            return f"-{_flag_name(name)} {value}"
        return _value(m.group(5))

    def _value(name: str) -> str:
        if name not in a:
            raise SpaceError(f"unknown parameter {name} in template")
        return a[name]

    # placeholders may nest inside ${?P: ...}; innermost ones are replaced first
    text = space.template
    while True:
        out = _PLACEHOLDER.sub(sub, text)
        if out == text:
            return out
        text = out


@dataclass(frozen=True)
class Invented:
    """A strategy with its provenance."""

    id: str
    text: str
    assignment: tuple[tuple[str, str], ...] = ()
    parent: str | None = None
    origin: str = "initial"

    @property
    def params(self) -> dict[str, str]:
        return dict(self.assignment)

    def defs(self) -> S.StrategyDefs:
        return S.parse_strategy(self.text)


def strategy_id(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def instantiate(space: ParamSpace, a: Assignment) -> S.StrategyDefs:
    space.check(a)
    defs = S.parse_strategy(render(space, a))
    for p in space.params:
        if p.boolean and p.name in defs.defs and a[p.name] == "no":
            defs.defs[p.name] = S.Fail()
    from .engine import validate

    validate(defs)  # every processor token and flag value must be known
    return defs


def make_strategy(space: ParamSpace, a: Assignment, parent: str | None = None, origin: str = "initial") -> Invented:
    text = instantiate(space, a).text()
    return Invented(strategy_id(text), text, tuple(sorted(a.items())), parent, origin)


def strategy_from_text(text: str, origin: str = "initial") -> Invented:
    canon = S.parse_strategy(text).text()
    return Invented(strategy_id(canon), canon, (), None, origin)


def initial_strategies(space: ParamSpace | None = None) -> list[Invented]:
    """The template defaults (if any) followed by one strategy per processor."""
    from .engine import PROCESSORS

    out = [make_strategy(space, space.defaults())] if space is not None else []
    for name in PROCESSORS:
        inv = strategy_from_text(f"AUTO = {name}!")
        if inv.id not in {s.id for s in out}:
            out.append(inv)
    return out


# ----------------------------------------------------------------- runners


class Runner(Protocol):
    def run(self, strategy: Invented, problem: str) -> tuple[str, int]:
        """Answer and wall time in milliseconds for one attempt."""


def _prover_job(job):
    from .engine import eval_strategy

    text, trs, limit = job
    try:
        out = eval_strategy(S.parse_strategy(text), trs, limit, 1)
        return out.answer, int(round(out.total * 1000))
    except Exception:
        return "MAYBE", int(limit * 1000)


@dataclass
class ProverRunner:
    problems: Mapping[str, object]  # problem id -> Trs
    limit: float = 30.0
    workers: int = 1

    def run(self, strategy: Invented, problem: str) -> tuple[str, int]:
        return _prover_job((strategy.text, self.problems[problem], self.limit))

    def run_many(self, jobs: Sequence[tuple[Invented, str]]) -> list[tuple[str, int]]:
        if self.workers <= 1 or len(jobs) < 2:
            return [self.run(s, p) for s, p in jobs]
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(_prover_job, [(s.text, self.problems[p], self.limit) for s, p in jobs]))


@dataclass
class SyntheticRunner:
    """Answers come from ``fn(assignment, problem) -> (answer, millis)``."""

    fn: Callable[[dict, str], tuple[str, int]]
    calls: int = 0

    def run(self, strategy: Invented, problem: str) -> tuple[str, int]:
        self.calls += 1
        return self.fn(strategy.params, problem)


# -------------------------------------------------------------- eval matrix


@dataclass(frozen=True)
class Eval:
    answer: str
    millis: int
    workers: int = 1

    @property
    def solved(self) -> bool:
        return self.answer in ("YES", "NO")


class EvalMatrix:
    """Append-only (strategy, problem) -> result cache, optionally journaled."""

    def __init__(self, path: str | Path | None = None):
        self.cells: dict[tuple[str, str], Eval] = {}
        self.runs = 0
        self.path = Path(path) if path else None
        if self.path and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                except json.JSONDecodeError:
                    continue
                self.cells[(d["strategy"], d["problem"])] = Eval(d["answer"], int(d["millis"]), int(d.get("workers", 1)))

    def __contains__(self, key) -> bool:
        return key in self.cells

    def __len__(self) -> int:
        return len(self.cells)

    def get(self, sid: str, pid: str) -> Eval | None:
        return self.cells.get((sid, pid))

    def add(self, sid: str, pid: str, ev: Eval) -> None:
        if (sid, pid) in self.cells:
            return
        self.cells[(sid, pid)] = ev
        self.runs += 1
        if self.path:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"strategy": sid, "problem": pid, "answer": ev.answer,
                                     "millis": ev.millis, "workers": ev.workers}) + "\n")

    def strategies(self) -> list[str]:
        return sorted({s for s, _ in self.cells})

    def problems(self) -> list[str]:
        return sorted({p for _, p in self.cells})

    def solved_by(self, sid: str, problems: Sequence[str], limit_ms: int | None = None) -> dict[str, int]:
        out = {}
        for p in problems:
            ev = self.cells.get((sid, p))
            if ev is not None and ev.solved and (limit_ms is None or ev.millis <= limit_ms):
                out[p] = ev.millis
        return out


def load_matrix(path: str | Path) -> EvalMatrix:
    return EvalMatrix(path)


# ------------------------------------------------------------ loop state


@dataclass(frozen=True)
class Hyper:
    generation_size: int = 10
    portfolio_cap: int = 200
    eval_limit: float = 30.0
    spec_budget: float = 60.0  # seconds per specialisation
    spec_max_evals: int = 60  # new candidates per specialisation
    max_specializations: int = 3
    iteration_cap: int = 50
    wall_budget: float | None = None  # seconds for the whole loop
    max_evals: int | None = None  # distinct strategies evaluated, whole loop
    restart_prob: float = 0.05
    perturb_params: int = 3
    workers: int = 1


@dataclass
class State:
    space: ParamSpace | None
    hyper: Hyper
    problems: list[str]
    strategies: dict[str, Invented] = field(default_factory=dict)
    current: list[str] = field(default_factory=list)
    spec_count: dict[str, int] = field(default_factory=dict)
    exhausted: set[str] = field(default_factory=set)
    evaluated: set[str] = field(default_factory=set)  # strategies run at least once
    visited: list[tuple[tuple[str, str], ...]] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)
    iteration: int = 0
    matrix: EvalMatrix = field(default_factory=EvalMatrix)
    directory: Path | None = None

    def add(self, s: Invented) -> bool:
        if s.id in self.strategies:
            return False
        self.strategies[s.id] = s
        if self.directory:
            d = self.directory / "strategies"
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{s.id}.strategy").write_text(s.text, encoding="utf-8")
        return True

    def limit_ms(self) -> int:
        return int(self.hyper.eval_limit * 1000)

    def solved(self, sid: str, problems: Sequence[str] | None = None) -> dict[str, int]:
        return self.matrix.solved_by(sid, self.problems if problems is None else problems, self.limit_ms())

    def covered(self) -> set[str]:
        out: set[str] = set()
        for sid in self.strategies:
            out |= set(self.solved(sid))
        return out

    def save(self) -> None:
        if not self.directory:
            return
        data = {
            "iteration": self.iteration,
            "problems": self.problems,
            "strategies": [asdict(s) for s in self.strategies.values()],
            "current": self.current,
            "spec_count": self.spec_count,
            "exhausted": sorted(self.exhausted),
            "evaluated": sorted(self.evaluated),
            "history": self.history,
            "hyper": asdict(self.hyper),
        }
        tmp = self.directory / "state.json.tmp"
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True), encoding="utf-8")
        tmp.replace(self.directory / "state.json")


def load_state(directory: str | Path, space: ParamSpace | None, hyper: Hyper) -> State | None:
    directory = Path(directory)
    path = directory / "state.json"
    if not path.exists():
        return None
    d = json.loads(path.read_text(encoding="utf-8"))
    st = State(space, hyper, d["problems"], directory=directory, matrix=EvalMatrix(directory / "evals.jsonl"))
    for s in d["strategies"]:
        st.strategies[s["id"]] = Invented(s["id"], s["text"], tuple(tuple(x) for x in s["assignment"]),
                                          s["parent"], s["origin"])
    st.current = d["current"]
    st.spec_count = d["spec_count"]
    st.exhausted = set(d["exhausted"])
    st.evaluated = set(d["evaluated"])
    st.history = d["history"]
    st.iteration = d["iteration"]
    return st


# ------------------------------------------------------------ loop phases


def _run_pairs(state: State, runner: Runner, pairs: list[tuple[Invented, str]]) -> None:
    pairs = [(s, p) for s, p in pairs if (s.id, p) not in state.matrix]
    if not pairs:
        return
    if hasattr(runner, "run_many"):
        results = runner.run_many(pairs)
    else:
        results = [runner.run(s, p) for s, p in pairs]
    for (strat, pid), (answer, millis) in zip(pairs, results):
        if answer in ("YES", "NO") and millis > state.limit_ms():
            answer = "MAYBE"
        state.matrix.add(strat.id, pid, Eval(answer, millis, state.hyper.workers))
        state.evaluated.add(strat.id)


def evaluate(state: State, runner: Runner, strategies: Sequence[str] | None = None,
             problems: Sequence[str] | None = None) -> int:
    """Fill the cache for every missing pair; returns the number of new runs."""
    before = state.matrix.runs
    sids = list(state.strategies) if strategies is None else list(strategies)
    pids = state.problems if problems is None else list(problems)
    _run_pairs(state, runner, [(state.strategies[s], p) for s in sids for p in pids])
    return state.matrix.runs - before


def score(state: State, sid: str) -> tuple[int, int]:
    solved = state.solved(sid)
    return len(solved), -sum(solved.values())


def reduce(state: State) -> list[str]:
    """Best ``generation_size`` strategies by (problems solved, lower total time)."""
    order = {sid: i for i, sid in enumerate(state.strategies)}
    ranked = sorted(state.strategies, key=lambda s: (-score(state, s)[0], -score(state, s)[1], order[s]))
    cap = state.hyper.portfolio_cap
    while len(ranked) > cap:
        victim = None
        for sid in reversed(ranked):
            others = set()
            for o in ranked:
                if o != sid:
                    others |= set(state.solved(o))
            if set(state.solved(sid)) <= others:
                victim = sid
                break
        victim = victim or ranked[-1]
        ranked.remove(victim)
        del state.strategies[victim]
    state.current = ranked[: state.hyper.generation_size]
    return state.current


def mastered(state: State, sid: str, pool: Sequence[str] | None = None) -> set[str]:
    """Problems ``sid`` solves that no other strategy of ``pool`` solves strictly faster."""
    pool = state.current if pool is None else pool
    mine = state.solved(sid)
    out = set()
    for p, t in mine.items():
        if all(not (o != sid and (ot := state.solved(o, [p]).get(p)) is not None and ot < t) for o in pool):
            out.add(p)
    return out


def select(state: State, rng: random.Random) -> str | None:
    best, best_size = [], 0
    for sid in state.current:
        if sid in state.exhausted or state.spec_count.get(sid, 0) >= state.hyper.max_specializations:
            continue
        size = len(mastered(state, sid))
        if size > best_size:
            best, best_size = [sid], size
        elif size == best_size and size > 0:
            best.append(sid)
    if not best:
        return None
    return best[0] if len(best) == 1 else rng.choice(best)


def _objective(state: State, sid: str, focus: Sequence[str]) -> tuple[int, int]:
    solved = state.solved(sid, focus)
    return len(solved), -sum(solved.values())


def specialize(s: str, state: State, runner: Runner, rng: random.Random) -> Invented | None:
    """Iterated local search from ``s`` on its focus set; None if nothing better is found."""
    space, hyper = state.space, state.hyper
    base = state.strategies[s]
    if space is None or not base.assignment or hyper.spec_budget <= 0 or hyper.spec_max_evals <= 0:
        return None
    solved = sorted(state.solved(s))
    unsolved = sorted(set(state.problems) - state.covered())
    focus = solved + (rng.sample(unsolved, len(solved)) if len(unsolved) > len(solved) else unsolved)
    deadline = time.monotonic() + hyper.spec_budget
    new_evals = [0]

    def out_of_budget() -> bool:
        if time.monotonic() >= deadline or new_evals[0] >= hyper.spec_max_evals:
            return True
        return hyper.max_evals is not None and len(state.evaluated) >= hyper.max_evals

    seen: dict[str, Invented] = {}

    def value(a: dict) -> tuple[int, int] | None:
        inv = make_strategy(space, a, parent=s, origin="specialized")
        if inv.id not in seen:
            if inv.id not in state.evaluated:
                if out_of_budget():
                    return None
                new_evals[0] += 1
            seen[inv.id] = inv
            state.visited.append(inv.assignment)
        _run_pairs(state, runner, [(seen[inv.id], p) for p in focus])
        return _objective(state, inv.id, focus)

    start = base.params
    start_val = _objective(state, s, focus)
    best, best_val = dict(start), start_val
    cur, cur_val = dict(start), start_val
    while not out_of_budget():
        improved = False
        neigh = space.neighbours(cur)
        rng.shuffle(neigh)
        if rng.random() < hyper.restart_prob:
            neigh = []
        for b in neigh:
            v = value(b)
            if v is None:
                break
            if v > cur_val:
                cur, cur_val, improved = b, v, True
                break
        if cur_val > best_val:
            best, best_val = dict(cur), cur_val
        if out_of_budget():
            break
        if not improved:
            # local optimum or restart draw: perturb a few parameters of the incumbent
            cur = dict(best)
            for _ in range(20):
                cand = dict(best)
                for p in rng.sample(space.params, min(hyper.perturb_params, len(space.params))):
                    cand[p.name] = rng.choice(p.domain)
                if not space.is_forbidden(cand):
                    cur = cand
                    break
            v = value(cur)
            if v is None:
                break
            cur_val = v
    if best_val <= start_val:
        return None
    inv = make_strategy(space, best, parent=s, origin="specialized")
    if inv.id == s:
        return None
    return seen.get(inv.id, inv)


def grackle_loop(init: Sequence[Invented], problems: Sequence[str], hyper: Hyper, runner: Runner,
                 rng: random.Random, space: ParamSpace | None = None, directory: str | Path | None = None,
                 log: Callable[[str], None] | None = None) -> State:
    """Evaluate, reduce, select and specialise until selection or a budget runs out."""
    if not init:
        raise ValueError("need at least one initial strategy")
    directory = Path(directory) if directory else None
    state = load_state(directory, space, hyper) if directory else None
    if state is None:
        if directory:
            directory.mkdir(parents=True, exist_ok=True)
        matrix = EvalMatrix(directory / "evals.jsonl" if directory else None)
        state = State(space, hyper, list(problems), matrix=matrix, directory=directory)
        for s in init:
            state.add(s)
    started = time.monotonic()
    say = log or (lambda msg: None)
    while True:
        evaluate(state, runner)
        reduce(state)
        state.save()
        if state.iteration >= hyper.iteration_cap:
            break
        if hyper.wall_budget is not None and time.monotonic() - started >= hyper.wall_budget:
            break
        if hyper.max_evals is not None and len(state.evaluated) >= hyper.max_evals:
            break
        s = select(state, rng)
        if s is None:
            break
        state.iteration += 1
        state.spec_count[s] = state.spec_count.get(s, 0) + 1
        new = specialize(s, state, runner, rng)
        if new is None:
            state.exhausted.add(s)
            state.history.append({"iteration": state.iteration, "selected": s, "invented": None})
            say(f"iteration {state.iteration}: {s} exhausted")
        else:
            state.add(new)
            state.history.append({"iteration": state.iteration, "selected": s, "invented": new.id})
            say(f"iteration {state.iteration}: {s} -> {new.id}")
    state.save()
    return state
