"""Duplicate detection modulo renaming, labelling and balanced selection."""

from __future__ import annotations

import hashlib
import json
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .terms import App, Rule, Term, Trs, Var

SEARCH_NODE_CAP = 10_000
NONCANON = "NONCANON:"
HUMAN, GENERATED = "human", "generated"


# ------------------------------------------------------------ canonical form


def _rule_text(rule: Rule, label) -> str:
    """Rule text with symbols relabelled and variables numbered by first occurrence."""
    names: dict[str, str] = {}

    def go(t: Term) -> str:
        if type(t) is Var:
            if t.name not in names:
                names[t.name] = f"v{len(names) + 1}"
            return names[t.name]
        head = label(t.fn)
        if not t.args:
            return head
        return head + "(" + ",".join(go(a) for a in t.args) + ")"

    lhs = go(rule.lhs)
    return lhs + "->" + go(rule.rhs)


def _encode(trs: Trs, label) -> str:
    return ";".join(sorted(_rule_text(r, label) for r in trs.rules))


def _symbol_arities(trs: Trs) -> dict[str, int]:
    return {s.name: s.arity for s in trs.signature}


def _occurrences(trs: Trs) -> dict[str, list[tuple[int, str, Term | None, int, Term]]]:
    """For each symbol: (rule index, side, parent term, argument index, the subterm)."""
    occ: dict[str, list] = {}
    for i, rule in enumerate(trs.rules):
        for side, root in (("l", rule.lhs), ("r", rule.rhs)):
            stack = [(root, None, 0)]
            while stack:
                t, parent, k = stack.pop()
                if type(t) is App:
                    occ.setdefault(t.fn, []).append((i, side, parent, k, t))
                    for j, a in enumerate(t.args, 1):
                        stack.append((a, t, j))
    return occ


def _refine(trs: Trs, colors: dict[str, int], occ) -> dict[str, int]:
    """Colour refinement to a fixpoint; result depends only on the coloured structure."""
    while True:
        label = lambda f: f"c{colors[f]}"
        rule_texts = [_rule_text(r, label) for r in trs.rules]

        def child(t: Term) -> str:
            return "V" if type(t) is Var else f"c{colors[t.fn]}"

        sigs = {}
        for f in colors:
            descr = sorted(
                (side, rule_texts[i], "-" if parent is None else child(parent), k, tuple(child(a) for a in t.args))
                for i, side, parent, k, t in occ.get(f, ())
            )
            sigs[f] = (colors[f], tuple(descr))
        ranks = {s: n for n, s in enumerate(sorted(set(sigs.values())))}
        new = {f: ranks[sigs[f]] for f in colors}
        if len(set(new.values())) == len(set(colors.values())):
            return new
        colors = new


class _CapReached(Exception):
    pass


def canonical_form(trs: Trs, node_cap: int = SEARCH_NODE_CAP) -> str:
    """Key equal for systems equal up to variable renaming, arity-preserving
    symbol bijection and rule reordering."""
    arities = _symbol_arities(trs)
    occ = _occurrences(trs)
    init_sig = {
        f: (arities[f], tuple(sorted((side, k) for _, side, _, k, _ in occ.get(f, ()))))
        for f in arities
    }
    ranks = {s: n for n, s in enumerate(sorted(set(init_sig.values())))}
    colors = _refine(trs, {f: ranks[init_sig[f]] for f in arities}, occ)
    nodes = [0]
    best: list[str | None] = [None]

    def search(colors: dict[str, int]):
        nodes[0] += 1
        if nodes[0] > node_cap:
            raise _CapReached()
        cells: dict[int, list[str]] = {}
        for f, c in colors.items():
            cells.setdefault(c, []).append(f)
        target = next((c for c in sorted(cells) if len(cells[c]) > 1), None)
        if target is None:
            key = _encode(trs, lambda f: f"s{colors[f]}/{arities[f]}")
            if best[0] is None or key < best[0]:
                best[0] = key
            return
        for f in sorted(cells[target]):
            # individualise f: it becomes the smallest member of its cell
            shifted = {g: 2 * c + (0 if g == f or c != target else 1) for g, c in colors.items()}
            search(_refine(trs, shifted, occ))

    try:
        search(colors)
    except _CapReached:
        return NONCANON + _encode(trs, lambda f: f"{f}/{arities[f]}")
    return best[0]


def key_digest(key: str) -> str:
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------- dedup


@dataclass(frozen=True)
class Problem:
    id: str
    trs: Trs
    origin: str = GENERATED


@dataclass(frozen=True)
class DupClass:
    key: str
    members: tuple[str, ...]
    survivor: str


def _priority(p: Problem, order: int):
    return (0 if p.origin == HUMAN else 1, p.id, order)


def dedup(problems: Sequence[Problem]) -> tuple[list[DupClass], list[str]]:
    """Group by canonical key; keep one member per class, human-made first, then lowest id."""
    groups: dict[str, list[tuple[int, Problem]]] = {}
    for order, p in enumerate(problems):
        groups.setdefault(canonical_form(p.trs), []).append((order, p))
    classes = []
    for key, members in groups.items():
        survivor = min(members, key=lambda m: _priority(m[1], m[0]))[1]
        classes.append(DupClass(key, tuple(p.id for _, p in members), survivor.id))
    survivors = [c.survivor for c in classes]
    order_of = {p.id: i for i, p in enumerate(problems)}
    survivors.sort(key=order_of.__getitem__)
    return classes, survivors


def write_classes(path: str | Path, classes: Iterable[DupClass]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in classes:
            fh.write(f"{key_digest(c.key)}\t{','.join(c.members)}\n")


# ------------------------------------------------------------------ labelling


@dataclass(frozen=True)
class RunRecord:
    problem: str
    strategy: str
    answer: str
    millis: int
    crashed: bool = False


@dataclass(frozen=True)
class LabelRecord:
    problem: str
    runs: dict
    label: str | None  # strategy id of the fastest solver, None if unsolved

    @property
    def solved(self) -> bool:
        return self.label is not None


def read_runs(path: str | Path) -> list[RunRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError:
            continue  # a torn final line from an interrupted run
        out.append(RunRecord(d["problem"], d["strategy"], d["answer"], int(d["millis"]), bool(d.get("crashed", False))))
    return out


def _run_one(job) -> RunRecord:
    from .engine import eval_strategy

    pid, trs, sid, defs, limit = job
    start = time.monotonic()
    try:
        out = eval_strategy(defs, trs, limit, 1)
        return RunRecord(pid, sid, out.answer, int(round(out.total * 1000)))
    except Exception:  # recorded, never fatal
        return RunRecord(pid, sid, "MAYBE", int(round((time.monotonic() - start) * 1000)), True)


def run_labelling(problems: Sequence[Problem], strategies: Sequence[tuple[str, object]], limit: float,
                  log: str | Path, jobs: int = 1) -> list[RunRecord]:
    """Evaluate every (strategy, problem) pair not yet in ``log``, appending as results arrive."""
    done = {(r.problem, r.strategy) for r in read_runs(log)}
    todo = [(p.id, p.trs, sid, defs, limit) for sid, defs in strategies for p in problems
            if (p.id, sid) not in done]
    Path(log).parent.mkdir(parents=True, exist_ok=True)
    with Path(log).open("a", encoding="utf-8") as fh:
        def emit(rec: RunRecord):
            fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")
            fh.flush()

        if jobs <= 1:
            for job in todo:
                emit(_run_one(job))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for rec in pool.map(_run_one, todo):
                    emit(rec)
    return read_runs(log)


def compute_labels(runs: Iterable[RunRecord], strategy_order: Sequence[str], limit: float | None = None,
                   problems: Sequence[str] | None = None) -> list[LabelRecord]:
    """Label each problem with its fastest solver; ties go to the earlier strategy."""
    index = {s: i for i, s in enumerate(strategy_order)}
    per: dict[str, dict[str, RunRecord]] = {}
    for r in runs:
        per.setdefault(r.problem, {})[r.strategy] = r
    ids = list(problems) if problems is not None else sorted(per)
    out = []
    for pid in ids:
        rs = per.get(pid, {})
        solvers = [
            r for r in rs.values()
            if r.answer in ("YES", "NO") and not r.crashed and (limit is None or r.millis <= limit * 1000)
        ]
        best = min(solvers, key=lambda r: (r.millis, index.get(r.strategy, len(index)), r.strategy), default=None)
        runs_view = {s: {"answer": r.answer, "millis": r.millis} for s, r in sorted(rs.items())}
        out.append(LabelRecord(pid, runs_view, best.strategy if best else None))
    return out


def label(problems: Sequence[Problem], strategies: Sequence[tuple[str, object]], limit: float,
          log: str | Path, jobs: int = 1) -> list[LabelRecord]:
    runs = run_labelling(problems, strategies, limit, log, jobs)
    return compute_labels(runs, [s for s, _ in strategies], limit, [p.id for p in problems])


# ------------------------------------------------------------------ balancing


def balance(records: Sequence[LabelRecord], cap_per_label: int, unsolved_quota: int,
            rng: random.Random) -> list[str]:
    """At most ``cap_per_label`` problems per label plus ``unsolved_quota`` unsolved ones."""
    by_label: dict[str, list[str]] = {}
    unsolved: list[str] = []
    for rec in records:
        if rec.label is None:
            unsolved.append(rec.problem)
        else:
            by_label.setdefault(rec.label, []).append(rec.problem)
    chosen: list[str] = []
    for lab in sorted(by_label):
        pool = sorted(by_label[lab])
        chosen.extend(pool if len(pool) <= cap_per_label else rng.sample(pool, cap_per_label))
    pool = sorted(unsolved)
    chosen.extend(rng.sample(pool, min(unsolved_quota, len(pool))))
    rng.shuffle(chosen)
    return chosen
