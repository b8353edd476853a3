"""Greedy time-sliced schedules over an evaluation matrix."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .portfolio import EvalMatrix

DEFAULT_BUDGET = 60.0
# slot patterns for a 60 second budget; other budgets scale them
PATTERNS: tuple[tuple[float, ...], ...] = (
    (60.0,),
    (30.0, 30.0),
    (10.0,) * 6,
    (0.5,) * 8 + (4.0, 8.0, 12.0, 16.0, 15.5),
    (1.0, 2.0, 4.0, 8.0, 16.0, 29.0),
)


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    slots: tuple[tuple[str, float], ...]
    solved: frozenset = frozenset()
    pattern: int = -1

    @property
    def total(self) -> float:
        return sum(t for _, t in self.slots)


Times = Mapping[str, Mapping[str, int]]  # strategy id -> problem id -> millis of a solve


def times_from_matrix(matrix: EvalMatrix, allow_mixed: bool = False) -> dict[str, dict[str, int]]:
    """Solve times per strategy; refuses matrices measured with different worker counts."""
    workers = {ev.workers for ev in matrix.cells.values()}
    if len(workers) > 1 and not allow_mixed:
        raise ScheduleError(f"evaluations mix worker counts {sorted(workers)}")
    out: dict[str, dict[str, int]] = {}
    for (sid, pid), ev in matrix.cells.items():
        out.setdefault(sid, {})
        if ev.solved:
            out[sid][pid] = ev.millis
    return out


def covered(slots: Sequence[tuple[str, float]], times: Times) -> set[str]:
    out: set[str] = set()
    for sid, secs in slots:
        out |= {p for p, ms in times.get(sid, {}).items() if ms <= secs * 1000}
    return out


def greedy_schedule(times: Times, pattern: Sequence[float], order: Sequence[str] | None = None) -> Schedule:
    """Fill slots in pattern order with the strategy adding most new solves.

    Ties go to the earlier strategy in ``order``; a slot that adds nothing is dropped.
    """
    order = list(times) if order is None else list(order)
    done: set[str] = set()
    slots = []
    for secs in pattern:
        best, gain = None, 0
        for sid in order:
            new = {p for p, ms in times.get(sid, {}).items() if ms <= secs * 1000} - done
            if len(new) > gain:
                best, gain = sid, len(new)
        if best is None:
            continue
        slots.append((best, float(secs)))
        done |= {p for p, ms in times[best].items() if ms <= secs * 1000}
    return Schedule(tuple(slots), frozenset(done))


def patterns_for(budget: float) -> list[tuple[float, ...]]:
    scale = budget / DEFAULT_BUDGET
    out = [(float(budget),)]
    for pat in PATTERNS:
        scaled = tuple(t * scale for t in pat)
        if scaled not in out:
            out.append(scaled)
    return out


def best_schedule(times: Times, budget: float = DEFAULT_BUDGET, shuffles: int = 100,
                  rng: random.Random | None = None, patterns: Sequence[Sequence[float]] | None = None,
                  order: Sequence[str] | None = None) -> Schedule:
    """Best greedy schedule over the pattern catalogue and shuffled slot orders.

    Ranking: most problems solved, then shorter total time, then earlier candidate.
    """
    rng = rng or random.Random(0)
    cands: list[tuple[float, ...]] = [tuple(p) for p in (patterns if patterns is not None else patterns_for(budget))]
    if not any(len(p) == 1 and abs(p[0] - budget) < 1e-9 for p in cands):
        cands.insert(0, (float(budget),))
    for p in cands:
        if sum(p) > budget + 1e-6:
            raise ScheduleError(f"pattern {list(p)} exceeds the budget {budget}")
    expanded = []
    for p in cands:
        expanded.append(p)
        for _ in range(shuffles if len(set(p)) > 1 else 0):
            q = list(p)
            rng.shuffle(q)
            expanded.append(tuple(q))
    best = None
    for i, p in enumerate(expanded):
        s = greedy_schedule(times, p, order)
        s = Schedule(s.slots, s.solved, i)
        if best is None or (len(s.solved), -s.total) > (len(best.solved), -best.total):
            best = s
    return best


# -------------------------------------------------------------------- files


def parse_schedule(text: str) -> Schedule:
    slots = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split("\t") if "\t" in line else line.split(",")
        if len(parts) != 2:
            raise ScheduleError(f"line {no}: expected 'strategy<TAB>seconds'")
        sid, secs = parts[0].strip(), parts[1].strip()
        try:
            t = float(secs)
        except ValueError:
            raise ScheduleError(f"line {no}: bad time {secs!r}") from None
        if t <= 0:
            raise ScheduleError(f"line {no}: time must be positive")
        slots.append((sid, t))
    return Schedule(tuple(slots))


def print_schedule(s: Schedule) -> str:
    return "".join(f"{sid}\t{t:g}\n" for sid, t in s.slots)


def read_schedule(path: str | Path) -> Schedule:
    return parse_schedule(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- execution


@dataclass(frozen=True)
class ScheduleRun:
    answer: str
    slot: int  # index of the deciding slot, -1 if none
    elapsed: float
    proof: str = ""


def run_schedule(s: Schedule, strategies: Mapping[str, object], trs, workers: int = 1) -> ScheduleRun:
    """Run the slots in order until one answers YES or NO."""
    from .engine import eval_strategy

    start = time.monotonic()
    for i, (sid, secs) in enumerate(s.slots):
        if sid not in strategies:
            raise ScheduleError(f"unknown strategy {sid}")
        out = eval_strategy(strategies[sid], trs, secs, workers)
        if out.answer in ("YES", "NO"):
            return ScheduleRun(out.answer, i, time.monotonic() - start, out.certificate)
    return ScheduleRun("MAYBE", -1, time.monotonic() - start)
