"""Evaluation of strategies over the processor library."""

from __future__ import annotations

import contextlib
import gc
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

from . import processors as P
from . import strategy as S
from .rewriting import syntactic_predicates
from .runtime import Cancelled, Cpu, Ctx, Interrupt, Task, Timeout, activate, checkpoint, current
from .termination import TermBudget
from .terms import Trs

YES, NO, MAYBE = "YES", "NO", "MAYBE"
STAR_CAP = 64


class AbortStrategy(Exception):
    """Raised by ``s%`` when ``s`` fails."""


@dataclass(frozen=True)
class Result:
    success: bool
    problem: Trs
    answer: str | None = None  # YES or NO on a decided success
    proof: P.ProcResult | None = None


@dataclass(frozen=True)
class TraceEntry:
    proc: str
    elapsed: float
    result: str


@dataclass
class Outcome:
    answer: str
    success: bool
    trace: list[TraceEntry] = field(default_factory=list)
    total: float = 0.0
    proof: P.ProcResult | None = None

    @property
    def certificate(self) -> str:
        return self.proof.certificate if self.proof is not None else ""


def answer_of(o: Outcome) -> str:
    if not o.success or o.answer not in (YES, NO):
        return MAYBE
    return o.answer


# ---------------------------------------------------------------- registry


def _flag(flags: dict, name: str, default):
    v = flags.get(name, default)
    return default if v is None else v


def _int_flag(flags: dict, name: str, default: int) -> int:
    v = _flag(flags, name, default)
    if not isinstance(v, int):
        raise S.StrategyError(f"flag -{name} needs an integer")
    return v


def run_orthogonal(trs: Trs, flags: dict):
    return P.proc_orthogonal(trs)


def run_closed(trs: Trs, flags: dict):
    return P.proc_strongly_closed(trs, _int_flag(flags, "strongly", 3), _int_flag(flags, "width", -1))


def run_kb(trs: Trs, flags: dict):
    budget = TermBudget(
        lpo="nolpo" not in flags,
        kbo="nokbo" not in flags,
        interp="nopoly" not in flags,
        coeff_bound=_int_flag(flags, "bound", 3),
        weight_bound=_int_flag(flags, "weight", 3),
        time_cap=flags.get("time"),
    )
    return P.proc_knuth_bendix(trs, budget, _int_flag(flags, "depth", 1000))


def nonconfluence_config(flags: dict) -> P.NonconfluenceConfig:
    fun, var = "fun" in flags, "var" in flags
    mode = "both" if fun == var and fun else ("var" if var else "fun")
    tcap, nf = "tcap" in flags, "nf" in flags
    if not (tcap or nf):
        tcap = True
    return P.NonconfluenceConfig(
        steps=_int_flag(flags, "steps", 2),
        width=_int_flag(flags, "width", -1),
        overlap_mode=mode,
        use_tcap=tcap,
        use_nf=nf,
        join_guard_depth=_int_flag(flags, "guard", 6),
    )


def run_nonconfluence(trs: Trs, flags: dict):
    return P.proc_nonconfluence(trs, nonconfluence_config(flags))


def redundant_config(flags: dict) -> P.RedundantConfig:
    js, rhs = "js" in flags, "rhs" in flags
    develop = flags.get("development")
    if develop is None and "development" in flags:
        raise S.StrategyError("flag -development needs a value")
    if not (js or rhs or develop):
        js = True
    return P.RedundantConfig(
        js=js,
        rhs=rhs,
        develop=develop,
        size_cap=_int_flag(flags, "size", -1),
        join_m=_int_flag(flags, "m", 0),
        remove_depth=_int_flag(flags, "remove", -1),
        join_depth=_int_flag(flags, "depth", 5),
    )


def run_redundant(trs: Trs, flags: dict):
    return P.redundant_add(trs, redundant_config(flags))


def run_redundant_remove(trs: Trs, flags: dict):
    return P.redundant_remove(trs, _int_flag(flags, "depth", 2))


@dataclass(frozen=True)
class ProcSpec:
    run: Callable
    flags: dict  # flag name -> "switch", "int" or "num"


PROCESSORS: dict[str, ProcSpec] = {
    "orthogonal": ProcSpec(run_orthogonal, {}),
    "closed": ProcSpec(run_closed, {"strongly": "int", "width": "int"}),
    "kb": ProcSpec(run_kb, {"depth": "int", "nolpo": "switch", "nokbo": "switch", "nopoly": "switch",
                           "bound": "int", "weight": "int", "time": "num"}),
    "nonconfluence": ProcSpec(run_nonconfluence, {"steps": "int", "width": "int", "fun": "switch", "var": "switch",
                                                  "tcap": "switch", "nf": "switch", "guard": "int"}),
    "redundant": ProcSpec(run_redundant, {"js": "switch", "rhs": "switch", "development": "int", "size": "int",
                                          "m": "int", "remove": "int", "depth": "int"}),
    "redundant_remove": ProcSpec(run_redundant_remove, {"depth": "int"}),
}


def _pred_trs(trs: Trs) -> bool:
    return True


PREDICATES: dict[str, Callable[[Trs], bool]] = {"trs": _pred_trs}
for _name in ("left_linear", "right_linear", "linear", "ground", "collapsing", "duplicating"):
    PREDICATES[_name] = (lambda attr: lambda trs: getattr(syntactic_predicates(trs), attr))(_name)
    PREDICATES[_name.replace("_", "-")] = PREDICATES[_name]


def _check_flags(node: S.Proc) -> None:
    spec = PROCESSORS[node.name]
    for name, value in node.flags:
        kind = spec.flags.get(name)
        if kind is None:
            raise S.StrategyError(f"processor {node.name} has no flag -{name}")
        if kind == "switch" and value is not None:
            raise S.StrategyError(f"flag -{name} of {node.name} takes no value")
        if kind == "int" and not isinstance(value, int):
            raise S.StrategyError(f"flag -{name} of {node.name} needs an integer value")
        if kind == "num" and (value is None or value <= 0):
            raise S.StrategyError(f"flag -{name} of {node.name} needs a positive number")
        if name == "development" and value < 1:
            raise S.StrategyError("-development needs a value >= 1")
        if name == "steps" and value < 0:
            raise S.StrategyError("-steps must be non-negative")


def validate(defs: S.StrategyDefs, entry: str | None = None) -> None:
    """Resolve every name reachable from the entry; raises StrategyError."""
    entry = entry or defs.entry
    if entry not in defs.defs:
        raise S.StrategyError(f"undefined entry point {entry!r}")
    S.check_acyclic(defs)
    seen: set[str] = set()
    todo = [entry]
    while todo:
        name = todo.pop()
        if name in seen:
            continue
        seen.add(name)
        stack = [defs.defs[name]]
        while stack:
            n = stack.pop()
            if isinstance(n, S.Proc):
                if n.name in defs.defs:
                    if n.flags:
                        raise S.StrategyError(f"definition {n.name} cannot take flags")
                    todo.append(n.name)
                elif n.name in PROCESSORS:
                    _check_flags(n)
                else:
                    raise S.StrategyError(f"undefined processor or definition {n.name!r}")
            elif isinstance(n, S.If) and n.pred not in PREDICATES:
                raise S.StrategyError(f"unknown predicate {n.pred!r}")
            for attr in ("first", "second", "then", "orelse", "body"):
                child = getattr(n, attr, None)
                if child is not None:
                    stack.append(child)


# --------------------------------------------------------------- evaluator


class _Eval:
    def __init__(self, defs: S.StrategyDefs):
        self.defs = defs

    def run(self, node: S.Strategy, trs: Trs, trace: list) -> Result:
        checkpoint()
        method = getattr(self, "_" + type(node).__name__)
        return method(node, trs, trace)

    # leaves

    def _Fail(self, node, trs, trace):
        return Result(False, trs)

    def _Succ(self, node, trs, trace):
        return Result(True, trs)

    def _Proc(self, node: S.Proc, trs: Trs, trace) -> Result:
        if node.name in self.defs.defs:
            return self.run(self.defs.defs[node.name], trs, trace)
        spec = PROCESSORS[node.name]
        label = S.unparse(node)
        start = time.monotonic()
        try:
            out = spec.run(trs, dict(node.flags))
        except Interrupt:
            trace.append(TraceEntry(label, time.monotonic() - start, "interrupted"))
            raise
        elapsed = time.monotonic() - start
        if isinstance(out, Trs):
            changed = out != trs
            trace.append(TraceEntry(label, elapsed, "modified" if changed else "unchanged"))
            return Result(changed, out if changed else trs)
        trace.append(TraceEntry(label, elapsed, out.outcome))
        if out.outcome in (P.YES, P.NO):
            return Result(True, trs, out.outcome, out)
        return Result(False, trs)

    # combinators

    def _Seq(self, node: S.Seq, trs, trace):
        r = self.run(node.first, trs, trace)
        if not r.success:
            return Result(False, trs)
        if r.answer is not None:
            return r
        r2 = self.run(node.second, r.problem, trace)
        return r2 if r2.success else Result(False, trs)

    def _Choice(self, node: S.Choice, trs, trace):
        r = self.run(node.first, trs, trace)
        return r if r.success else self.run(node.second, trs, trace)

    def _If(self, node: S.If, trs, trace):
        branch = node.then if PREDICATES[node.pred](trs) else node.orelse
        return self.run(branch, trs, trace)

    def _Par(self, node: S.Par, trs, trace):
        parent = current()
        cpu = parent.task.cpu
        lock = threading.Condition()
        results: list = [None, None]
        traces: list[list] = [[], []]
        ctxs: list[Ctx] = []
        threads: list[threading.Thread] = []

        def body(k: int, ctx: Ctx):
            try:
                cpu.wait_turn(ctx.task)
                try:
                    with activate(ctx):
                        res = self.run((node.first, node.second)[k], trs, traces[k])
                except BaseException as exc:  # inspected by the parent
                    res = exc
                finally:
                    cpu.release()
            except BaseException as exc:
                res = exc
            with lock:
                results[k] = res
                lock.notify_all()

        for k in (0, 1):
            task = Task(cpu)
            ctx = parent.branch(task)
            ctxs.append(ctx)
            cpu.enqueue(task)
            t = threading.Thread(target=body, args=(k, ctx), daemon=True)
            threads.append(t)
        for t in threads:
            t.start()
        cpu.release()

        def winner():
            for k in (0, 1):
                if isinstance(results[k], Result) and results[k].success:
                    return k
            return None

        with lock:
            lock.wait_for(lambda: winner() is not None or all(r is not None for r in results))
            win = winner()
            if win is not None:
                ctxs[1 - win].cancel_flag.set()
        for t in threads:
            t.join()
        cpu.acquire(parent.task)
        for k in (0, 1):
            trace.extend(traces[k])
        # an interrupt of an enclosing context takes precedence
        parent.check()
        if win is not None:
            return results[win]
        for r in results:
            if isinstance(r, BaseException) and not isinstance(r, Cancelled):
                raise r
        return Result(False, trs)

    # iterators

    def _Opt(self, node: S.Opt, trs, trace):
        r = self.run(node.body, trs, trace)
        return r if r.success else Result(True, trs)

    def _iterate(self, body, trs, trace, limit: int) -> Result:
        cur = trs
        for _ in range(limit):
            r = self.run(body, cur, trace)
            if not r.success:
                break
            if r.answer is not None:
                return r
            if r.problem == cur:
                break
            cur = r.problem
        return Result(True, cur)

    def _Star(self, node: S.Star, trs, trace):
        return self._iterate(node.body, trs, trace, STAR_CAP)

    def _Plus(self, node: S.Plus, trs, trace):
        return self.run(S.Seq(S.Star(node.body), node.body), trs, trace)

    def _IterN(self, node: S.IterN, trs, trace):
        return self._iterate(node.body, trs, trace, min(node.n, STAR_CAP))

    def _IterTimed(self, node: S.IterTimed, trs, trace):
        ctx = current().child(node.secs)
        cur = trs
        try:
            with activate(ctx):
                for _ in range(STAR_CAP):
                    r = self.run(node.body, cur, trace)
                    if not r.success:
                        break
                    if r.answer is not None:
                        return r
                    if r.problem == cur:
                        break
                    cur = r.problem
        except Timeout as exc:
            if exc.ctx is not ctx:
                raise
        return Result(True, cur)

    # specifiers

    def _Bang(self, node: S.Bang, trs, trace):
        r = self.run(node.body, trs, trace)
        return r if r.success and r.answer is not None else Result(False, trs)

    def _Abort(self, node: S.Abort, trs, trace):
        r = self.run(node.body, trs, trace)
        if not r.success:
            raise AbortStrategy()
        return r

    def _Timed(self, node: S.Timed, trs, trace):
        ctx = current().child(node.secs)
        try:
            with activate(ctx):
                return self.run(node.body, trs, trace)
        except Timeout as exc:
            if exc.ctx is not ctx:
                raise
            return Result(False, trs)

    def _Modified(self, node: S.Modified, trs, trace):
        r = self.run(node.body, trs, trace)
        if not r.success:
            return r
        if node.modifier == "nono" and r.answer == NO:
            return Result(False, trs)
        return r


_gc_lock = threading.Lock()
_gc_depth = 0


@contextlib.contextmanager
def _frozen_heap():
    """Hide the pre-existing heap from the cyclic collector while evaluating.

    A full collection walks every tracked object, and on a large heap that
    stalls for tens of milliseconds, enough to break the wall-clock contract
    of short ``[f]`` slots.  Terms are immutable trees freed by reference
    counting, so only objects created during the run need scanning.
    """
    global _gc_depth
    with _gc_lock:
        if _gc_depth == 0:
            gc.freeze()
        _gc_depth += 1
    try:
        yield
    finally:
        with _gc_lock:
            _gc_depth -= 1
            if _gc_depth == 0:
                gc.unfreeze()


def eval_strategy(defs: S.StrategyDefs, trs: Trs, budget: float, workers: int = 1,
                  entry: str | None = None) -> Outcome:
    """Run the entry definition (implicitly under ``!``) within ``budget`` seconds."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    entry = entry or defs.entry
    validate(defs, entry)
    cpu = Cpu(workers)
    task = Task(cpu)
    start = time.monotonic()
    root = Ctx(task, start + budget)
    trace: list[TraceEntry] = []
    ev = _Eval(defs)
    cpu.acquire(task)
    try:
        with _frozen_heap(), activate(root):
            r = ev.run(S.Bang(S.Proc(entry)), trs, trace)
    except Timeout as exc:
        if exc.ctx is not root:
            raise
        r = Result(False, trs)
    except AbortStrategy:
        r = Result(False, trs)
    finally:
        cpu.release()
    total = time.monotonic() - start
    if r.success and r.answer in (YES, NO):
        return Outcome(r.answer, True, trace, total, r.proof)
    return Outcome(MAYBE, False, trace, total, None)


def eval_expression(text: str, trs: Trs, budget: float = 10.0, workers: int = 1) -> Outcome:
    """Evaluate a single strategy expression as an anonymous entry."""
    node = S.parse_expression(text)
    return eval_strategy(S.StrategyDefs({"MAIN": node}, "MAIN"), trs, budget, workers)


def data_text(name: str) -> str:
    """Contents of a file shipped in the package data directory."""
    return resources.files("trsconf").joinpath("data", name).read_text(encoding="utf-8")


def default_strategy() -> S.StrategyDefs:
    return S.parse_strategy(data_text("default.strategy"))
