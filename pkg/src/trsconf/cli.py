"""Command line front end: ``trsconf <command> ...``.

Exit codes: 0 on success (a MAYBE answer included), 2 on unreadable or
malformed input, 1 on any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from . import strategy as S
from .trs_io import TrsParseError, read_problem

WORKERS_ENV = "TRSCONF_WORKERS"
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("trsconf")


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 2."""


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ------------------------------------------------------------------ helpers


def _load_trs(path: str | Path):
    try:
        return read_problem(path).trs
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except TrsParseError as exc:
        raise InputError(f"{path}:{exc.line}:{exc.col}: {exc.kind}: {exc.message}") from None


def _load_strategy(path: str | None) -> S.StrategyDefs:
    from .engine import default_strategy, validate

    if path is None:
        return default_strategy()
    try:
        defs = S.parse_strategy(Path(path).read_text(encoding="utf-8"))
        validate(defs)
        return defs
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except S.StrategySyntaxError as exc:
        raise InputError(f"{path}:{exc.line}:{exc.col}: {exc}") from None
    except S.StrategyError as exc:
        raise InputError(f"{path}: {exc}") from None


def _problem_files(directory: str | Path) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"{directory}: not a directory")
    return sorted(d.rglob("*.trs"))


def _problem_id(path: Path, root: Path) -> str:
    return path.relative_to(root).with_suffix("").as_posix()


def _write_jsonl(path: str | Path, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# -------------------------------------------------------------------- prove


def cmd_prove(args) -> int:
    from .engine import eval_strategy

    trs = _load_trs(args.problem)
    defs = _load_strategy(args.strategy)
    if args.entry and args.entry not in defs.defs:
        raise InputError(f"no definition named {args.entry}")
    out = eval_strategy(defs, trs, args.timeout, args.workers, args.entry)
    print(out.answer)
    if args.cert and out.answer in ("YES", "NO"):
        Path(args.cert).write_text(out.certificate + "\n", encoding="utf-8")
    if args.verbose:
        for entry in out.trace:
            print(f"  {entry.proc}\t{entry.result}\t{entry.elapsed:.3f}s")
    return EXIT_OK


# ---------------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    from .generator import GenConfig, write_dataset

    try:
        cfg = GenConfig(args.max_funs, args.max_consts, args.max_vars, args.max_rules, args.max_arity,
                        args.left_linear, args.complex_bias, args.max_size, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    manifest = write_dataset(cfg, args.count, args.out)
    print(f"wrote {args.count} systems, manifest {manifest}")
    return EXIT_OK


# -------------------------------------------------------------------- dedup


def cmd_dedup(args) -> int:
    from .dataset import GENERATED, HUMAN, Problem, dedup, write_classes

    problems = []
    for directory, origin in [(d, HUMAN) for d in args.human] + [(d, GENERATED) for d in args.dirs]:
        for path in _problem_files(directory):
            try:
                trs = read_problem(path).trs
            except TrsParseError as exc:
                log.warning("skipping %s: %s", path, exc)
                continue
            problems.append(Problem(path.as_posix(), trs, origin))
    classes, survivors = dedup(problems)
    write_classes(args.classes, classes)
    Path(args.survivors).write_text("".join(s + "\n" for s in survivors), encoding="utf-8")
    dups = sum(len(c.members) - 1 for c in classes)
    print(f"{len(problems)} problems, {len(classes)} classes, {dups} duplicates removed")
    return EXIT_OK


# -------------------------------------------------------------------- label


def cmd_label(args) -> int:
    from .dataset import Problem, label

    root = Path(args.problems)
    problems = [Problem(_problem_id(p, root), _load_trs(p)) for p in _problem_files(root)]
    files = list(args.strategy)
    if args.strategies:
        d = Path(args.strategies)
        if not d.is_dir():
            raise InputError(f"{d}: not a directory")
        files += [str(f) for f in sorted(d.glob("*.strategy"))]
    if not files:
        raise InputError("give --strategy FILE or --strategies DIR")
    strategies = [(Path(s).stem, _load_strategy(s)) for s in files]
    if len({sid for sid, _ in strategies}) != len(strategies):
        raise InputError("strategy file names must be distinct")
    records = label(problems, strategies, args.limit, args.log, args.jobs)
    _write_jsonl(args.out, ({"problem": r.problem, "label": r.label, "runs": r.runs} for r in records))
    solved = sum(r.solved for r in records)
    print(f"{len(records)} problems labelled, {solved} solved")
    return EXIT_OK


# ------------------------------------------------------------------ balance


def cmd_balance(args) -> int:
    from .dataset import LabelRecord, balance

    records = []
    try:
        for line in Path(args.labels).read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                records.append(LabelRecord(d["problem"], d.get("runs", {}), d.get("label")))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"{args.labels}: {exc}") from None
    chosen = balance(records, args.cap, args.unsolved, random.Random(args.seed))
    text = "".join(p + "\n" for p in chosen)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------- invent


def cmd_invent(args) -> int:
    from .engine import data_text
    from .portfolio import Hyper, ProverRunner, SpaceError, grackle_loop, initial_strategies, parse_space

    try:
        space_text = Path(args.space).read_text(encoding="utf-8") if args.space else data_text("portfolio.space")
        template = Path(args.template).read_text(encoding="utf-8") if args.template else data_text("portfolio.template")
        space = parse_space(space_text, template)
        init = initial_strategies(space)
    except OSError as exc:
        raise InputError(str(exc)) from None
    except (SpaceError, S.StrategyError) as exc:
        raise InputError(f"parameter space: {exc}") from None
    root = Path(args.problems)
    problems = {_problem_id(p, root): _load_trs(p) for p in _problem_files(root)}
    hyper = Hyper(
        generation_size=args.generation_size,
        eval_limit=args.limit,
        spec_budget=args.spec_budget,
        iteration_cap=args.iterations,
        wall_budget=args.budget * 3600 if args.budget else None,
        max_evals=args.max_evals,
        workers=args.workers,
    )
    runner = ProverRunner(problems, args.limit, args.jobs)
    state = grackle_loop(init, sorted(problems), hyper, runner, random.Random(args.seed), space, args.out,
                         log=lambda msg: log.info(msg))
    print(f"{len(state.strategies)} strategies, {len(state.covered())}/{len(problems)} problems covered")
    return EXIT_OK


# ------------------------------------------------------------------ combine


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _pattern(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split pattern {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("split patterns need positive seconds")
    return values


def cmd_combine(args) -> int:
    from .portfolio import EvalMatrix
    from .scheduler import ScheduleError, best_schedule, print_schedule, times_from_matrix

    if not Path(args.matrix).exists():
        raise InputError(f"{args.matrix}: no such file")
    try:
        times = times_from_matrix(EvalMatrix(args.matrix), args.allow_mixed)
        sched = best_schedule(times, args.budget, args.shuffles, random.Random(args.seed),
                              args.pattern or None, order=sorted(times))
    except ScheduleError as exc:
        raise InputError(str(exc)) from None
    text = print_schedule(sched)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"# covers {len(sched.solved)} problems in {sched.total:g}s", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------- run


def cmd_run(args) -> int:
    from .scheduler import ScheduleError, read_schedule, run_schedule

    try:
        sched = read_schedule(args.schedule)
    except OSError as exc:
        raise InputError(f"{args.schedule}: {exc.strerror or exc}") from None
    except ScheduleError as exc:
        raise InputError(f"{args.schedule}: {exc}") from None
    trs = _load_trs(args.problem)
    base = Path(args.portfolio)
    defs = {}
    for sid, _ in sched.slots:
        for cand in (base / "strategies" / f"{sid}.strategy", base / f"{sid}.strategy", base / sid):
            if cand.is_file():
                defs[sid] = _load_strategy(str(cand))
                break
        else:
            raise InputError(f"strategy {sid} not found under {base}")
    out = run_schedule(sched, defs, trs, args.workers)
    print(out.answer)
    return EXIT_OK


# -------------------------------------------------------------------- bench


@dataclass(frozen=True)
class Row:
    problem: str
    answer: str
    millis: int
    strategy: str
    error: str = ""


def _bench_one(job) -> Row:
    from .engine import eval_strategy

    pid, path, defs, sname, timeout, workers = job
    start = time.monotonic()
    try:
        trs = read_problem(path).trs
        out = eval_strategy(defs, trs, timeout, workers)
        return Row(pid, out.answer, int(round(out.total * 1000)), sname)
    except Exception as exc:  # recorded, the batch goes on
        return Row(pid, "MAYBE", int(round((time.monotonic() - start) * 1000)), sname, f"{type(exc).__name__}: {exc}")


def summary(rows) -> dict[str, int]:
    yes = sum(r.answer == "YES" for r in rows)
    no = sum(r.answer == "NO" for r in rows)
    return {"yes": yes, "no": no, "maybe": len(rows) - yes - no, "solved": yes + no}


def cmd_bench(args) -> int:
    root = Path(args.problems)
    defs = _load_strategy(args.strategy)
    sname = Path(args.strategy).stem if args.strategy else "default"
    jobs = [(_problem_id(p, root), p, defs, sname, args.timeout, args.workers) for p in _problem_files(root)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    if args.out:
        _write_jsonl(args.out, (asdict(r) for r in rows))
    width = max([len(r.problem) for r in rows] + [7])
    for r in rows:
        print(f"{r.problem:<{width}}  {r.answer:<5}  {r.millis:>7} ms" + (f"  {r.error}" if r.error else ""))
    s = summary(rows)
    print(f"yes     {s['yes']}\nno      {s['no']}\nsolved  {s['solved']}\nmaybe   {s['maybe']}")
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    workers = argparse.ArgumentParser(add_help=False)
    workers.add_argument("--workers", type=int, default=default_workers(),
                         help=f"processor slots per proof attempt (default ${WORKERS_ENV} or 1)")

    p = argparse.ArgumentParser(prog="trsconf", description="Confluence prover and strategy portfolio tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prove", parents=[common, workers], help="decide confluence of one problem file")
    sp.add_argument("problem", help="problem file in the rule format")
    sp.add_argument("--strategy", "--strategy-file", help="strategy file (default: the shipped strategy)")
    sp.add_argument("--entry", help="definition to run (default: the first one)")
    sp.add_argument("--timeout", type=_positive, default=60.0, help="seconds (default 60)")
    sp.add_argument("--cert", help="write the YES/NO certificate to this file")
    sp.set_defaults(func=cmd_prove)

    sp = sub.add_parser("gen", parents=[common], help="generate random rewrite systems")
    sp.add_argument("--count", type=int, required=True, help="number of systems")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--max-funs", type=int, default=12, help="maximum non-constant symbols (default 12)")
    sp.add_argument("--max-consts", type=int, default=5, help="maximum constants (default 5)")
    sp.add_argument("--max-vars", type=int, default=8, help="maximum variables (default 8)")
    sp.add_argument("--max-rules", type=int, default=15, help="maximum rules (default 15)")
    sp.add_argument("--max-arity", type=int, default=8, help="maximum arity (default 8)")
    sp.add_argument("--left-linear", type=float, default=0.6, help="probability of a forced left-linear system")
    sp.add_argument("--complex-bias", type=float, default=1.6, help="upper bound of the complexity draw")
    sp.add_argument("--max-size", type=int, default=15, help="maximum term size (default 15)")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("dedup", parents=[common], help="remove duplicates modulo renaming")
    sp.add_argument("dirs", nargs="*", default=[], help="directories of generated problems")
    sp.add_argument("--human", action="append", default=[], help="directory of human-made problems (kept first)")
    sp.add_argument("--classes", default="classes.tsv", help="duplicate classes output (TSV)")
    sp.add_argument("--survivors", default="survivors.txt", help="surviving problem paths, one per line")
    sp.set_defaults(func=cmd_dedup)

    sp = sub.add_parser("label", parents=[common], help="label problems with their fastest strategy")
    sp.add_argument("--problems", required=True, help="problem directory")
    sp.add_argument("--strategy", action="append", default=[], help="strategy file; repeatable")
    sp.add_argument("--strategies", help="directory of *.strategy files, taken in name order")
    sp.add_argument("--limit", type=_positive, default=60.0, help="seconds per attempt (default 60)")
    sp.add_argument("--log", default="runs.jsonl", help="resumable run log")
    sp.add_argument("--out", default="labels.jsonl", help="label output")
    sp.add_argument("--jobs", type=int, default=default_workers(), help="parallel attempts")
    sp.set_defaults(func=cmd_label)

    sp = sub.add_parser("balance", parents=[common], help="select a label-balanced subset")
    sp.add_argument("--labels", required=True, help="labels.jsonl from the label command")
    sp.add_argument("--cap", type=int, required=True, help="maximum problems per label")
    sp.add_argument("--unsolved", type=int, default=0, help="number of unsolved problems to add")
    sp.add_argument("--out", help="output file (default stdout)")
    sp.set_defaults(func=cmd_balance)

    sp = sub.add_parser("invent", parents=[common, workers], help="invent a strategy portfolio")
    sp.add_argument("--space", help="parameter space file (default: the shipped one)")
    sp.add_argument("--template", help="strategy template (default: the shipped one)")
    sp.add_argument("--problems", required=True, help="training problem directory")
    sp.add_argument("--limit", type=_positive, default=30.0, help="seconds per attempt (default 30)")
    sp.add_argument("--budget", type=_positive, help="wall-clock budget in hours")
    sp.add_argument("--iterations", type=int, default=50, help="iteration cap (default 50)")
    sp.add_argument("--generation-size", type=int, default=10, help="strategies per generation (default 10)")
    sp.add_argument("--spec-budget", type=float, default=600.0, help="seconds per specialisation (default 600)")
    sp.add_argument("--max-evals", type=int, help="cap on distinct strategies evaluated")
    sp.add_argument("--jobs", type=int, default=1, help="parallel attempts")
    sp.add_argument("--out", default="portfolio", help="portfolio directory (resumed if present)")
    sp.set_defaults(func=cmd_invent)

    sp = sub.add_parser("combine", parents=[common], help="build a time-sliced schedule")
    sp.add_argument("--matrix", required=True, help="evals.jsonl of a portfolio")
    sp.add_argument("--budget", type=_positive, default=60.0, help="total seconds (default 60)")
    sp.add_argument("--shuffles", type=int, default=100, help="shuffles per split pattern (default 100)")
    sp.add_argument("--pattern", type=_pattern, action="append", help="split pattern like 1,2,4; repeatable")
    sp.add_argument("--allow-mixed", action="store_true", help="accept evaluations with mixed worker counts")
    sp.add_argument("--out", help="schedule file (default stdout)")
    sp.set_defaults(func=cmd_combine)

    sp = sub.add_parser("run", parents=[common, workers], help="run a schedule on one problem")
    sp.add_argument("--schedule", required=True, help="schedule file")
    sp.add_argument("--problem", required=True, help="problem file")
    sp.add_argument("--portfolio", default="portfolio", help="directory holding the strategy files")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bench", parents=[common, workers], help="run a strategy over a problem directory")
    sp.add_argument("problems", help="problem directory")
    sp.add_argument("--strategy", "--strategy-file", help="strategy file (default: the shipped strategy)")
    sp.add_argument("--timeout", type=_positive, default=60.0, help="seconds per problem (default 60)")
    sp.add_argument("--jobs", type=int, default=default_workers(), help="parallel problems")
    sp.add_argument("--out", help="JSONL report")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    random.seed(args.seed)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
