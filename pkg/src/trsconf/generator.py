"""Random TRS generation with left-linearity control and a term-size cap."""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from .rewriting import syntactic_predicates
from .terms import App, Rule, Symbol, Term, Trs, Var, vars_of
from .trs_io import print_trs

MAX_RULE_RETRIES = 50


class GenerationError(RuntimeError):
    """No admissible symbol for a root or argument slot."""


@dataclass(frozen=True)
class GenConfig:
    max_funs: int = 12
    max_consts: int = 5
    max_vars: int = 8
    max_rules: int = 15
    max_arity: int = 8
    left_linear_prob: float = 0.6
    complex_bias: float = 1.6
    max_term_size: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.max_rules < 1:
            raise ValueError("max_rules must be at least 1")
        if self.max_term_size < 1:
            raise ValueError("max_term_size must be at least 1")
        if min(self.max_funs, self.max_consts, self.max_vars) < 0 or self.max_arity < 1:
            raise ValueError("symbol maxima must be non-negative and max_arity positive")
        if not 0.0 <= self.left_linear_prob <= 1.0:
            raise ValueError("left_linear_prob must lie in [0, 1]")
        if self.complex_bias < 0:
            raise ValueError("complex_bias must be non-negative")


@dataclass(frozen=True)
class GenContext:
    funs: tuple[Symbol, ...]
    consts: tuple[str, ...]
    vars: tuple[str, ...]
    comp: float
    linear: bool
    side: str  # "left" or "right"
    max_size: int = 15


def _root_candidates(ctx: GenContext, draw: float) -> list:
    funs = [("f", s) for s in ctx.funs]
    consts = [("c", c) for c in ctx.consts]
    vs = [("v", v) for v in ctx.vars]
    left = ctx.side == "left"
    if draw < ctx.comp:
        if funs:
            return funs
        # complex term demanded but no function symbols exist
        return consts if left else consts + vs
    if left:
        return funs + consts
    return funs + consts + vs


def gen_term(ctx: GenContext, rng: random.Random) -> Term:
    """One term: pick a root, then fill open argument slots level by level."""
    avail_vars = list(ctx.vars)
    max_size = ctx.max_size

    def fits(sym, size: int, open_slots: int) -> bool:
        # every still-open slot needs at least one more symbol
        return sym[0] != "f" or size + 1 + open_slots - 1 + sym[1].arity <= max_size

    roots = [s for s in _root_candidates(ctx, rng.random()) if fits(s, 0, 1)]
    if not roots:
        raise GenerationError("no admissible root symbol")
    root = rng.choice(roots)
    size = 1
    if root[0] == "v" and ctx.linear and ctx.side == "left":
        avail_vars.remove(root[1])
    # nodes are [kind, name, children]; children of functions start as None (open)
    tree = [root[0], root[1].name if root[0] == "f" else root[1],
            [None] * root[1].arity if root[0] == "f" else []]
    frontier = [tree] if root[0] == "f" else []
    open_slots = root[1].arity if root[0] == "f" else 0
    tagged_funs = [("f", s) for s in ctx.funs]
    tagged_consts = [("c", c) for c in ctx.consts]
    tagged_vars = [("v", v) for v in avail_vars]
    while frontier:
        nxt = []
        for node in frontier:
            for k in range(len(node[2])):
                room = max_size - size - open_slots  # same test as fits()
                cands = [s for s in tagged_funs if s[1].arity <= room] + tagged_consts + tagged_vars
                if not cands:
                    raise GenerationError("no admissible argument symbol")
                sym = rng.choice(cands)
                size += 1
                open_slots -= 1
                if sym[0] == "f":
                    child = ["f", sym[1].name, [None] * sym[1].arity]
                    open_slots += sym[1].arity
                    nxt.append(child)
                else:
                    child = [sym[0], sym[1], []]
                    if sym[0] == "v" and ctx.linear and ctx.side == "left":
                        tagged_vars.remove(sym)
                node[2][k] = child
        frontier = nxt

    def build(node) -> Term:
        if node[0] == "v":
            return Var(node[1])
        return App(node[1], tuple(build(c) for c in node[2]))

    return build(tree)


def gen_rule(ctx: GenContext, rng: random.Random) -> Rule:
    left = GenContext(ctx.funs, ctx.consts, ctx.vars, ctx.comp, ctx.linear, "left", ctx.max_size)
    lhs = gen_term(left, rng)
    if type(lhs) is Var:
        raise GenerationError("variable left-hand side")
    used = tuple(sorted(vars_of(lhs)))
    right = GenContext(ctx.funs, ctx.consts, used, ctx.comp, ctx.linear, "right", ctx.max_size)
    rhs = gen_term(right, rng)
    return Rule(lhs, rhs)


@dataclass(frozen=True)
class GenInfo:
    """Per-TRS draw record written to the manifest."""

    name: str
    seed: int
    index: int
    forced_left_linear: bool
    left_linear: bool
    comp: float
    funs: int
    consts: int
    vars: int
    rules: int
    max_term_size: int
    resamples: int = 0


def _signature(cfg: GenConfig, rng: random.Random):
    while True:
        nf = rng.randint(0, cfg.max_funs)
        nc = rng.randint(0, cfg.max_consts)
        nv = rng.randint(0, cfg.max_vars)
        if nf + nc > 0:
            break
    funs = tuple(Symbol(f"f{i}", rng.randint(1, cfg.max_arity)) for i in range(1, nf + 1))
    consts = tuple(f"c{i}" for i in range(1, nc + 1))
    vs = tuple(f"x{i}" for i in range(1, nv + 1))
    return funs, consts, vs


def gen_trs(cfg: GenConfig, rng: random.Random, name: str = "") -> tuple[Trs, GenInfo]:
    # drawn once: linear draws fail more often, and redrawing on failure would bias the fraction
    linear = rng.random() < cfg.left_linear_prob
    resamples = 0
    while True:
        funs, consts, vs = _signature(cfg, rng)
        n_rules = rng.randint(1, cfg.max_rules)
        comp = rng.uniform(0.0, cfg.complex_bias)
        ctx = GenContext(funs, consts, vs, comp, linear, "left", cfg.max_term_size)
        rules: list[Rule] = []
        try:
            for _ in range(n_rules):
                for attempt in range(MAX_RULE_RETRIES):
                    try:
                        rules.append(gen_rule(ctx, rng))
                        break
                    except GenerationError:
                        if attempt == MAX_RULE_RETRIES - 1:
                            raise
        except GenerationError:
            resamples += 1
            continue
        trs = Trs(tuple(rules), frozenset(vs), name)
        info = GenInfo(name, cfg.seed, -1, linear, syntactic_predicates(trs).left_linear, comp,
                       len(funs), len(consts), len(vs), len(rules), cfg.max_term_size, resamples)
        return trs, info


def rng_for(seed: int, index: int) -> random.Random:
    """Independent, reproducible substream for TRS number ``index``."""
    return random.Random(f"{seed}:{index}")


def generate_one(cfg: GenConfig, index: int) -> tuple[Trs, GenInfo]:
    name = f"gen_{cfg.seed}_{index:06d}"
    trs, info = gen_trs(cfg, rng_for(cfg.seed, index), name)
    return trs, GenInfo(**{**asdict(info), "index": index})


def generate(cfg: GenConfig, count: int, start: int = 0):
    for i in range(start, start + count):
        yield generate_one(cfg, i)


def write_dataset(cfg: GenConfig, count: int, out_dir: str | Path) -> Path:
    """Write one ``.trs`` per problem plus ``manifest.jsonl``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for trs, info in generate(cfg, count):
            (out / f"{info.name}.trs").write_text(print_trs(trs) + "\n", encoding="utf-8")
            fh.write(json.dumps(asdict(info), sort_keys=True) + "\n")
    return manifest
