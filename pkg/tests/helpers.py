"""Shared test helpers: random terms and an independent rewriting oracle."""

import random

from trsconf.terms import App, Var


def random_term(rng, funs, consts, variables, depth):
    """funs: list of (name, arity); a leaf is a constant or a variable."""
    leaves = [App(c, ()) for c in consts] + [Var(v) for v in variables]
    if depth == 0 or not funs or rng.random() < 0.3:
        return rng.choice(leaves) if leaves else App(funs[0][0], tuple(App("k", ()) for _ in range(funs[0][1])))
    name, arity = rng.choice(funs)
    return App(name, tuple(random_term(rng, funs, consts, variables, depth - 1) for _ in range(arity)))


def naive_match(p, s, sigma=None):
    sigma = dict(sigma or {})
    if isinstance(p, Var):
        if p.name in sigma:
            return sigma if sigma[p.name] == s else None
        sigma[p.name] = s
        return sigma
    if not isinstance(s, App) or s.fn != p.fn or len(s.args) != len(p.args):
        return None
    for a, b in zip(p.args, s.args):
        sigma = naive_match(a, b, sigma)
        if sigma is None:
            return None
    return sigma


def naive_subst(t, sigma):
    if isinstance(t, Var):
        return sigma.get(t.name, t)
    return App(t.fn, tuple(naive_subst(a, sigma) for a in t.args))


def naive_reducts(t, rules):
    """All one-step reducts, computed without the library's rewriting code."""
    out = set()
    for rule in rules:
        sigma = naive_match(rule.lhs, t)
        if sigma is not None:
            out.add(naive_subst(rule.rhs, sigma))
    if isinstance(t, App):
        for i, a in enumerate(t.args):
            for r in naive_reducts(a, rules):
                out.add(App(t.fn, t.args[:i] + (r,) + t.args[i + 1:]))
    return out


def naive_reach(t, rules, depth, cap=5000):
    """Reachable set within ``depth`` steps; None when ``cap`` terms are exceeded."""
    seen = {t}
    frontier = {t}
    for _ in range(depth):
        nxt = set()
        for u in frontier:
            for r in naive_reducts(u, rules):
                if r not in seen:
                    seen.add(r)
                    nxt.add(r)
        if len(seen) > cap:
            return None
        frontier = nxt
        if not frontier:
            break
    return seen


def rng(seed=0):
    return random.Random(seed)


# ---------------------------------------------------------------- renamings


def _map_term(t, fmap, vmap):
    if isinstance(t, Var):
        return Var(vmap.get(t.name, t.name))
    return App(fmap.get(t.fn, t.fn), tuple(_map_term(a, fmap, vmap) for a in t.args))


def _arity_groups(trs):
    groups = {}
    for s in sorted(trs.signature):
        groups.setdefault(s.arity, []).append(s.name)
    return groups


def rename_trs(trs, rng):
    """Apply a random arity-preserving symbol bijection, fresh variable names and a rule shuffle."""
    from trsconf.terms import Rule, Trs

    fmap = {}
    for arity, names in _arity_groups(trs).items():
        targets = [f"r{arity}_{i}" for i in range(len(names))]
        rng.shuffle(targets)
        fmap.update(zip(names, targets))
    variables = sorted(trs.variables)
    fresh = [f"w{i}" for i in range(len(variables))]
    rng.shuffle(fresh)
    vmap = dict(zip(variables, fresh))
    rules = [Rule(_map_term(r.lhs, fmap, vmap), _map_term(r.rhs, fmap, vmap)) for r in trs.rules]
    rng.shuffle(rules)
    return Trs(tuple(rules), frozenset(fresh))


def _normal_rule(rule, fmap):
    names = {}

    def go(t):
        if isinstance(t, Var):
            names.setdefault(t.name, f"v{len(names)}")
            return Var(names[t.name])
        return App(fmap.get(t.fn, t.fn), tuple(go(a) for a in t.args))

    lhs = go(rule.lhs)
    return (lhs, go(rule.rhs))


def brute_equivalent(a, b, limit=200_000):
    """Equal up to symbol bijection (per arity), variable renaming and rule order.

    Tries every bijection; returns None when there are more than ``limit``.
    """
    import itertools
    from collections import Counter
    from math import factorial

    ga, gb = _arity_groups(a), _arity_groups(b)
    if {k: len(v) for k, v in ga.items()} != {k: len(v) for k, v in gb.items()}:
        return False
    if len(a.rules) != len(b.rules):
        return False
    total = 1
    for names in ga.values():
        total *= factorial(len(names))
    if total > limit:
        return None
    target = Counter(_normal_rule(r, {}) for r in b.rules)
    arities = sorted(ga)
    for perms in itertools.product(*(itertools.permutations(gb[k]) for k in arities)):
        fmap = {}
        for k, perm in zip(arities, perms):
            fmap.update(zip(ga[k], perm))
        if Counter(_normal_rule(r, fmap) for r in a.rules) == target:
            return True
    return False


def perturb_trs(trs, rng):
    """Change one rule: a right-hand subterm becomes a constant, or a symbol gains an argument."""
    from trsconf.terms import Rule, Trs, positions, replace_at, subterm_at

    rules = list(trs.rules)
    i = rng.randrange(len(rules))
    rule = rules[i]
    if rng.random() < 0.5:
        pos = rng.choice(list(positions(rule.rhs)))
        new = App("k_new", ())
        if subterm_at(rule.rhs, pos) == new:
            new = App("k_other", ())
        rules[i] = Rule(rule.lhs, replace_at(rule.rhs, pos, new))
    else:
        apps = [p for p in positions(rule.lhs) if isinstance(subterm_at(rule.lhs, p), App)]
        pos = rng.choice(apps)
        old = subterm_at(rule.lhs, pos)
        grown = App(old.fn + "_plus", old.args + (App("k_new", ()),))
        rules[i] = Rule(replace_at(rule.lhs, pos, grown), rule.rhs)
    return Trs(tuple(rules), trs.variables)
