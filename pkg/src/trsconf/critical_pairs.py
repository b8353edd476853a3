"""Overlaps, critical pairs and variable-position peaks.

Rule ``i`` (1-based) is renamed apart with the suffix ``#i``.  In a self-overlap
the inner copy gets ``#i'`` instead.  ``#`` is not an identifier character, so
renamed variables never clash with variables of a parsed problem.
"""

from __future__ import annotations

from dataclasses import dataclass

from .runtime import checkpoint
from .terms import (
    Position,
    Rule,
    Term,
    Trs,
    Var,
    apply_subst,
    fun_positions,
    rename_rule,
    replace_at,
    rule_is_variant,
    subterm_at,
    unify,
    var_positions,
)


@dataclass(frozen=True)
class Overlap:
    inner_rule: Rule
    position: Position
    outer_rule: Rule
    mgu: dict
    inner_index: int
    outer_index: int

    def __hash__(self):
        return hash((self.inner_rule, self.position, self.outer_rule, self.inner_index, self.outer_index))


@dataclass(frozen=True)
class Peak:
    """A one-step divergence ``left <- source -> right``.

    ``left_step`` and ``right_step`` are ``(position, rule index)`` pairs that
    replay each side from the source with the original rules.
    """

    source: Term
    left: Term
    right: Term
    left_step: tuple[Position, int] | None = None
    right_step: tuple[Position, int] | None = None

    def certificate(self) -> str:
        return f"PEAK {self.left} <- {self.source} -> {self.right}"


@dataclass(frozen=True)
class CriticalPair:
    left: Term
    right: Term
    peak: Term
    position: Position
    inner_index: int = -1
    outer_index: int = -1

    def as_peak(self) -> Peak:
        return Peak(self.peak, self.left, self.right,
                    (self.position, self.inner_index), ((), self.outer_index))

    def __str__(self):
        return f"{self.left} ≈ {self.right}"


def _renamed_pair(rules, i: int, j: int) -> tuple[Rule, Rule]:
    outer = rename_rule(rules[j], f"#{j + 1}")
    inner = rename_rule(rules[i], f"#{i + 1}'" if i == j else f"#{i + 1}")
    return inner, outer


def overlaps(trs: Trs) -> list[Overlap]:
    """All overlaps: outer rule, then function positions of its lhs, then inner rule."""
    rules = trs.rules
    out: list[Overlap] = []
    for j, outer_orig in enumerate(rules):
        for p in fun_positions(outer_orig.lhs):
            sub_fn = subterm_at(outer_orig.lhs, p).fn
            for i, inner_orig in enumerate(rules):
                checkpoint()
                if inner_orig.lhs.fn != sub_fn:
                    continue
                if not p and (i == j or rule_is_variant(inner_orig, outer_orig)):
                    continue
                inner, outer = _renamed_pair(rules, i, j)
                sigma = unify(inner.lhs, subterm_at(outer.lhs, p))
                if sigma is not None:
                    out.append(Overlap(inner, p, outer, sigma, i, j))
    return out


def critical_pair_of(ov: Overlap) -> CriticalPair:
    peak = apply_subst(ov.outer_rule.lhs, ov.mgu)
    left = replace_at(peak, ov.position, apply_subst(ov.inner_rule.rhs, ov.mgu))
    right = apply_subst(ov.outer_rule.rhs, ov.mgu)
    return CriticalPair(left, right, peak, ov.position, ov.inner_index, ov.outer_index)


def critical_pairs(trs: Trs) -> list[CriticalPair]:
    return [critical_pair_of(ov) for ov in overlaps(trs)]


def variable_peaks(trs: Trs) -> list[Peak]:
    """Peaks from inserting one lhs at one variable occurrence of another lhs.

    The source is ``l2{x -> l1}``; ``left`` is its root reduct ``r2{x -> l1}``
    and ``right`` rewrites only the designated occurrence of ``l1`` to ``r1``.
    Peaks with identical sides are dropped.
    """
    rules = trs.rules
    out: list[Peak] = []
    for j in range(len(rules)):
        for q in var_positions(rules[j].lhs):
            for i in range(len(rules)):
                checkpoint()
                inner, outer = _renamed_pair(rules, i, j)
                x = subterm_at(outer.lhs, q)
                assert type(x) is Var
                sigma = {x.name: inner.lhs}
                source = apply_subst(outer.lhs, sigma)
                root = apply_subst(outer.rhs, sigma)
                at_q = replace_at(source, q, inner.rhs)
                if root == at_q:
                    continue
                out.append(Peak(source, root, at_q, ((), j), (q, i)))
    return out
