"""Structure recovery scoring: edge-level diffs between labeled DAGs."""

from __future__ import annotations

from dataclasses import dataclass

from .dag import Dag

EXACT = "exact"
OFF_BY_ONE = "off_by_one"
WORSE = "worse"


class VariableMismatchError(ValueError):
    """The two DAGs are defined over different variable sets."""


@dataclass(frozen=True)
class StructureDiff:
    extra: frozenset[tuple[int, int]]
    missing: frozenset[tuple[int, int]]
    reversed: frozenset[tuple[int, int]]

    @property
    def shd(self) -> int:
        return len(self.extra) + len(self.missing) + len(self.reversed)


def diff(truth: Dag, learned: Dag) -> StructureDiff:
    """Split the edge discrepancies into extra, missing, and reversed.

    A pair adjacent in both but oppositely oriented counts once, as
    reversed (keyed by the truth orientation).
    """
    if truth.variables != learned.variables:
        raise VariableMismatchError("DAGs use different variable sets")
    reversed_edges = frozenset(
        (u, v) for u, v in truth.edges if (v, u) in learned.edges)
    flipped = frozenset((v, u) for u, v in reversed_edges)
    missing = frozenset(truth.edges - learned.edges - reversed_edges)
    extra = frozenset(learned.edges - truth.edges - flipped)
    return StructureDiff(extra=extra, missing=missing, reversed=reversed_edges)


def classify(truth: Dag, learned: Dag) -> str:
    shd = diff(truth, learned).shd
    if shd == 0:
        return EXACT
    if shd == 1:
        return OFF_BY_ONE
    return WORSE
