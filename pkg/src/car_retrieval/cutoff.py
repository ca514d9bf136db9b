"""Boundary detection and gap scoring along the ranking."""

from __future__ import annotations

from typing import Sequence

from .core import (
    ClusterAssignment,
    CutoffDecision,
    LengthMismatch,
    NormalizedList,
    RankedList,
)

# scores closer than this are treated as tied; the smaller rank wins
TIE_TOL = 1e-12


def boundary_set(labels: ClusterAssignment | Sequence[int]) -> tuple[int, ...]:
    """1-based ranks ``i >= 2`` whose label differs from rank ``i - 1``."""
    labs = labels.labels if isinstance(labels, ClusterAssignment) else tuple(labels)
    return tuple(i + 1 for i in range(1, len(labs)) if labs[i] != labs[i - 1])


def select_cutoff(
    normalized: NormalizedList | Sequence[float],
    labels: ClusterAssignment | Sequence[int],
) -> CutoffDecision:
    """Pick the boundary maximising ``gap / max_gap + rank / N`` and cut just before it.

    With no boundary the whole list is kept. When every boundary gap is zero
    the gap term is zero and the latest boundary wins.
    """
    values = normalized.normalized if isinstance(normalized, NormalizedList) else tuple(normalized)
    labs = labels.labels if isinstance(labels, ClusterAssignment) else tuple(labels)
    n = len(values)
    if len(labs) != n:
        raise LengthMismatch(f"{n} normalized distances but {len(labs)} labels")
    if n == 0:
        raise LengthMismatch("cannot select a cutoff on an empty list")

    bounds = boundary_set(labs)
    if not bounds:
        return CutoffDecision((), {}, {}, None, n)

    gaps = {i: float(values[i - 1]) - float(values[i - 2]) for i in bounds}
    max_gap = max(gaps.values())
    scores = {}
    for i in bounds:
        rel = gaps[i] / max_gap if max_gap > 0 else 0.0
        scores[i] = rel + i / n

    chosen = bounds[0]
    for i in bounds[1:]:
        if scores[i] > scores[chosen] + TIE_TOL:
            chosen = i
    return CutoffDecision(bounds, gaps, scores, chosen, chosen - 1)


def apply_cutoff(ranked: RankedList, decision: CutoffDecision) -> RankedList:
    if decision.cutoff > len(ranked):
        raise ValueError(f"cutoff {decision.cutoff} exceeds list length {len(ranked)}")
    return ranked.prefix(decision.cutoff)
