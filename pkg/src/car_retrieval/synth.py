"""Synthetic query sets with a planted relevant block followed by a distance gap."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import numpy as np

from .core import InvalidSpec, RankedList, make_rng
from .eval import LabeledQuery


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a planted query set.

    Gold distances sit evenly spaced inside ``relevant_band`` and the rest of
    the pool evenly spaced inside ``irrelevant_band``; ``jitter`` is the
    standard deviation of Gaussian noise added to every distance.
    """

    n_queries: int = 200
    gold_size_distribution: Mapping[int, float] = field(
        default_factory=lambda: {1: 0.5, 2: 0.3, 4: 0.2}
    )
    relevant_band: tuple[float, float] = (0.10, 0.15)
    irrelevant_band: tuple[float, float] = (0.60, 0.75)
    gap: float = 0.45
    jitter: float = 0.01
    pool_size: int = 40
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "gold_size_distribution",
            {int(k): float(v) for k, v in dict(self.gold_size_distribution).items()},
        )
        object.__setattr__(self, "relevant_band", tuple(float(v) for v in self.relevant_band))
        object.__setattr__(self, "irrelevant_band", tuple(float(v) for v in self.irrelevant_band))
        self.validate()

    def validate(self) -> None:
        if self.n_queries < 0:
            raise InvalidSpec("n_queries must be non-negative")
        dist = self.gold_size_distribution
        if not dist or any(k < 1 or k > 4 for k in dist):
            raise InvalidSpec("gold sizes must lie in 1..4")
        if any(w < 0 or not math.isfinite(w) for w in dist.values()) or sum(dist.values()) <= 0:
            raise InvalidSpec("gold size weights must be non-negative with a positive sum")
        if max(dist) >= self.pool_size:
            raise InvalidSpec("pool_size must exceed the largest gold size")
        rhi, ilo = self.relevant_band[1], self.irrelevant_band[0]
        for lo, hi in (self.relevant_band, self.irrelevant_band):
            if not (0.0 <= lo <= hi <= 2.0):
                raise InvalidSpec(f"band ({lo}, {hi}) must satisfy 0 <= low <= high <= 2")
        if self.gap < 0 or rhi + self.gap > ilo:
            raise InvalidSpec(
                f"bands overlap: relevant high {rhi} + gap {self.gap} exceeds irrelevant low {ilo}"
            )
        if self.jitter < 0:
            raise InvalidSpec("jitter must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["gold_size_distribution"] = {str(k): v for k, v in self.gold_size_distribution.items()}
        d["relevant_band"] = list(self.relevant_band)
        d["irrelevant_band"] = list(self.irrelevant_band)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown spec fields: {sorted(unknown)}")
        try:
            return cls(**dict(data))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(str(exc)) from exc


def generate(spec: SyntheticSpec) -> list[LabeledQuery]:
    spec.validate()
    rng = make_rng(spec.seed)
    sizes = sorted(spec.gold_size_distribution)
    weights = np.array([spec.gold_size_distribution[s] for s in sizes])
    weights = weights / weights.sum()
    n = spec.pool_size
    width = len(str(n - 1))
    queries = []
    for q in range(spec.n_queries):
        qid = f"q{q:04d}"
        g = int(sizes[rng.choice(len(sizes), p=weights)])
        dist = np.concatenate(
            [np.linspace(*spec.relevant_band, g), np.linspace(*spec.irrelevant_band, n - g)]
        )
        if spec.jitter > 0:
            dist = np.clip(dist + rng.normal(0.0, spec.jitter, n), 0.0, 2.0)
        names = np.array([f"{qid}-d{k:0{width}d}" for k in rng.permutation(n)])
        gold = frozenset(names[:g].tolist())
        order = np.lexsort((names, dist))
        ranked = RankedList.from_pairs(qid, zip(names[order].tolist(), dist[order].tolist()))
        queries.append(LabeledQuery(qid, gold, ranked=ranked))
    return queries
