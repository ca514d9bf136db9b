"""Shared domain types, errors and validation.

Every type here is a frozen dataclass; ranks are 1-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

NOISE = -1

ALGORITHMS = ("kmeans", "bisecting_kmeans", "dbscan", "agglomerative", "birch")
LINKAGES = ("ward", "average", "complete")

_REQUIRED_PARAMS = {
    "kmeans": {"n_clusters"},
    "bisecting_kmeans": {"n_clusters"},
    "dbscan": {"eps", "min_samples"},
    "agglomerative": {"n_clusters", "linkage"},
    "birch": {"n_clusters", "threshold"},
}


class CarError(Exception):
    """Base class for every error raised by this package."""


class InvalidRankedList(CarError, ValueError):
    pass


class UnsortedDistances(InvalidRankedList):
    pass


class DuplicateDocId(InvalidRankedList):
    pass


class NonFiniteDistance(InvalidRankedList):
    pass


class EmptyList(InvalidRankedList):
    pass


class InvalidRecord(CarError, ValueError):
    pass


class DimensionMismatch(CarError, ValueError):
    pass


class EmptyStore(CarError, ValueError):
    pass


class ZeroVector(CarError, ValueError):
    pass


class UnknownAlgorithm(CarError, ValueError):
    pass


class InvalidConfig(CarError, ValueError):
    pass


class TooFewPoints(CarError, ValueError):
    pass


class DegeneratePartition(CarError, ValueError):
    """Fewer than two non-noise clusters; callers treat this as the worst score."""


class InvalidGrid(CarError, ValueError):
    pass


class AllConfigsDegenerate(CarError):
    pass


class LengthMismatch(CarError, ValueError):
    pass


class NonPositiveCandidates(CarError, ValueError):
    pass


class UnresolvableQuery(CarError, LookupError):
    pass


class UnreachableCoverage(CarError):
    pass


class InvalidSpec(CarError, ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    vector: tuple[float, ...]

    def __post_init__(self) -> None:
        vec = tuple(float(v) for v in self.vector)
        if not vec:
            raise InvalidRecord(f"record {self.id!r} has an empty vector")
        if not all(math.isfinite(v) for v in vec):
            raise InvalidRecord(f"record {self.id!r} has non-finite components")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class RankedCandidate:
    doc_id: str
    raw_distance: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    query_id: str
    candidates: tuple[RankedCandidate, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(self.candidates))

    @classmethod
    def from_pairs(cls, query_id: str, pairs: Iterable[tuple[str, float]]) -> "RankedList":
        """Build a list from ``(doc_id, distance)`` pairs already in rank order."""
        cands = tuple(
            RankedCandidate(str(doc), float(dist), rank)
            for rank, (doc, dist) in enumerate(pairs, start=1)
        )
        return cls(query_id, cands)

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def doc_ids(self) -> list[str]:
        return [c.doc_id for c in self.candidates]

    @property
    def distances(self) -> np.ndarray:
        return np.array([c.raw_distance for c in self.candidates], dtype=float)

    def prefix(self, length: int) -> "RankedList":
        return RankedList(self.query_id, self.candidates[:length])


@dataclass(frozen=True)
class NormalizedList:
    query_id: str
    normalized: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "normalized", tuple(float(v) for v in self.normalized))

    def __len__(self) -> int:
        return len(self.normalized)


@dataclass(frozen=True)
class ClusterAssignment:
    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class ClusteringConfig:
    """One hyperparameter setting for one clustering backbone.

    ``params`` is stored as a key-sorted tuple of pairs so configs hash and
    compare by value. Use :meth:`make` to build one from keyword arguments.
    """

    algorithm: str
    params: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if isinstance(self.params, Mapping):
            items = self.params.items()
        else:
            items = self.params
        object.__setattr__(self, "params", tuple(sorted((str(k), v) for k, v in items)))
        _validate_config(self)

    @classmethod
    def make(cls, algorithm: str, **params: Any) -> "ClusteringConfig":
        return cls(algorithm, tuple(params.items()))

    def get(self, key: str, default: Any = None) -> Any:
        for k, v in self.params:
            if k == key:
                return v
        return default

    def as_dict(self) -> dict[str, Any]:
        return {"algorithm": self.algorithm, **dict(self.params)}

    def __str__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.params)
        return f"{self.algorithm}({inner})"


def _validate_config(config: ClusteringConfig) -> None:
    if config.algorithm not in _REQUIRED_PARAMS:
        raise UnknownAlgorithm(f"unknown clustering algorithm {config.algorithm!r}")
    keys = {k for k, _ in config.params}
    required = _REQUIRED_PARAMS[config.algorithm]
    if keys != required:
        raise InvalidConfig(
            f"{config.algorithm} expects parameters {sorted(required)}, got {sorted(keys)}"
        )
    p = dict(config.params)
    if "n_clusters" in p:
        k = p["n_clusters"]
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 2:
            raise InvalidConfig(f"n_clusters must be an integer >= 2, got {k!r}")
    if "min_samples" in p:
        m = p["min_samples"]
        if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 2:
            raise InvalidConfig(f"min_samples must be an integer >= 2, got {m!r}")
    for key in ("eps", "threshold"):
        if key in p:
            v = p[key]
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise InvalidConfig(f"{key} must be a positive finite number, got {v!r}")
    if "linkage" in p and p["linkage"] not in LINKAGES:
        raise InvalidConfig(f"linkage must be one of {LINKAGES}, got {p['linkage']!r}")


@dataclass(frozen=True)
class CutoffDecision:
    boundary_set: tuple[int, ...]
    gaps: Mapping[int, float]
    scores: Mapping[int, float]
    chosen_boundary: Optional[int]
    cutoff: int
    best_config: Optional[ClusteringConfig] = None
    best_silhouette: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.boundary_set:
            if self.chosen_boundary is not None:
                raise ValueError("chosen_boundary must be absent when there are no boundaries")
        elif self.chosen_boundary is None or self.cutoff != self.chosen_boundary - 1:
            raise ValueError("cutoff must equal chosen_boundary - 1")
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")


def validate_ranked_list(ranked: RankedList) -> RankedList:
    """Return ``ranked`` unchanged if every list invariant holds, else raise."""
    cands = ranked.candidates
    if not cands:
        raise EmptyList(f"query {ranked.query_id!r}: ranked list is empty")
    seen: set[str] = set()
    prev = -math.inf
    for expected_rank, c in enumerate(cands, start=1):
        if not math.isfinite(c.raw_distance):
            raise NonFiniteDistance(
                f"query {ranked.query_id!r}: rank {expected_rank} has distance {c.raw_distance}"
            )
        if c.rank != expected_rank:
            raise InvalidRankedList(
                f"query {ranked.query_id!r}: expected rank {expected_rank}, found {c.rank}"
            )
        if c.raw_distance < prev:
            raise UnsortedDistances(
                f"query {ranked.query_id!r}: distance at rank {expected_rank} is below rank {expected_rank - 1}"
            )
        if c.doc_id in seen:
            raise DuplicateDocId(f"query {ranked.query_id!r}: doc {c.doc_id!r} appears twice")
        seen.add(c.doc_id)
        prev = c.raw_distance
    return ranked


def as_float_array(values: NormalizedList | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(values, NormalizedList):
        values = values.normalized
    return np.asarray(values, dtype=float)


def as_label_array(labels: ClusterAssignment | Sequence[int] | np.ndarray) -> np.ndarray:
    if isinstance(labels, ClusterAssignment):
        labels = labels.labels
    return np.asarray(labels, dtype=np.int64)


def make_rng(seed: int) -> np.random.Generator:
    """Single entry point for randomness; every stochastic routine takes an explicit seed."""
    return np.random.default_rng(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
