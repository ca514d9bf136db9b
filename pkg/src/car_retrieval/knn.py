"""Exact top-N retrieval over an in-memory embedding store."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .core import (
    DimensionMismatch,
    EmbeddingRecord,
    EmptyStore,
    InvalidRecord,
    RankedCandidate,
    RankedList,
    ZeroVector,
)

METRICS = ("cosine_distance", "euclidean")
DEFAULT_N = 40


def cosine_distance(u: Sequence[float], v: Sequence[float]) -> float:
    """``1 - cos(u, v)``, clipped to [0, 2]."""
    a = np.asarray(u, dtype=float)
    b = np.asarray(v, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vectors have dimensions {a.shape} and {b.shape}")
    uu = float(a @ a)
    vv = float(b @ b)
    if uu == 0.0 or vv == 0.0:
        raise ZeroVector("cosine distance is undefined for a zero vector")
    # sqrt(uu * vv) rather than sqrt(uu) * sqrt(vv): exact 0 for identical inputs
    d = 1.0 - float(a @ b) / np.sqrt(uu * vv)
    return min(max(d, 0.0), 2.0)


class EmbeddingStore:
    """Read-only matrix of document vectors with a fixed distance metric."""

    def __init__(self, records: Iterable[EmbeddingRecord], metric: str = "cosine_distance"):
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
        records = list(records)
        ids = [r.id for r in records]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise InvalidRecord(f"duplicate record id {dup!r}")
        dims = {len(r.vector) for r in records}
        if len(dims) > 1:
            raise DimensionMismatch(f"records have mixed dimensions {sorted(dims)}")
        self.metric = metric
        self.ids = np.array(ids, dtype=object)
        self.records = tuple(records)
        self.matrix = (
            np.array([r.vector for r in records], dtype=float) if records else np.zeros((0, 0))
        )
        self.matrix.setflags(write=False)
        if metric == "cosine_distance" and records:
            self._norms_sq = (self.matrix * self.matrix).sum(axis=1)
            zero = np.flatnonzero(self._norms_sq == 0.0)
            if zero.size:
                raise ZeroVector(f"record {ids[zero[0]]!r} is a zero vector")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1] if len(self) else 0

    def distances(self, query: Sequence[float]) -> np.ndarray:
        """Distance from ``query`` to every stored vector, in storage order."""
        if not len(self):
            raise EmptyStore("embedding store is empty")
        q = np.asarray(query, dtype=float)
        if q.ndim != 1 or q.shape[0] != self.dim:
            raise DimensionMismatch(f"query has dimension {q.shape}, store has {self.dim}")
        if self.metric == "euclidean":
            return np.sqrt(((self.matrix - q) ** 2).sum(axis=1))
        # same elementwise-product-then-sum path as the stored norms, so a
        # query equal to a stored vector gets distance exactly 0
        qq = float((q * q).sum())
        if qq == 0.0:
            raise ZeroVector("query vector is zero")
        d = 1.0 - (self.matrix * q).sum(axis=1) / np.sqrt(self._norms_sq * qq)
        return np.clip(d, 0.0, 2.0)


def retrieve_top_n(
    store: EmbeddingStore, query_vector: Sequence[float], n: int = DEFAULT_N, query_id: str = ""
) -> RankedList:
    """Return the ``min(n, |store|)`` nearest documents, ascending by distance.

    Equal distances are ordered by doc id so the result does not depend on
    the order records were loaded in.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    dist = store.distances(query_vector)
    order = np.lexsort((store.ids.astype(str), dist))[:n]
    cands = tuple(
        RankedCandidate(str(store.ids[j]), float(dist[j]), rank)
        for rank, j in enumerate(order, start=1)
    )
    return RankedList(query_id, cands)
