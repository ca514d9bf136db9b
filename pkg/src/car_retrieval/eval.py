"""Benchmark harness: fixed top-k versus adaptive cutoff on labeled queries."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .core import (
    NonPositiveCandidates,
    RankedList,
    UnreachableCoverage,
    UnresolvableQuery,
    validate_ranked_list,
)
from .knn import DEFAULT_N, EmbeddingStore, retrieve_top_n
from .silhouette import GridSpec


@dataclass(frozen=True)
class LabeledQuery:
    query_id: str
    gold_ids: frozenset[str]
    vector: Optional[tuple[float, ...]] = None
    ranked: Optional[RankedList] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold_ids", frozenset(self.gold_ids))
        if not self.gold_ids:
            raise ValueError(f"query {self.query_id!r} has no gold documents")
        if self.vector is not None:
            object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))
        if self.ranked is not None:
            validate_ranked_list(self.ranked)


@dataclass(frozen=True)
class TopK:
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    @property
    def name(self) -> str:
        return f"top{self.k}"


@dataclass(frozen=True)
class CarMethod:
    """Adaptive cutoff over the shared pool (optionally its first ``n`` entries)."""

    grid: Union[GridSpec, str] = "kmeans"
    seed: int = 0
    n: Optional[int] = None
    scale_index: bool = True
    label: str = "car"

    @property
    def name(self) -> str:
        return self.label


Method = Union[TopK, CarMethod]


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    hit: bool
    any_hit: bool
    retained_count: int
    cutoff: int
    config: Optional[str] = None


@dataclass(frozen=True)
class EvalReport:
    method: str
    accuracy: float
    any_hit_rate: float
    avg_candidates: float
    tes: float
    records: tuple[QueryRecord, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "accuracy": self.accuracy,
            "avg_candidates": self.avg_candidates,
            "tes": self.tes,
        }


def accuracy_hit(retained: RankedList | Iterable[str], gold_ids: Iterable[str]) -> bool:
    """True iff every gold document was retained."""
    ids = set(retained.doc_ids if isinstance(retained, RankedList) else retained)
    return set(gold_ids) <= ids


def tes(accuracy: float, avg_candidates: float) -> float:
    """Trade-off Efficiency Score: ``accuracy / ln(1 + avg_candidates)``."""
    if not avg_candidates > 0:
        raise NonPositiveCandidates(f"average candidates must be positive, got {avg_candidates}")
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {accuracy}")
    return accuracy / math.log1p(avg_candidates)


def resolve_pool(
    query: LabeledQuery, store: Optional[EmbeddingStore], pool_size: int = DEFAULT_N
) -> RankedList:
    if query.ranked is not None:
        return query.ranked
    if query.vector is not None and store is not None:
        return retrieve_top_n(store, query.vector, pool_size, query_id=query.query_id)
    raise UnresolvableQuery(
        f"query {query.query_id!r} has neither a ranked list nor a vector with a store"
    )


def _apply(method: Method, pool: RankedList) -> tuple[RankedList, Optional[str]]:
    if isinstance(method, TopK):
        return pool.prefix(method.k), None
    from .car import run_car_on_distances

    sub = pool.prefix(method.n) if method.n else pool
    retained, decision = run_car_on_distances(
        sub, method.grid, method.seed, scale_index=method.scale_index
    )
    return retained, (str(decision.best_config) if decision.best_config else None)


def _evaluate_query(query: LabeledQuery, pool: RankedList, methods: Sequence[Method]):
    out = []
    for m in methods:
        retained, config = _apply(m, pool)
        ids = set(retained.doc_ids)
        out.append(
            QueryRecord(
                query.query_id,
                hit=query.gold_ids <= ids,
                any_hit=bool(query.gold_ids & ids),
                retained_count=len(retained),
                cutoff=len(retained),
                config=config,
            )
        )
    return out


def evaluate(
    queries: Sequence[LabeledQuery],
    methods: Sequence[Method],
    store: Optional[EmbeddingStore] = None,
    pool_size: int = DEFAULT_N,
    jobs: int = 1,
) -> list[EvalReport]:
    """Run every method on the same per-query candidate pool.

    Pools come from the query's precomputed ranked list, or from retrieving
    ``pool_size`` candidates out of ``store``. Reports are sorted by method name.
    """
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError(f"method names must be unique, got {names}")
    pools = [resolve_pool(q, store, pool_size) for q in queries]
    if not queries:
        return []

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            per_query = list(ex.map(lambda qp: _evaluate_query(qp[0], qp[1], methods), zip(queries, pools)))
    else:
        per_query = [_evaluate_query(q, p, methods) for q, p in zip(queries, pools)]

    reports = []
    nq = len(queries)
    for j, m in enumerate(methods):
        records = tuple(row[j] for row in per_query)
        acc = sum(r.hit for r in records) / nq
        any_rate = sum(r.any_hit for r in records) / nq
        avg = sum(r.retained_count for r in records) / nq
        reports.append(EvalReport(m.name, acc, any_rate, avg, tes(acc, avg), records))
    return sorted(reports, key=lambda r: r.method)


def calibrate_n(
    queries: Sequence[LabeledQuery],
    store: Optional[EmbeddingStore] = None,
    coverage: float = 0.9,
) -> int:
    """Smallest pool size whose top-N holds every gold doc for ``coverage`` of queries."""
    if not 0.0 < coverage <= 1.0:
        raise ValueError(f"coverage must lie in (0, 1], got {coverage}")
    if not queries:
        raise ValueError("no queries to calibrate on")
    needed = []
    for q in queries:
        if q.vector is not None and store is not None:
            full = retrieve_top_n(store, q.vector, len(store), query_id=q.query_id)
        elif q.ranked is not None:
            full = q.ranked
        else:
            raise UnresolvableQuery(f"query {q.query_id!r} cannot be ranked")
        rank_of = {doc: i for i, doc in enumerate(full.doc_ids, start=1)}
        needed.append(max(rank_of.get(g, math.inf) for g in q.gold_ids))
    needed.sort()
    m = math.ceil(coverage * len(needed) - 1e-9)
    n = needed[max(m, 1) - 1]
    if math.isinf(n):
        raise UnreachableCoverage(
            f"coverage {coverage} needs gold documents that are missing from the corpus"
        )
    return int(n)
