"""End-to-end adaptive retrieval: retrieve, normalize, cluster, cut."""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .cluster import scale_points
from .core import (
    AllConfigsDegenerate,
    CutoffDecision,
    NormalizedList,
    RankedList,
    validate_ranked_list,
)
from .cutoff import apply_cutoff, select_cutoff
from .knn import DEFAULT_N, EmbeddingStore, retrieve_top_n
from .silhouette import GridSpec, build_default_grid, grid_search

# normalized distances are rounded so that affinely related inputs cluster identically
NORMALIZE_DECIMALS = 12


def normalize(ranked: RankedList) -> NormalizedList:
    """Min-max rescale the raw distances of one list to [0, 1].

    A constant list maps to all zeros. Values are rounded to
    ``NORMALIZE_DECIMALS`` places: the last bits of ``(d - lo) / span`` change
    under ``a * d + b``, and exact ties between gaps must survive that.
    """
    d = ranked.distances
    if d.size == 0:
        return NormalizedList(ranked.query_id, ())
    lo, hi = float(d.min()), float(d.max())
    span = hi - lo
    if span == 0.0:
        out = np.zeros_like(d)
    else:
        out = np.clip(np.round((d - lo) / span, NORMALIZE_DECIMALS), 0.0, 1.0)
        # pin the endpoints exactly
        out[d == lo] = 0.0
        out[d == hi] = 1.0
    return NormalizedList(ranked.query_id, tuple(out.tolist()))


def _keep_all(ranked: RankedList) -> CutoffDecision:
    return CutoffDecision((), {}, {}, None, len(ranked))


def run_car_on_distances(
    ranked: RankedList,
    grid: GridSpec | Sequence | str = "kmeans",
    seed: int = 0,
    scale_index: bool = True,
) -> tuple[RankedList, CutoffDecision]:
    """Run the clustering and cutoff phases on a precomputed ranked list.

    ``grid`` may be a :class:`GridSpec`, a sequence of configs, or a backbone
    name whose default grid is built for this list's length. If no config in
    the grid yields a valid partition the whole list is kept.
    """
    validate_ranked_list(ranked)
    if isinstance(grid, str):
        algorithm = grid
        grid = None
    elif not isinstance(grid, GridSpec):
        grid = GridSpec(tuple(grid))
        algorithm = None
    else:
        algorithm = None

    n = len(ranked)
    norm = normalize(ranked)
    if n == 1 or max(norm.normalized) == 0.0:
        # one point or a flat profile: no structure to cut
        return ranked, _keep_all(ranked)

    if grid is None:
        grid = build_default_grid(algorithm, n)
    points = scale_points(norm, scale_index=scale_index)
    try:
        result = grid_search(points, grid, seed)
    except AllConfigsDegenerate:
        return ranked, _keep_all(ranked)

    decision = select_cutoff(norm, result.best_labels)
    decision = dataclasses.replace(
        decision, best_config=result.best_config, best_silhouette=result.best_score
    )
    return apply_cutoff(ranked, decision), decision


def run_car(
    query_vector: Sequence[float],
    store: EmbeddingStore,
    n: int = DEFAULT_N,
    grid: GridSpec | Sequence | str = "kmeans",
    seed: int = 0,
    scale_index: bool = True,
    query_id: str = "",
) -> tuple[RankedList, CutoffDecision]:
    ranked = retrieve_top_n(store, query_vector, n, query_id=query_id)
    return run_car_on_distances(ranked, grid, seed, scale_index=scale_index)
