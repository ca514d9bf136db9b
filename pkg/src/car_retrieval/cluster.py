"""Clustering backbones over the scaled (rank, distance) plane.

All backbones use Euclidean distance in 2-D and return labels renumbered by
first appearance along the ranking, with ``-1`` reserved for DBSCAN noise.
"""

from __future__ import annotations

import itertools
import math
import threading
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    NOISE,
    ClusterAssignment,
    ClusteringConfig,
    InvalidConfig,
    NormalizedList,
    TooFewPoints,
    as_float_array,
    make_rng,
)

KMEANS_MAX_ITER = 100
KMEANS_TOL = 1e-6
KMEANS_N_INIT = 4
# below this many k-subsets of distinct points, every subset is also tried as a start
KMEANS_SUBSET_STARTS = 64


class ClusterPoint(NamedTuple):
    x: float
    y: float


def scale_points(normalized: NormalizedList | Sequence[float], scale_index: bool = True) -> np.ndarray:
    """Embed a normalized distance profile as an ``(N, 2)`` array of (rank, distance).

    With ``scale_index`` the rank ``n`` becomes ``n / N`` so both axes live in
    [0, 1]; without it the raw 1-based rank is used.
    """
    y = as_float_array(normalized)
    n = y.shape[0]
    ranks = np.arange(1, n + 1, dtype=float)
    x = ranks / n if scale_index else ranks
    return np.column_stack([x, y])


def as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"points must have shape (N, 2), got {arr.shape}")
    return arr


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber non-noise labels 0, 1, ... in order of first appearance."""
    out = np.full(labels.shape, NOISE, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels.tolist()):
        if lab == NOISE:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def pairwise_sq_dists(X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
    Y = X if Y is None else Y
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _n_distinct(X: np.ndarray) -> int:
    return np.unique(X, axis=0).shape[0]


def cluster(points, config: ClusteringConfig, seed: int = 0) -> ClusterAssignment:
    """Partition ``points`` with the backbone and parameters named by ``config``."""
    X = as_points(points)
    n = X.shape[0]
    if n < 1:
        raise TooFewPoints("cannot cluster an empty point set")
    k = config.get("n_clusters")
    if k is not None:
        if k > n:
            raise TooFewPoints(f"n_clusters={k} exceeds the {n} available points")
        if k > _n_distinct(X):
            raise TooFewPoints(f"n_clusters={k} exceeds the number of distinct points")
    algo = config.algorithm
    if algo == "kmeans":
        labels = kmeans(X, k, seed).labels
    elif algo == "bisecting_kmeans":
        labels = bisecting_kmeans(X, k, seed)
    elif algo == "dbscan":
        labels = dbscan(X, config.get("eps"), config.get("min_samples"))
    elif algo == "agglomerative":
        labels = agglomerative(X, k, config.get("linkage"))
    elif algo == "birch":
        labels = birch(X, k, config.get("threshold"))
    else:  # pragma: no cover - ClusteringConfig validates the name
        raise InvalidConfig(f"unsupported algorithm {algo!r}")
    return ClusterAssignment(tuple(canonical_labels(np.asarray(labels)).tolist()))


# -- k-means -----------------------------------------------------------------


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: list[float] = field(default_factory=list)


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        closest = np.minimum(closest, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int, tol: float) -> KMeansResult:
    n, dim = X.shape
    k = centers.shape[0]
    rows = np.arange(n)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = pairwise_sq_dists(X, centers)
        labels = d2.argmin(axis=1)
        cost = d2[rows, labels]
        history.append(float(cost.sum()))
        counts = np.bincount(labels, minlength=k)
        new = np.empty_like(centers)
        for j in range(dim):
            new[:, j] = np.bincount(labels, weights=X[:, j], minlength=k)
        empty = counts == 0
        new[~empty] /= counts[~empty, None]
        if empty.any():
            # reseed each empty cluster on the currently worst-served point
            cost = cost.copy()
            for c in np.flatnonzero(empty):
                far = int(cost.argmax())
                new[c] = X[far]
                cost[far] = 0.0
        shift = float(np.sqrt(((new - centers) ** 2).sum(axis=1)).max())
        centers = new
        if shift <= tol:
            break
    d2 = pairwise_sq_dists(X, centers)
    labels = d2.argmin(axis=1)
    inertia = float(d2[rows, labels].sum())
    history.append(inertia)
    return KMeansResult(labels, centers, inertia, history)


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int | np.random.Generator = 0,
    n_init: int = KMEANS_N_INIT,
    max_iter: int = KMEANS_MAX_ITER,
    tol: float = KMEANS_TOL,
) -> KMeansResult:
    """Lloyd's algorithm from ``n_init`` k-means++ starts; keeps the lowest inertia.

    Small inputs additionally start from every k-subset of distinct points,
    which makes tiny instances reach the global optimum in practice.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    starts = [_kmeans_pp(X, k, rng) for _ in range(n_init)]
    distinct = np.unique(X, axis=0)
    if math.comb(distinct.shape[0], k) <= KMEANS_SUBSET_STARTS:
        starts.extend(distinct[list(c)] for c in itertools.combinations(range(distinct.shape[0]), k))
    best: KMeansResult | None = None
    for centers in starts:
        res = _lloyd(X, centers.copy(), max_iter, tol)
        if best is None or res.inertia < best.inertia:
            best = res
    assert best is not None
    return best


# -- bisecting k-means ---------------------------------------------------------


class _BisectingPath:
    """Sequence of nested partitions, each splitting the highest-SSE cluster in two.

    The partition with ``k`` clusters only depends on the first ``k - 1``
    splits, so one path serves every ``n_clusters`` in a grid.
    """

    def __init__(self, X: np.ndarray, seed: int):
        self.X = X
        self.rng = make_rng(seed)
        self.labels = np.zeros(X.shape[0], dtype=np.int64)
        self.snapshots: list[np.ndarray] = [self.labels.copy()]
        self.lock = threading.Lock()

    def _sse(self, idx: np.ndarray) -> float:
        pts = self.X[idx]
        return float(((pts - pts.mean(axis=0)) ** 2).sum())

    def _split_once(self) -> bool:
        n_clusters = len(self.snapshots)
        members = [np.flatnonzero(self.labels == c) for c in range(n_clusters)]
        sse = [self._sse(m) for m in members]
        target = int(np.argmax(sse))
        if sse[target] <= 0.0:
            return False
        idx = members[target]
        sub = kmeans(self.X[idx], 2, self.rng).labels
        self.labels[idx[sub == 1]] = n_clusters
        self.snapshots.append(self.labels.copy())
        return True

    def labels_for(self, k: int) -> np.ndarray:
        with self.lock:
            while len(self.snapshots) < k:
                if not self._split_once():
                    raise TooFewPoints(f"cannot bisect into {k} clusters")
            return self.snapshots[k - 1].copy()


@lru_cache(maxsize=64)
def _bisecting_path(data: bytes, n: int, seed: int) -> _BisectingPath:
    X = np.frombuffer(data, dtype=float).reshape(n, 2)
    return _BisectingPath(X, seed)


def bisecting_kmeans(X: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    return _bisecting_path(X.tobytes(), X.shape[0], int(seed)).labels_for(k)


# -- DBSCAN --------------------------------------------------------------------


def dbscan(X: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Density clustering; ``min_samples`` counts the point itself.

    Clusters are grown breadth-first from core points in rank order, so a
    border point reachable from two clusters joins the earlier one.
    """
    n = X.shape[0]
    neighbours = pairwise_sq_dists(X) <= eps * eps
    core = neighbours.sum(axis=1) >= min_samples
    labels = np.full(n, NOISE, dtype=np.int64)
    cid = 0
    for p in range(n):
        if labels[p] != NOISE or not core[p]:
            continue
        labels[p] = cid
        queue = deque([p])
        while queue:
            q = queue.popleft()
            for r in np.flatnonzero(neighbours[q]):
                if labels[r] == NOISE:
                    labels[r] = cid
                    if core[r]:
                        queue.append(r)
        cid += 1
    return labels


# -- agglomerative ---------------------------------------------------------------


@lru_cache(maxsize=256)
def _merge_sequence(data: bytes, n: int, linkage: str) -> tuple[tuple[int, int], ...]:
    """Full dendrogram as a list of (kept, absorbed) index pairs, via Lance-Williams updates."""
    X = np.frombuffer(data, dtype=float).reshape(n, 2)
    D = pairwise_sq_dists(X)
    if linkage != "ward":
        D = np.sqrt(D)
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    merges = []
    for _ in range(n - 1):
        flat = int(D.argmin())
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        ni, nj = size[i], size[j]
        if linkage == "ward":
            nk = size
            new = ((ni + nk) * D[i] + (nj + nk) * D[j] - nk * D[i, j]) / (ni + nj + nk)
        elif linkage == "average":
            new = (ni * D[i] + nj * D[j]) / (ni + nj)
        else:
            new = np.maximum(D[i], D[j])
        D[i, :] = new
        D[:, i] = new
        D[j, :] = np.inf
        D[:, j] = np.inf
        D[i, i] = np.inf
        size[i] = ni + nj
        merges.append((i, j))
    return tuple(merges)


def _cut(merges: Sequence[tuple[int, int]], n: int, k: int) -> np.ndarray:
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in merges[: n - k]:
        parent[find(j)] = find(i)
    return np.array([find(a) for a in range(n)], dtype=np.int64)


def agglomerative(X: np.ndarray, k: int, linkage: str = "ward") -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    n = X.shape[0]
    if k > n:
        raise TooFewPoints(f"n_clusters={k} exceeds the {n} available points")
    return _cut(_merge_sequence(X.tobytes(), n, linkage), n, k)


# -- BIRCH ---------------------------------------------------------------------


@lru_cache(maxsize=256)
def _cf_entries(data: bytes, n: int, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-level clustering-feature pass.

    Each point joins the entry with the nearest centroid if the merged entry's
    radius stays within ``threshold``; otherwise it opens a new entry.
    Returns (entry index per point, entry centroids).
    """
    X = np.frombuffer(data, dtype=float).reshape(n, 2)
    counts: list[float] = []
    ls: list[np.ndarray] = []
    ss: list[float] = []
    owner = np.empty(n, dtype=np.int64)
    for p in range(n):
        x = X[p]
        xx = float(x @ x)
        if counts:
            cents = np.array(ls) / np.array(counts)[:, None]
            e = int(((cents - x) ** 2).sum(axis=1).argmin())
            m = counts[e] + 1
            lsum = ls[e] + x
            radius_sq = (ss[e] + xx) / m - float(lsum @ lsum) / (m * m)
            if radius_sq <= threshold * threshold:
                counts[e] = m
                ls[e] = lsum
                ss[e] += xx
                owner[p] = e
                continue
        counts.append(1.0)
        ls.append(x.copy())
        ss.append(xx)
        owner[p] = len(counts) - 1
    centroids = np.array(ls) / np.array(counts)[:, None]
    return owner, centroids


def birch(X: np.ndarray, k: int, threshold: float) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    owner, centroids = _cf_entries(X.tobytes(), X.shape[0], float(threshold))
    m = centroids.shape[0]
    if m < k:
        raise TooFewPoints(f"threshold={threshold} leaves {m} CF entries, fewer than n_clusters={k}")
    centroids = np.ascontiguousarray(centroids)
    entry_labels = _cut(_merge_sequence(centroids.tobytes(), m, "ward"), m, k)
    return entry_labels[owner]
