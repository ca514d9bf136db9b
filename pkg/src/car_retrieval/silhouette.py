"""Silhouette scoring and hyperparameter grid search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cluster import as_points, cluster, pairwise_sq_dists
from .core import (
    ALGORITHMS,
    LINKAGES,
    NOISE,
    AllConfigsDegenerate,
    ClusterAssignment,
    ClusteringConfig,
    DegeneratePartition,
    InvalidConfig,
    InvalidGrid,
    LengthMismatch,
    TooFewPoints,
    UnknownAlgorithm,
    as_label_array,
)

DBSCAN_EPS = tuple(float(v) for v in np.linspace(0.1, 1.0, 5))
DBSCAN_MIN_SAMPLES_MAX = 5
BIRCH_THRESHOLDS = (0.3, 0.5, 0.7)


@dataclass(frozen=True)
class GridSpec:
    configs: tuple[ClusteringConfig, ...]

    def __post_init__(self) -> None:
        configs = tuple(self.configs)
        if not configs:
            raise InvalidGrid("grid must contain at least one configuration")
        for c in configs:
            if not isinstance(c, ClusteringConfig):
                raise InvalidGrid(f"grid entry {c!r} is not a ClusteringConfig")
        object.__setattr__(self, "configs", configs)

    def __len__(self) -> int:
        return len(self.configs)

    def __iter__(self):
        return iter(self.configs)

    def to_text(self) -> str:
        """One config per line as ``algorithm=... key=value ...``."""
        lines = []
        for c in self.configs:
            parts = [f"algorithm={c.algorithm}"] + [f"{k}={_fmt_param(v)}" for k, v in c.params]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GridSpec":
        configs = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = {}
            for token in line.split():
                key, sep, value = token.partition("=")
                if not sep or not key:
                    raise InvalidGrid(f"line {lineno}: expected key=value, got {token!r}")
                fields[key] = _parse_param(value)
            algo = fields.pop("algorithm", None)
            if algo is None:
                raise InvalidGrid(f"line {lineno}: missing algorithm=")
            try:
                configs.append(ClusteringConfig(str(algo), tuple(fields.items())))
            except (InvalidConfig, UnknownAlgorithm) as exc:
                raise InvalidGrid(f"line {lineno}: {exc}") from exc
        return cls(tuple(configs))


def _fmt_param(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_param(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _n_cluster_range(n_points: int) -> range:
    # "half the data size": 2 .. max(2, N // 2)
    return range(2, max(2, n_points // 2) + 1)


def build_default_grid(algorithm: str, n_points: int) -> GridSpec:
    """Enumerate the standard search space for one backbone, in a fixed order."""
    if n_points < 2:
        raise ValueError(f"a grid needs at least 2 points, got {n_points}")
    ks = _n_cluster_range(n_points)
    make = ClusteringConfig.make
    if algorithm in ("kmeans", "bisecting_kmeans"):
        configs = [make(algorithm, n_clusters=k) for k in ks]
    elif algorithm == "dbscan":
        top = min(DBSCAN_MIN_SAMPLES_MAX, max(2, n_points - 1))
        configs = [
            make("dbscan", eps=eps, min_samples=m) for eps in DBSCAN_EPS for m in range(2, top + 1)
        ]
    elif algorithm == "agglomerative":
        configs = [make("agglomerative", n_clusters=k, linkage=lk) for k in ks for lk in LINKAGES]
    elif algorithm == "birch":
        configs = [make("birch", n_clusters=k, threshold=t) for k in ks for t in BIRCH_THRESHOLDS]
    else:
        raise UnknownAlgorithm(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    return GridSpec(tuple(configs))


def combined_grid(algorithms: Iterable[str], n_points: int) -> GridSpec:
    configs: list[ClusteringConfig] = []
    for algo in algorithms:
        configs.extend(build_default_grid(algo, n_points).configs)
    return GridSpec(tuple(configs))


def silhouette_from_sq_dists(d2: np.ndarray, labels: np.ndarray) -> float:
    keep = labels != NOISE
    labels = labels[keep]
    uniq, inv = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise DegeneratePartition(f"silhouette needs >= 2 non-noise clusters, got {uniq.size}")
    d = np.sqrt(d2[np.ix_(keep, keep)])
    k = uniq.size
    onehot = np.zeros((labels.size, k))
    onehot[np.arange(labels.size), inv] = 1.0
    sizes = onehot.sum(axis=0)
    sums = d @ onehot
    own = sizes[inv]
    a = sums[np.arange(labels.size), inv] / np.maximum(own - 1, 1)
    mean_other = sums / sizes
    mean_other[np.arange(labels.size), inv] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def silhouette_score(points, labels: ClusterAssignment | Sequence[int]) -> float:
    """Mean silhouette over non-noise points.

    Singleton clusters contribute 0. Raises :class:`DegeneratePartition` when
    fewer than two non-noise clusters remain.
    """
    X = as_points(points)
    lab = as_label_array(labels)
    if lab.shape[0] != X.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} points but {lab.shape[0]} labels")
    return silhouette_from_sq_dists(pairwise_sq_dists(X), lab)


@dataclass(frozen=True)
class GridResult:
    best_config: ClusteringConfig
    best_score: float
    best_labels: ClusterAssignment
    scores: tuple[float, ...]

    def __iter__(self):
        # allows ``config, score, labels = grid_search(...)``
        return iter((self.best_config, self.best_score, self.best_labels))


def grid_search(points, grid: GridSpec, seed: int = 0) -> GridResult:
    """Cluster with every config and keep the strictly best silhouette.

    Configs that cannot produce a valid partition score ``-inf``; ties keep
    the earlier config.
    """
    if not isinstance(grid, GridSpec):
        grid = GridSpec(tuple(grid))
    X = as_points(points)
    d2 = pairwise_sq_dists(X)
    best_score = -math.inf
    best_config = None
    best_labels = None
    scores = []
    for config in grid.configs:
        try:
            labels = cluster(X, config, seed)
            score = silhouette_from_sq_dists(d2, np.asarray(labels.labels))
        except (TooFewPoints, DegeneratePartition):
            score = -math.inf
        scores.append(score)
        if score > best_score:
            best_score, best_config, best_labels = score, config, labels
    if best_config is None:
        raise AllConfigsDegenerate(f"none of {len(grid)} configurations produced a valid partition")
    return GridResult(best_config, best_score, best_labels, tuple(scores))
