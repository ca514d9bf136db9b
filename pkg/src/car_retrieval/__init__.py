"""Cluster-based adaptive retrieval: choose how many ranked candidates to keep."""

from .car import normalize, run_car, run_car_on_distances
from .cluster import ClusterPoint, cluster, scale_points
from .core import (
    ClusterAssignment,
    ClusteringConfig,
    CutoffDecision,
    EmbeddingRecord,
    NormalizedList,
    RankedCandidate,
    RankedList,
    validate_ranked_list,
)
from .cutoff import apply_cutoff, boundary_set, select_cutoff
from .eval import CarMethod, EvalReport, LabeledQuery, TopK, accuracy_hit, calibrate_n, evaluate, tes
from .knn import EmbeddingStore, cosine_distance, retrieve_top_n
from .silhouette import GridSpec, build_default_grid, grid_search, silhouette_score
from .synth import SyntheticSpec, generate

__version__ = "0.1.0"

__all__ = [
    "CarMethod",
    "ClusterAssignment",
    "ClusterPoint",
    "ClusteringConfig",
    "CutoffDecision",
    "EmbeddingRecord",
    "EmbeddingStore",
    "EvalReport",
    "GridSpec",
    "LabeledQuery",
    "NormalizedList",
    "RankedCandidate",
    "RankedList",
    "SyntheticSpec",
    "TopK",
    "accuracy_hit",
    "apply_cutoff",
    "boundary_set",
    "build_default_grid",
    "calibrate_n",
    "cluster",
    "cosine_distance",
    "evaluate",
    "generate",
    "grid_search",
    "normalize",
    "retrieve_top_n",
    "run_car",
    "run_car_on_distances",
    "scale_points",
    "select_cutoff",
    "silhouette_score",
    "tes",
    "validate_ranked_list",
]
