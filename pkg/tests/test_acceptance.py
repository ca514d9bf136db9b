"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line and the session summary repeats
them under "acceptance criteria".
"""

import itertools
import json
import statistics
import time

import numpy as np

from car_retrieval.car import run_car_on_distances
from car_retrieval.cli import main
from car_retrieval.cluster import agglomerative, cluster, kmeans
from car_retrieval.core import ClusteringConfig, RankedList
from car_retrieval.cutoff import select_cutoff
from car_retrieval.eval import CarMethod, TopK, evaluate, tes
from car_retrieval.silhouette import build_default_grid, silhouette_score
from car_retrieval.synth import SyntheticSpec, generate
from oracles import dbscan_violations, optimal_inertia, oracle_cutoff, oracle_silhouette

# (accuracy, avg candidates) -> reference TES to three decimals
TABLE_TES = [
    (0.97, 3.0, 0.700),
    (0.99, 5.0, 0.553),
    (1.00, 10.0, 0.417),
    (0.98, 2.1, 0.866),
    (0.60, 3.0, 0.433),
    (0.67, 5.0, 0.374),
    (0.87, 10.0, 0.363),
    (0.69, 3.5, 0.459),
]


def ranked_from(dists, qid="q"):
    return RankedList.from_pairs(qid, [(f"d{i:02d}", float(d)) for i, d in enumerate(dists)])


def test_1_tes_regression(acceptance):
    worst = max(abs(tes(a, v) - want) for a, v, want in TABLE_TES)
    acceptance(1, "TES regression", worst <= 1e-3, f"8 pairs, max |error| {worst:.2e} (tol 1e-3)")


def _region_labels(n):
    out = []
    for r in range(3):
        for cuts in itertools.combinations(range(1, n), r):
            out.append([sum(i >= c for c in cuts) for i in range(n)])
    return out


def test_2_cutoff_oracle(acceptance):
    grid = [round(0.1 * i, 1) for i in range(11)]
    checked = mismatches = 0
    for n in range(1, 9):
        labelings = _region_labels(n)
        for vals in itertools.combinations_with_replacement(grid, n):
            for labels in labelings:
                checked += 1
                if select_cutoff(vals, labels).cutoff != oracle_cutoff(vals, labels):
                    mismatches += 1
    acceptance(2, "cutoff oracle equivalence", mismatches == 0, f"{checked} cases, {mismatches} mismatches")


def test_3_silhouette_oracle(acceptance):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(2, 51))
        k = int(rng.integers(2, min(5, n) + 1))
        pts = rng.uniform(size=(n, 2))
        # every cluster id present at least once
        labels = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
        rng.shuffle(labels)
        got = silhouette_score(pts, labels)
        want = oracle_silhouette(pts.tolist(), labels.tolist())
        worst = max(worst, abs(got - want))
    acceptance(3, "silhouette oracle", worst <= 1e-9, f"500 instances, max |error| {worst:.2e} (tol 1e-9)")


def _random_profile(rng, trial):
    n = int(rng.integers(2, 41))
    kind = trial % 3
    if kind == 0:
        return np.sort(rng.uniform(0, 1, n))
    if kind == 1:
        g = int(rng.integers(1, min(5, n) + 1))
        return np.sort(np.r_[rng.uniform(0.1, 0.2, g), rng.uniform(0.6, 0.9, n - g)])
    # coarse values produce many exactly tied gaps
    return np.sort(np.round(rng.uniform(0, 1, n), 1))


def test_4_scale_invariance(acceptance):
    rng = np.random.default_rng(4)
    violations = 0
    for trial in range(1000):
        d = _random_profile(rng, trial)
        alpha = float(10.0 - rng.uniform(0, 10))  # (0, 10]
        beta = float(rng.uniform(-5, 5))
        c1 = run_car_on_distances(ranked_from(d), "kmeans", seed=0)[1].cutoff
        c2 = run_car_on_distances(ranked_from(alpha * d + beta), "kmeans", seed=0)[1].cutoff
        violations += c1 != c2
    acceptance(4, "scale invariance", violations == 0, f"1000 lists, {violations} violations")


def test_5_planted_recovery(acceptance):
    failures = []
    for g, n in itertools.product((1, 2, 3, 4), (10, 40)):
        spec = SyntheticSpec(n_queries=5, gold_size_distribution={g: 1.0}, jitter=0.0, pool_size=n, seed=g)
        for q in generate(spec):
            retained, dec = run_car_on_distances(q.ranked, "kmeans")
            if dec.cutoff != g or set(retained.doc_ids) != q.gold_ids:
                failures.append((g, n, dec.cutoff))
    acceptance(5, "planted-structure recovery", not failures, f"G 1..4 x N 10,40, failures {failures}")


def test_6_adaptive_advantage(acceptance):
    queries = generate(SyntheticSpec())
    reports = {r.method: r for r in evaluate(queries, [TopK(3), TopK(5), TopK(10), CarMethod()])}
    car = reports["car"].tes
    ok = all(car > reports[m].tes for m in ("top3", "top5", "top10"))
    detail = ", ".join(f"{m} {reports[m].tes:.3f}" for m in ("car", "top3", "top5", "top10"))
    acceptance(6, "adaptive advantage", ok, detail)


def test_7_latency(acceptance):
    rng = np.random.default_rng(7)
    medians = {}
    for algo in ("kmeans", "bisecting_kmeans", "dbscan", "agglomerative", "birch"):
        grid = build_default_grid(algo, 40)
        times = []
        for _ in range(1000):
            g = int(rng.integers(1, 5))
            d = np.sort(np.r_[rng.uniform(0.1, 0.2, g), rng.uniform(0.5, 1.0, 40 - g)])
            ranked = ranked_from(d)
            t0 = time.perf_counter()
            run_car_on_distances(ranked, grid, seed=0)
            times.append(time.perf_counter() - t0)
        medians[algo] = statistics.median(times) * 1000
    ok = all(m < 50 for m in medians.values())
    acceptance(7, "latency budget", ok, ", ".join(f"{a} {m:.1f} ms" for a, m in medians.items()))


def test_8_determinism(acceptance, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_queries": 60, "seed": 8}))
    ranked = tmp_path / "q.jsonl"
    assert main(["gen", str(spec), "--out", str(ranked)]) == 0
    gold = tmp_path / "q.gold.jsonl"
    outputs = set()
    for run, jobs in enumerate(("1", "1", "3", "8")):
        rep, per_query = tmp_path / f"rep{run}.json", tmp_path / f"pq{run}.csv"
        code = main([
            "evaluate", "--ranked", str(ranked), "--gold", str(gold), "--jobs", jobs, "--seed", "11",
            "--methods", "top3,top5,top10,car,car-dbscan,car-birch", "--out", str(rep), "--csv", str(per_query),
        ])
        assert code == 0
        outputs.add((rep.read_bytes(), per_query.read_bytes()))
    acceptance(8, "determinism", len(outputs) == 1, f"4 runs over jobs 1,1,3,8, {len(outputs)} distinct outputs")


def test_9_clustering_correctness(acceptance):
    rng = np.random.default_rng(9)
    km_bad = 0
    km_checked = 0
    for n in range(2, 9):
        for k in range(2, min(3, n) + 1):
            for rep in range(12):
                pts = rng.uniform(size=(n, 2))
                if rep % 3 == 0:
                    pts = np.round(pts, 1)
                if np.unique(pts, axis=0).shape[0] < k:
                    continue
                km_checked += 1
                if kmeans(pts, k, rep).inertia > optimal_inertia(pts.tolist(), k) + 1e-9:
                    km_bad += 1

    db_bad = 0
    for _ in range(100):
        n = int(rng.integers(3, 20))
        pts = rng.uniform(size=(n, 2))
        eps = float(rng.uniform(0.05, 0.5))
        m = int(rng.integers(2, 6))
        labels = cluster(pts, ClusteringConfig.make("dbscan", eps=eps, min_samples=m)).labels
        db_bad += bool(dbscan_violations(pts.tolist(), list(labels), eps, m))

    ag_bad = 0
    ag_checked = 0
    for _ in range(30):
        n = int(rng.integers(3, 41))
        pts = rng.uniform(size=(n, 2))
        for linkage in ("ward", "average", "complete"):
            for k in range(2, n + 1, max(1, n // 6)):
                ag_checked += 1
                ag_bad += len(set(agglomerative(pts, k, linkage).tolist())) != k

    ok = km_bad == db_bad == ag_bad == 0
    detail = (
        f"kmeans {km_bad}/{km_checked} suboptimal, dbscan {db_bad}/100 violating, "
        f"agglomerative {ag_bad}/{ag_checked} wrong label count"
    )
    acceptance(9, "clustering correctness", ok, detail)
