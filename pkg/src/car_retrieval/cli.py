"""Command-line interface: ``car retrieve | cutoff | evaluate | gen | grid``.

Exit codes: 0 ok, 1 other error, 2 parse error, 3 dimension mismatch,
4 invalid grid, 5 unresolvable query.

Every flag can also be set in a JSON file passed with ``--config``; keys
mirror the flag names with dashes replaced by underscores. Command-line
flags win over the file. The seed falls back to ``$CAR_SEED``, then 0.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Optional, Sequence

from . import formats
from .car import normalize, run_car_on_distances
from .cluster import scale_points
from .core import (
    ALGORITHMS,
    CarError,
    ClusterAssignment,
    CutoffDecision,
    DegeneratePartition,
    DimensionMismatch,
    InvalidConfig,
    InvalidGrid,
    RankedList,
    UnknownAlgorithm,
    UnresolvableQuery,
    validate_ranked_list,
)
from .cutoff import apply_cutoff, select_cutoff
from .eval import CarMethod, LabeledQuery, TopK, evaluate, tes
from .knn import DEFAULT_N, METRICS, EmbeddingStore, retrieve_top_n
from .silhouette import GridSpec, build_default_grid, silhouette_score
from .synth import SyntheticSpec, generate

log = logging.getLogger("car_retrieval")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_DIMENSION = 3
EXIT_GRID = 4
EXIT_UNRESOLVABLE = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@contextmanager
def _open_out(path: Optional[str]):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _open_in(path: str):
    if path == "-":
        return sys.stdin
    return open(path, encoding="utf-8")


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("CAR_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"CAR_SEED must be an integer, got {env!r}", EXIT_PARSE) from None
    return 0


def _map(fn, items: Sequence, jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# -- loaders ---------------------------------------------------------------------


def load_corpus(path: str, metric: str = "cosine_distance") -> EmbeddingStore:
    records = []
    dim = None
    with _open_in(path) as fh:
        for lineno, obj in formats.read_jsonl(fh, path):
            rec = formats.record_from_dict(obj, lineno, path)
            if dim is None:
                dim = len(rec.vector)
            elif len(rec.vector) != dim:
                raise CliError(
                    f"{path}:{lineno}: vector has dimension {len(rec.vector)}, expected {dim}",
                    EXIT_DIMENSION,
                )
            records.append(rec)
    try:
        return EmbeddingStore(records, metric)
    except CarError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from None


def load_queries(path: str) -> list[tuple[int, str, Optional[tuple], Optional[frozenset]]]:
    out = []
    with _open_in(path) as fh:
        for lineno, obj in formats.read_jsonl(fh, path):
            out.append((lineno, *formats.query_from_dict(obj, lineno, path)))
    return out


def load_ranked(path: str) -> list[RankedList]:
    with _open_in(path) as fh:
        return [formats.ranked_from_dict(obj, lineno, path) for lineno, obj in formats.read_jsonl(fh, path)]


def load_grid(path: str) -> GridSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            return GridSpec.from_text(fh.read())
    except (InvalidGrid, InvalidConfig, UnknownAlgorithm) as exc:
        raise CliError(f"{path}: {exc}", EXIT_GRID) from None


def load_pinned_labels(path: str) -> dict[str, ClusterAssignment]:
    pinned = {}
    with _open_in(path) as fh:
        for lineno, obj in formats.read_jsonl(fh, path):
            qid = obj.get("query_id")
            labels = obj.get("labels")
            if not isinstance(qid, str) or not isinstance(labels, list):
                raise formats.ParseError("expected query_id and labels", lineno, path)
            pinned[qid] = ClusterAssignment(tuple(labels))
    return pinned


def _retrieve_all(store: EmbeddingStore, queries, n: int, path: str) -> list[RankedList]:
    out = []
    for lineno, qid, vector, _ in queries:
        if vector is None:
            raise CliError(f"{path}:{lineno}: query {qid!r} has no vector", EXIT_UNRESOLVABLE)
        if len(vector) != store.dim:
            raise CliError(
                f"{path}:{lineno}: query vector has dimension {len(vector)}, corpus has {store.dim}",
                EXIT_DIMENSION,
            )
        out.append(retrieve_top_n(store, vector, n, query_id=qid))
    return out


# -- commands --------------------------------------------------------------------


def cmd_retrieve(args) -> int:
    store = load_corpus(args.corpus, args.metric)
    queries = load_queries(args.queries)
    ranked = _retrieve_all(store, queries, args.n, args.queries)
    with _open_out(args.out) as out:
        for rl in ranked:
            out.write(formats.dumps(formats.ranked_to_dict(rl)) + "\n")
    log.info("retrieved %d ranked lists", len(ranked))
    return EXIT_OK


def _pinned_decision(ranked: RankedList, labels: ClusterAssignment, scale_index: bool):
    validate_ranked_list(ranked)
    norm = normalize(ranked)
    decision = select_cutoff(norm, labels)
    try:
        sil = silhouette_score(scale_points(norm, scale_index), labels) if len(ranked) > 1 else None
    except DegeneratePartition:
        sil = None
    decision = dataclasses.replace(decision, best_silhouette=sil)
    return apply_cutoff(ranked, decision), decision


def cmd_cutoff(args) -> int:
    ranked = load_ranked(args.ranked)
    grid = load_grid(args.grid_file) if args.grid_file else args.algorithm
    seed = _resolve_seed(args.seed)
    pinned = load_pinned_labels(args.pin_labels) if args.pin_labels else None

    def work(rl: RankedList) -> tuple[RankedList, CutoffDecision]:
        if pinned is not None:
            if rl.query_id not in pinned:
                raise CliError(f"no pinned labels for query {rl.query_id!r}", EXIT_UNRESOLVABLE)
            return _pinned_decision(rl, pinned[rl.query_id], args.scale_index)
        return run_car_on_distances(rl, grid, seed, scale_index=args.scale_index)

    results = _map(work, ranked, args.jobs)
    with _open_out(args.out) as out:
        for rl, (retained, decision) in zip(ranked, results):
            out.write(formats.dumps(formats.decision_to_dict(rl.query_id, decision, retained)) + "\n")
    log.info("wrote %d cutoff decisions", len(results))
    return EXIT_OK


def parse_methods(spec: str, algorithm: str, grid, seed: int, n: Optional[int], scale_index: bool):
    methods = []
    for token in (t.strip() for t in spec.split(",")):
        if not token:
            continue
        if token.startswith("top") and token[3:].isdigit():
            methods.append(TopK(int(token[3:])))
        elif token == "car":
            methods.append(CarMethod(grid=grid or algorithm, seed=seed, n=n, scale_index=scale_index))
        elif token.startswith("car-") and token[4:] in ALGORITHMS:
            methods.append(CarMethod(grid=token[4:], seed=seed, n=n, scale_index=scale_index, label=token))
        else:
            raise CliError(f"unknown method {token!r}; use topK, car or car-<algorithm>", EXIT_PARSE)
    if not methods:
        raise CliError("no methods given", EXIT_PARSE)
    return methods


def _gold_map(path: str) -> dict[str, frozenset]:
    gold = {}
    for lineno, qid, _, ids in load_queries(path):
        if ids is None:
            raise formats.ParseError(f"query {qid!r} has no gold_ids", lineno, path)
        gold[qid] = ids
    return gold


def build_labeled_queries(args) -> list[LabeledQuery]:
    gold = _gold_map(args.gold) if args.gold else {}
    labeled = []
    if args.ranked:
        if not args.gold:
            raise CliError("--gold is required with --ranked", EXIT_PARSE)
        ranked = {rl.query_id: rl for rl in load_ranked(args.ranked)}
        for qid in gold:
            if qid not in ranked:
                raise CliError(f"query {qid!r} has gold labels but no ranked list", EXIT_UNRESOLVABLE)
            labeled.append(LabeledQuery(qid, gold[qid], ranked=ranked[qid]))
        extra = set(ranked) - set(gold)
        if extra:
            log.warning("%d ranked lists have no gold labels and were skipped", len(extra))
        return labeled

    if not (args.corpus and args.queries):
        raise CliError("give --ranked, or --corpus with --queries", EXIT_PARSE)
    store = load_corpus(args.corpus, args.metric)
    queries = load_queries(args.queries)
    by_id = {qid: (lineno, vec, ids) for lineno, qid, vec, ids in queries}
    order = list(gold) if gold else [q[1] for q in queries]
    pools = {}
    for qid in order:
        if qid not in by_id or by_id[qid][1] is None:
            raise CliError(f"query {qid!r} has no vector to retrieve with", EXIT_UNRESOLVABLE)
        lineno, vec, ids = by_id[qid]
        ids = gold.get(qid, ids)
        if not ids:
            raise CliError(f"{args.queries}:{lineno}: query {qid!r} has no gold_ids", EXIT_UNRESOLVABLE)
        pools[qid] = _retrieve_all(store, [(lineno, qid, vec, ids)], args.n, args.queries)[0]
        labeled.append(LabeledQuery(qid, ids, vector=vec, ranked=pools[qid]))
    return labeled


def cmd_evaluate(args) -> int:
    if args.tes_only is not None:
        acc, avg = args.tes_only
        print(f"{tes(acc, avg):.3f}")
        return EXIT_OK
    seed = _resolve_seed(args.seed)
    grid = load_grid(args.grid_file) if args.grid_file else None
    methods = parse_methods(args.methods, args.algorithm, grid, seed, None, args.scale_index)
    queries = build_labeled_queries(args)
    reports = evaluate(queries, methods, pool_size=args.n, jobs=args.jobs)
    with _open_out(args.out) as out:
        out.write(formats.dumps([r.to_dict() for r in reports]) + "\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["query_id", "method", "retained_count", "hit"])
            for r in reports:
                for rec in r.records:
                    writer.writerow([rec.query_id, r.method, rec.retained_count, int(rec.hit)])
    for r in reports:
        log.info(
            "%s: accuracy=%.4f any_hit=%.4f avg_candidates=%.3f tes=%.4f",
            r.method, r.accuracy, r.any_hit_rate, r.avg_candidates, r.tes,
        )
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        with open(args.spec_file, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f"{args.spec_file}:{exc.lineno}: malformed JSON ({exc.msg})", EXIT_PARSE) from None
    if not isinstance(data, dict):
        raise CliError(f"{args.spec_file}: expected a JSON object", EXIT_PARSE)
    spec = SyntheticSpec.from_dict(data)
    queries = generate(spec)
    gold_out = args.gold_out
    if gold_out is None and args.out not in (None, "-"):
        stem = args.out[:-6] if args.out.endswith(".jsonl") else args.out
        gold_out = stem + ".gold.jsonl"
    with _open_out(args.out) as out:
        for q in queries:
            out.write(formats.dumps(formats.ranked_to_dict(q.ranked)) + "\n")
    if gold_out:
        with open(gold_out, "w", encoding="utf-8", newline="\n") as fh:
            for q in queries:
                fh.write(formats.dumps({"query_id": q.query_id, "gold_ids": sorted(q.gold_ids)}) + "\n")
    log.info("generated %d queries", len(queries))
    return EXIT_OK


def cmd_grid(args) -> int:
    with _open_out(args.out) as out:
        out.write(build_default_grid(args.algorithm, args.n_points).to_text())
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help="random seed (default: $CAR_SEED or 0)")


def _add_cluster_flags(p):
    p.add_argument("--algorithm", choices=ALGORITHMS, default="kmeans")
    p.add_argument("--grid-file", default=None, help="one config per line: algorithm=... key=value")
    p.add_argument("--scale-index", action=argparse.BooleanOptionalAction, default=True,
                   help="cluster on (rank/N, distance) instead of (rank, distance)")
    p.add_argument("--jobs", type=int, default=1)
    _add_seed(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="car", description="Cluster-based adaptive retrieval cutoffs.")
    parser.add_argument("--config", default=None, help="JSON file of flag defaults")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("retrieve", help="exact top-N retrieval into ranked JSONL")
    p.add_argument("corpus")
    p.add_argument("queries")
    p.add_argument("--n", type=int, default=DEFAULT_N)
    p.add_argument("--metric", choices=METRICS, default="cosine_distance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("cutoff", help="adaptive cutoff decisions for ranked JSONL")
    p.add_argument("ranked")
    _add_cluster_flags(p)
    p.add_argument("--pin-labels", default=None, help="JSONL of {query_id, labels} to bypass clustering")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cutoff)

    p = sub.add_parser("evaluate", help="compare methods on labeled queries")
    p.add_argument("--ranked", default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--queries", default=None)
    p.add_argument("--gold", default=None)
    p.add_argument("--methods", default="top3,top5,top10,car")
    p.add_argument("--n", type=int, default=DEFAULT_N)
    p.add_argument("--metric", choices=METRICS, default="cosine_distance")
    _add_cluster_flags(p)
    p.add_argument("--out", default=None, help="report JSON (default stdout)")
    p.add_argument("--csv", default=None, help="per-query CSV")
    p.add_argument("--tes-only", nargs=2, type=float, metavar=("ACCURACY", "AVG"), default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen", help="generate a synthetic labeled query set")
    p.add_argument("spec_file")
    p.add_argument("--out", default=None)
    p.add_argument("--gold-out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("grid", help="print the default grid for a backbone")
    p.add_argument("algorithm", choices=ALGORITHMS)
    p.add_argument("--n-points", type=int, default=DEFAULT_N)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_grid)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f"{known.config}:{exc.lineno}: malformed JSON ({exc.msg})", EXIT_PARSE) from None
    if not isinstance(cfg, dict):
        raise CliError(f"{known.config}: expected a JSON object", EXIT_PARSE)
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    used = set()
    for sp in subparsers.choices.values():
        dests = {a.dest for a in sp._actions}
        hits = {k: v for k, v in cfg.items() if k in dests}
        sp.set_defaults(**hits)
        used |= set(hits)
    unknown = set(cfg) - used - {"log_level"}
    if unknown:
        raise CliError(f"{known.config}: unknown keys {sorted(unknown)}", EXIT_PARSE)
    if "log_level" in cfg:
        parser.set_defaults(log_level=cfg["log_level"])


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except CliError as exc:
        print(f"car: error: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"car: error: {exc}", file=sys.stderr)
        return exc.code
    except formats.ParseError as exc:
        print(f"car: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DimensionMismatch as exc:
        print(f"car: error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (InvalidGrid, InvalidConfig, UnknownAlgorithm) as exc:
        print(f"car: error: {exc}", file=sys.stderr)
        return EXIT_GRID
    except UnresolvableQuery as exc:
        print(f"car: error: {exc}", file=sys.stderr)
        return EXIT_UNRESOLVABLE
    except (CarError, OSError) as exc:
        print(f"car: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
