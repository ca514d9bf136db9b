"""JSONL file formats and dict conversions for the core types.

Floats are written with 17 significant digits so every value round-trips
exactly; output key order is fixed so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import math
from typing import IO, Any, Iterator, Mapping, Optional

from .core import (
    CarError,
    ClusterAssignment,
    ClusteringConfig,
    CutoffDecision,
    EmbeddingRecord,
    InvalidConfig,
    NormalizedList,
    RankedCandidate,
    RankedList,
    validate_ranked_list,
)


class ParseError(CarError, ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None, source: str = ""):
        where = f"{source or '<input>'}:{lineno}: " if lineno is not None else ""
        super().__init__(where + message)
        self.lineno = lineno


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    if "." not in s and "e" not in s:
        s += ".0"
    return s


def dumps(obj: Any) -> str:
    """Compact JSON with fixed-precision floats."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Mapping):
        return "{" + ", ".join(f"{json.dumps(str(k), ensure_ascii=False)}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_jsonl(stream: IO[str], source: str = "") -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON ({exc.msg})", lineno, source) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", lineno, source)
        yield lineno, obj


def _require(obj: dict, key: str, kind, lineno=None, source="") -> Any:
    if key not in obj:
        raise ParseError(f"missing field {key!r}", lineno, source)
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ParseError(f"field {key!r} has the wrong type", lineno, source)
    return value


def _float(value: Any, what: str, lineno=None, source="") -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{what} must be a number", lineno, source)
    return float(value)


# -- corpus / queries -----------------------------------------------------------


def record_to_dict(rec: EmbeddingRecord) -> dict:
    return {"id": rec.id, "vector": list(rec.vector)}


def record_from_dict(obj: dict, lineno=None, source="") -> EmbeddingRecord:
    rid = _require(obj, "id", str, lineno, source)
    vec = _require(obj, "vector", list, lineno, source)
    values = [_float(v, "vector component", lineno, source) for v in vec]
    try:
        return EmbeddingRecord(rid, tuple(values))
    except ValueError as exc:
        raise ParseError(str(exc), lineno, source) from None


def query_from_dict(obj: dict, lineno=None, source="") -> tuple[str, Optional[tuple], Optional[frozenset]]:
    qid = _require(obj, "query_id", str, lineno, source)
    vector = None
    if obj.get("vector") is not None:
        vec = _require(obj, "vector", list, lineno, source)
        vector = tuple(_float(v, "vector component", lineno, source) for v in vec)
    gold = None
    if obj.get("gold_ids") is not None:
        ids = _require(obj, "gold_ids", list, lineno, source)
        if not all(isinstance(g, str) for g in ids):
            raise ParseError("gold_ids must be strings", lineno, source)
        gold = frozenset(ids)
    return qid, vector, gold


# -- ranked lists -----------------------------------------------------------------


def ranked_to_dict(ranked: RankedList) -> dict:
    return {
        "query_id": ranked.query_id,
        "candidates": [{"doc_id": c.doc_id, "distance": c.raw_distance} for c in ranked.candidates],
    }


def ranked_from_dict(obj: dict, lineno=None, source="", validate: bool = True) -> RankedList:
    qid = _require(obj, "query_id", str, lineno, source)
    cands = _require(obj, "candidates", list, lineno, source)
    out = []
    for rank, c in enumerate(cands, start=1):
        if not isinstance(c, dict):
            raise ParseError("candidates must be objects", lineno, source)
        doc = _require(c, "doc_id", str, lineno, source)
        dist = _float(c.get("distance"), "distance", lineno, source)
        out.append(RankedCandidate(doc, dist, rank))
    ranked = RankedList(qid, tuple(out))
    if validate and out:
        try:
            validate_ranked_list(ranked)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
    return ranked


# -- configs, decisions ----------------------------------------------------------


def config_to_dict(config: ClusteringConfig) -> dict:
    return config.as_dict()


def config_from_dict(obj: Mapping[str, Any]) -> ClusteringConfig:
    data = dict(obj)
    algo = data.pop("algorithm", None)
    if not isinstance(algo, str):
        raise InvalidConfig("config needs an 'algorithm' string")
    return ClusteringConfig(algo, tuple(data.items()))


def decision_to_dict(query_id: str, decision: CutoffDecision, retained: RankedList) -> dict:
    return {
        "query_id": query_id,
        "cutoff": decision.cutoff,
        "chosen_boundary": decision.chosen_boundary,
        "boundaries": list(decision.boundary_set),
        "gaps": {str(i): decision.gaps[i] for i in decision.boundary_set},
        "scores": {str(i): decision.scores[i] for i in decision.boundary_set},
        "config": config_to_dict(decision.best_config) if decision.best_config else None,
        "silhouette": decision.best_silhouette,
        "retained": retained.doc_ids,
    }


def decision_from_dict(obj: dict) -> CutoffDecision:
    bounds = tuple(int(b) for b in obj["boundaries"])
    config = obj.get("config")
    sil = obj.get("silhouette")
    return CutoffDecision(
        boundary_set=bounds,
        gaps={int(k): float(v) for k, v in obj["gaps"].items()},
        scores={int(k): float(v) for k, v in obj["scores"].items()},
        chosen_boundary=obj.get("chosen_boundary"),
        cutoff=int(obj["cutoff"]),
        best_config=config_from_dict(config) if config else None,
        best_silhouette=None if sil is None else float(sil),
    )


# Generic round-trip helpers for the remaining value types.


def normalized_to_dict(nl: NormalizedList) -> dict:
    return {"query_id": nl.query_id, "normalized": list(nl.normalized)}


def normalized_from_dict(obj: dict) -> NormalizedList:
    return NormalizedList(obj["query_id"], tuple(obj["normalized"]))


def assignment_to_dict(a: ClusterAssignment) -> dict:
    return {"labels": list(a.labels)}


def assignment_from_dict(obj: dict) -> ClusterAssignment:
    return ClusterAssignment(tuple(obj["labels"]))

