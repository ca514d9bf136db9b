import pytest

from car_retrieval.car import run_car_on_distances
from car_retrieval.core import InvalidSpec, validate_ranked_list
from car_retrieval.synth import SyntheticSpec, generate


def test_single_gold_has_one_doc_before_gap():
    spec = SyntheticSpec(n_queries=20, gold_size_distribution={1: 1.0}, jitter=0.0,
                         relevant_band=(0.1, 0.1), irrelevant_band=(0.6, 0.9), gap=0.5)
    for q in generate(spec):
        d = q.ranked.distances
        assert (d < 0.6).sum() == 1
        assert q.ranked.doc_ids[0] in q.gold_ids and len(q.gold_ids) == 1


def test_deterministic():
    spec = SyntheticSpec(n_queries=30, seed=5)
    assert generate(spec) == generate(spec)
    assert generate(spec) != generate(SyntheticSpec(n_queries=30, seed=6))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"relevant_band": (0.1, 0.7), "irrelevant_band": (0.6, 0.9), "gap": 0.0},
        {"relevant_band": (0.1, 0.2), "irrelevant_band": (0.6, 0.9), "gap": 0.5},
        {"gold_size_distribution": {5: 1.0}},
        {"gold_size_distribution": {1: -1.0}},
        {"irrelevant_band": (0.6, 2.5)},
        {"jitter": -0.1},
        {"pool_size": 4},
    ],
)
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidSpec):
        SyntheticSpec(**kwargs)


def test_spec_dict_round_trip():
    spec = SyntheticSpec(n_queries=7, gold_size_distribution={2: 1.0}, seed=3)
    assert SyntheticSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(InvalidSpec):
        SyntheticSpec.from_dict({"bogus": 1})


def test_output_valid_and_gold_first():
    for q in generate(SyntheticSpec(n_queries=50, jitter=0.02, seed=2)):
        validate_ranked_list(q.ranked)
        g = len(q.gold_ids)
        assert len(q.ranked) == 40
        assert set(q.ranked.doc_ids[:g]) == q.gold_ids


def test_gold_size_mix():
    sizes = [len(q.gold_ids) for q in generate(SyntheticSpec(n_queries=400))]
    assert set(sizes) == {1, 2, 4}
    assert 0.4 < sizes.count(1) / 400 < 0.6


@pytest.mark.parametrize("g", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [10, 40])
def test_planted_recovery(g, n):
    spec = SyntheticSpec(n_queries=3, gold_size_distribution={g: 1.0}, jitter=0.0, pool_size=n)
    for q in generate(spec):
        _, dec = run_car_on_distances(q.ranked, "kmeans")
        assert dec.cutoff == g
