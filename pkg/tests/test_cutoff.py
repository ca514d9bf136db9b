import itertools

import pytest
from hypothesis import given, strategies as st

from car_retrieval.core import LengthMismatch, RankedList
from car_retrieval.cutoff import apply_cutoff, boundary_set, select_cutoff
from oracles import oracle_cutoff

SIX = [0, 0.05, 0.1, 0.6, 0.65, 1.0]


@pytest.mark.parametrize(
    "labels,expected",
    [([0, 0, 0], ()), ([0, 0, 1, 1, 2], (3, 5)), ([0, -1, -1, 1], (2, 4)), ([4], ())],
)
def test_boundary_set(labels, expected):
    assert boundary_set(labels) == expected


def test_position_term_pulls_past_larger_gap():
    dec = select_cutoff(SIX, [0, 0, 0, 1, 1, 2])
    assert dec.boundary_set == (4, 6)
    assert dec.gaps[4] == pytest.approx(0.5)
    assert dec.gaps[6] == pytest.approx(0.35)
    assert dec.scores[4] == pytest.approx(1 + 4 / 6)
    assert dec.scores[6] == pytest.approx(1.7)
    assert (dec.chosen_boundary, dec.cutoff) == (6, 5)


def test_single_boundary():
    dec = select_cutoff([0, 0.02, 0.04, 0.9, 0.95], [0, 0, 0, 1, 1])
    assert dec.boundary_set == (4,)
    assert dec.cutoff == 3


@pytest.mark.parametrize("n", [1, 2, 7])
def test_one_region_keeps_everything(n):
    dec = select_cutoff([i / n for i in range(n)], [3] * n)
    assert dec.boundary_set == () and dec.chosen_boundary is None and dec.cutoff == n


def test_boundary_at_rank_two():
    assert select_cutoff([0, 1, 1], [0, 1, 1]).cutoff == 1


def test_zero_gaps_pick_latest_boundary():
    dec = select_cutoff([0, 0.5, 0.5, 0.5, 1.0], [0, 0, 1, 2, 2])
    assert dec.gaps == {3: 0.0, 4: 0.0}
    assert dec.chosen_boundary == 4 and dec.cutoff == 3


def test_exact_tie_goes_to_smaller_rank():
    # score_3 = 1 + 3/6 and score_6 = 0.5 + 6/6
    dec = select_cutoff([0, 0.1, 0.5, 0.5, 0.5, 0.7], [0, 0, 1, 1, 1, 2])
    assert dec.scores[3] == pytest.approx(dec.scores[6])
    assert dec.chosen_boundary == 3


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        select_cutoff([0, 1], [0])


def test_dominant_gap_wins_when_positions_close():
    # one large gap right after a tiny wiggle at the end
    vals = [0, 0.01, 0.02, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 1.0]
    labels = [0, 0, 0, 1, 1, 1, 1, 1, 1, 2]
    # score_4 = 1 + 0.4 beats score_10 = 0.05 / 0.88 + 1
    assert select_cutoff(vals, labels).cutoff == 3


@st.composite
def profiles(draw):
    n = draw(st.integers(1, 25))
    vals = sorted(draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    labels = draw(st.lists(st.integers(-1, 3), min_size=n, max_size=n))
    return vals, labels


@given(profiles())
def test_invariants(profile):
    vals, labels = profile
    n = len(vals)
    dec = select_cutoff(vals, labels)
    assert 1 <= dec.cutoff <= n
    assert set(dec.boundary_set) <= set(range(2, n + 1))
    if dec.chosen_boundary is not None:
        assert dec.cutoff == dec.chosen_boundary - 1
        assert dec.chosen_boundary in dec.boundary_set
        assert max(dec.scores.values()) - dec.scores[dec.chosen_boundary] <= 1e-12
    assert dec.cutoff == oracle_cutoff(vals, labels)


def test_small_exhaustive_agreement():
    grid = [0.0, 0.5, 1.0]
    for n in range(1, 6):
        for vals in itertools.combinations_with_replacement(grid, n):
            for labels in itertools.product(range(3), repeat=n):
                assert select_cutoff(vals, labels).cutoff == oracle_cutoff(vals, labels)


def ranked6():
    return RankedList.from_pairs("q", [(f"d{i}", v) for i, v in enumerate(SIX)])


def test_apply_cutoff():
    ranked = ranked6()
    dec = select_cutoff(SIX, [0, 0, 0, 1, 1, 2])
    assert apply_cutoff(ranked, dec).doc_ids == ["d0", "d1", "d2", "d3", "d4"]
    assert apply_cutoff(ranked, select_cutoff(SIX, [0] * 6)) == ranked
    assert apply_cutoff(ranked, select_cutoff(SIX, [0, 1, 1, 1, 1, 1])).doc_ids == ["d0"]
