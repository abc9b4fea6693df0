import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsad.errors import DataError
from wsad.labels import cosine_alignment, degenerate_fallback, dump_labels, pseudo_labels, training_labels

from oracles import cosine_pair

N_RANDOM = 10_000


def test_near_one_hot_alignment():
    s1, s2 = cosine_alignment([1, 0.001, 0.001], [1, 0, 0])
    assert s1 == pytest.approx(0.9999990000015, rel=1e-12)
    assert s2 == pytest.approx(0.0014142121481616541, rel=1e-12)


def test_two_segment_alignment_and_pseudo():
    s1, s2 = cosine_alignment([0.9, 0.1], [0, 1])
    assert s1 == pytest.approx(0.1 / np.sqrt(0.82), rel=1e-12)
    assert s2 == pytest.approx(0.9 / np.sqrt(0.82), rel=1e-12)
    assert pseudo_labels([0.9, 0.1], [0, 1]).tolist() == [1, 0]
    assert pseudo_labels([0.9, 0.1], [1, 0]).tolist() == [1, 0]


def test_uniform_scores_tie_keeps_clusters():
    s1, s2 = cosine_alignment([0.3] * 4, [1, 0, 1, 0])
    assert s1 == pytest.approx(np.sqrt(2) / 2) and s2 == pytest.approx(np.sqrt(2) / 2)
    assert s1 == s2
    assert pseudo_labels([0.3] * 4, [1, 0, 1, 0]).tolist() == [1, 0, 1, 0]
    assert pseudo_labels([0.3] * 4, [0, 1, 0, 1]).tolist() == [0, 1, 0, 1]


@pytest.mark.parametrize("yc", [[0, 0, 0], [1, 1]])
def test_degenerate_clustering_rejected(yc):
    with pytest.raises(DataError, match="degenerate clustering"):
        cosine_alignment([0.5] * len(yc), yc)


def test_length_mismatch_rejected():
    with pytest.raises(DataError):
        cosine_alignment([0.5, 0.5], [0, 1, 1])


def _random_case(g):
    m = int(g.integers(2, 40))
    scores = g.uniform(1e-6, 1.0, size=m)
    if g.random() < 0.3:
        scores = np.round(scores, 1) + 1e-3  # coarse scores produce near ties
    yc = g.integers(0, 2, size=m)
    yc[g.integers(m)] = 0
    yc[(g.integers(1, m) + np.flatnonzero(yc == 0)[0]) % m] = 1
    return scores, yc.astype(np.int8)


def test_label_properties_over_many_instances():
    g = np.random.default_rng(20240601)
    flips_checked = 0
    for _ in range(N_RANDOM):
        scores, yc = _random_case(g)
        s1, s2 = cosine_alignment(scores, yc)
        o1, o2 = cosine_pair(scores.tolist(), yc.tolist())
        assert s1 == pytest.approx(o1, rel=1e-12, abs=1e-15) and s2 == pytest.approx(o2, rel=1e-12, abs=1e-15)

        yp = pseudo_labels(scores, yc)
        assert 0 < yp.sum() < len(yp)
        assert set(yp.tolist()) <= {0, 1}
        if s1 != s2:
            flips_checked += 1
            assert np.array_equal(pseudo_labels(scores, 1 - yc), yp)
        # the chosen side aligns at least as well with its own indicator
        indicator = np.where(yp == 1, 1.0, 1e-3)
        a1, a2 = cosine_alignment(indicator, yp)
        assert a1 >= a2

        assert not training_labels(0, yp).any()
        assert not training_labels(0, None, len(yp)).any()
        assert np.array_equal(training_labels(1, yp), yp)
    assert flips_checked > N_RANDOM * 0.9


@settings(max_examples=300, deadline=None)
@given(
    scores=st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=30),
    data=st.data(),
)
def test_flip_invariance_hypothesis(scores, data):
    m = len(scores)
    yc = data.draw(st.lists(st.integers(0, 1), min_size=m, max_size=m).filter(lambda v: 0 < sum(v) < m))
    s1, s2 = cosine_alignment(scores, yc)
    a = pseudo_labels(scores, yc)
    b = pseudo_labels(scores, [1 - v for v in yc])
    if s1 != s2:
        assert np.array_equal(a, b)
    else:
        assert np.array_equal(a, 1 - b)


@settings(max_examples=200, deadline=None)
@given(m=st.integers(1, 200))
def test_normal_videos_are_all_zero(m):
    assert training_labels(0, None, m).tolist() == [0] * m
    assert training_labels(1, None, m).tolist() == [1] * m


def test_degenerate_fallback_is_all_ones(caplog):
    with caplog.at_level("WARNING"):
        y = degenerate_fallback(1, "vid")
    assert y.tolist() == [1]
    assert "vid" in caplog.text


def test_training_label_errors():
    with pytest.raises(DataError):
        training_labels(2, None, 3)
    with pytest.raises(DataError):
        training_labels(1, [0, 1], num_segments=3)
    with pytest.raises(DataError):
        training_labels(1)


def test_dump_labels(tmp_path):
    p = tmp_path / "v.csv"
    dump_labels(p, [0.25, 0.75], [0, 1], [1, 0], train=[1, 0])
    rows = list(csv.reader(p.open()))
    assert rows == [["segment_index", "score", "cluster", "pseudo", "train"], ["0", "0.25", "0", "1", "1"], ["1", "0.75", "1", "0", "0"]]
    dump_labels(p, [0.5], None, None)
    assert p.read_text().splitlines() == ["segment_index,score,cluster,pseudo", "0,0.5,,"]
