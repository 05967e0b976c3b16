import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankzsl.prior_learning import RankingSample, learn_priors
from rankzsl.ranking_core import Ranking, TopKList, kendall_topk_distance, ranking_from_scores
from rankzsl.score_rankers import PairwiseScores
from rankzsl.zero_shot import (
    DsConfig,
    SimilaritySource,
    aggregate_similarities,
    dr_classify,
    ds_classify,
    pr_classify,
    similarity_priors,
    similarity_to_ranking,
)


def R(*items):
    return Ranking(items)


def src(matrix, name="s"):
    m = np.asarray(matrix, dtype=float)
    return SimilaritySource(name, m, [f"z{i}" for i in range(m.shape[0])],
                            [f"y{j}" for j in range(m.shape[1])])


# -- similarity sources ----------------------------------------------------------

def test_source_validation():
    with pytest.raises(ValueError):
        SimilaritySource("bad", np.zeros((2, 3)), ["a"], ["x", "y", "z"])
    with pytest.raises(ValueError):
        src([[0.0, np.inf]])
    with pytest.raises(KeyError):
        src([[0.0, 1.0]]).row("missing")


def test_aggregate_examples():
    s = src([[1.0, 3.0], [5.0, 2.0]])
    np.testing.assert_allclose(aggregate_similarities([s]).matrix, [[0, 0.5], [1, 0.25]])
    for method in ("arithmetic", "geometric"):
        np.testing.assert_allclose(aggregate_similarities([s, s], method).matrix,
                                   aggregate_similarities([s], method).matrix)
    a, b = src([[0.2, 0.8]]), src([[0.8, 0.2]])
    np.testing.assert_allclose(aggregate_similarities([a, b]).matrix, [[0.5, 0.5]])
    # a zero in any source zeroes the geometric mean
    np.testing.assert_allclose(aggregate_similarities([a, b], "geometric").matrix, [[0, 0]])


def test_aggregate_misaligned():
    a = src([[0.2, 0.8]])
    b = SimilaritySource("b", np.array([[0.2, 0.8]]), ["z0"], ["y1", "y0"])
    with pytest.raises(ValueError):
        aggregate_similarities([a, b])
    with pytest.raises(ValueError):
        aggregate_similarities([])
    with pytest.raises(ValueError):
        aggregate_similarities([a], "median")


@settings(max_examples=50)
@given(st.lists(st.integers(-100, 100), min_size=2, max_size=6, unique=True),
       st.floats(0.1, 10), st.floats(-20, 20))
def test_aggregate_invariant_to_affine_rescaling(row, scale, shift):
    # integer rows so the affine map cannot collapse distinct values
    s = src([row, row[::-1]])
    t = src(np.asarray(s.matrix) * scale + shift)
    np.testing.assert_allclose(aggregate_similarities([s]).matrix,
                               aggregate_similarities([t]).matrix, atol=1e-9)


def test_similarity_to_ranking_examples():
    s = src([[0.9, 0.1, 0.5], [0.3, 0.3, 0.3]])
    assert similarity_to_ranking(s, "z0") == R(0, 2, 1)
    assert similarity_to_ranking(src(np.exp(s.matrix * 7)), "z0") == R(0, 2, 1)
    assert similarity_to_ranking(s, "z1") == R(0, 1, 2)
    assert similarity_priors(s) == [R(0, 2, 1), R(0, 1, 2)]
    with pytest.raises(KeyError):
        similarity_to_ranking(s, "nope")


# -- DR --------------------------------------------------------------------------

def test_dr_examples():
    priors = [R(0, 1, 2, 3), R(3, 2, 1, 0)]
    pred = dr_classify(R(3, 2, 1, 0), priors, k=4)
    assert pred.index == 1 and pred.scores[1] == 0
    # distance 1 from A, 5 from B
    x = R(1, 0, 2, 3)
    assert [kendall_topk_distance(x.top(4), p.top(4)) for p in priors] == [1, 5]
    assert dr_classify(x, priors, 4).index == 0
    # equidistant -> lower index
    assert dr_classify(R(0, 1, 2, 3), [R(1, 0, 2, 3), R(0, 2, 1, 3)], 4).index == 0
    with pytest.raises(ValueError):
        dr_classify(x, [], 4)


@settings(max_examples=100)
@given(st.lists(st.integers(-50, 50), min_size=5, max_size=5), st.integers(0, 2**31))
def test_dr_invariant_under_monotone_transform(raw, seed):
    rng = np.random.default_rng(seed)
    priors = [Ranking(tuple(rng.permutation(5))) for _ in range(4)]
    s = np.array(raw, dtype=float)
    a = dr_classify(ranking_from_scores(s), priors, 3)
    b = dr_classify(ranking_from_scores(np.exp(s / 10) * 3 - 1), priors, 3)
    assert a.index == b.index


# -- PR --------------------------------------------------------------------------

def test_pr_examples():
    f = [math.log(2), 0.0, 0.0]
    pred = pr_classify(f, [R(0, 1, 2), R(2, 1, 0)], k=2)
    assert pred.index == 0
    np.testing.assert_allclose(pred.scores, [math.log(0.25), math.log(1 / 12)])
    assert pr_classify(np.zeros(4), [R(1, 0, 2, 3), R(2, 0, 1, 3)], 2).index == 0


def test_pr_k1_picks_best_top_class():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = rng.normal(size=6)
        priors = [Ranking(tuple(rng.permutation(6))) for _ in range(4)]
        best = max(range(4), key=lambda z: (s[priors[z].order[0]], -z))
        assert pr_classify(s, priors, 1).index == best


def test_pr_shift_invariance_1000_cases():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        c = int(rng.integers(2, 8))
        s = rng.normal(0, 3, c)
        priors = [Ranking(tuple(rng.permutation(c))) for _ in range(int(rng.integers(1, 5)))]
        k = int(rng.integers(1, c + 1))
        shift = float(rng.normal(0, 100))
        assert pr_classify(s, priors, k).index == pr_classify(s + shift, priors, k).index


def test_pr_selects_class_whose_prior_is_the_score_order():
    rng = np.random.default_rng(2)
    for _ in range(50):
        s = rng.normal(size=5)
        priors = [Ranking(tuple(rng.permutation(5))) for _ in range(3)]
        z = int(rng.integers(0, 3))
        priors[z] = ranking_from_scores(s)
        assert pr_classify(s, priors, 5).index == z


def test_pr_with_pairwise_scores():
    p = PairwiseScores.from_differences([0.0, 2.0, 1.0])
    assert pr_classify(p, [R(0, 1, 2), R(1, 2, 0)], 3).index == 1


def test_unanimous_priors_tie_to_first_class():
    rng = np.random.default_rng(3)
    pi = R(2, 0, 1, 3)
    for _ in range(20):
        s = rng.normal(size=4)
        assert pr_classify(s, [pi] * 3, 2).index == 0
        assert dr_classify(ranking_from_scores(s), [pi] * 3, 2).index == 0


def test_pr_accepts_semantic_prior():
    samples = [RankingSample("cat", TopKList((0, 1), 3)), RankingSample("dog", TopKList((2, 1), 3))]
    prior = learn_priors(samples, ["cat", "dog"], "mallows")
    pred = pr_classify([0.0, 0.5, 3.0], prior, 2)
    assert pred.label == "dog"
    assert dr_classify(R(0, 2, 1), prior, 2).label == "cat"


def test_pr_errors():
    with pytest.raises(ValueError):
        pr_classify([0.0, 1.0], [], 1)
    with pytest.raises(ValueError):
        pr_classify([0.0, 1.0], [R(0, 1, 2)], 1)


# -- DS --------------------------------------------------------------------------

def test_ds_worked_example():
    sim = src([[2.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    p = [0.7, 0.2, 0.1]
    pred = ds_classify(p, sim, DsConfig(top_m=2))
    a = 2 / 3 * math.log(2.1) + 1 / 3 * math.log(0.6)
    b = 0.5 * math.log(0.6) + 0.5 * math.log(0.3)
    np.testing.assert_allclose(pred.scores, [a, b])
    assert pred.index == 0


def test_ds_equal_weights_is_geometric_mean_of_ratios():
    rng = np.random.default_rng(4)
    p = rng.dirichlet(np.ones(8))
    sim = src([np.r_[np.ones(5), np.zeros(3)], np.r_[np.zeros(3), np.ones(5)]])
    pred = ds_classify(p, sim, DsConfig(top_m=5))
    expected = np.log(np.prod(p[:5] * 8) ** (1 / 5))
    assert pred.scores[0] == pytest.approx(expected)


def test_ds_top1_maximizes_probability_ratio():
    p = np.array([0.1, 0.5, 0.15, 0.25])
    prior = np.array([0.1, 0.6, 0.1, 0.2])
    sim = src([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    pred = ds_classify(p, sim, DsConfig(top_m=1, train_prior=prior))
    assert pred.index == int(np.argmax(p / prior)) == 2


def test_ds_single_test_class():
    sim = src([[0.3, 0.9, 0.1]])
    assert ds_classify([0.2, 0.3, 0.5], sim, DsConfig(top_m=2)).index == 0


def test_ds_zero_mass_is_minus_infinity(caplog):
    sim = src([[0.0, 0.0, 0.0], [1.0, 0.5, 0.0]])
    pred = ds_classify([0.5, 0.3, 0.2], sim, DsConfig(top_m=2))
    assert pred.scores[0] == -np.inf and pred.index == 1
    assert "zero similarity mass" in caplog.text


def test_ds_errors():
    sim = src([[1.0, 0.5, 0.0]])
    with pytest.raises(ValueError):
        ds_classify([0.5, 0.5], sim)
    with pytest.raises(ValueError):
        ds_classify([0.5, 0.5, 0.0], sim, DsConfig(top_m=2))
    with pytest.raises(ValueError):
        ds_classify([0.5, 0.3, 0.2], sim, DsConfig(top_m=4))
