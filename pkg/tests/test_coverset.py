import math

import numpy as np
import pytest

from conftest import make_traj, random_corpus
from covertraj.coverset import (
    BRUTE_FORCE_LIMIT,
    CoverConfig,
    brute_force_cover,
    coverage_report,
    greedy_cover,
    random_cover,
    verify_cover,
)
from covertraj.errors import EmptyCorpus, InvalidState, TooLarge
from covertraj.models.trajectory import DistanceKind, Provenance, TrajectoryCorpus, TrajectorySet, distance


def corpus_of(*point_lists):
    return TrajectoryCorpus(items=tuple(make_traj(p) for p in point_lists))


def test_config_validation():
    with pytest.raises(InvalidState):
        CoverConfig(epsilon=0.0)
    with pytest.raises(InvalidState):
        CoverConfig(epsilon=1.0, max_set_size=0)
    with pytest.raises(InvalidState):
        CoverConfig(epsilon=1.0, candidates="nearest")


def test_singleton_corpus():
    corpus = corpus_of([(0, 1), (0, 2)])
    config = CoverConfig(epsilon=1.0)
    for result in (greedy_cover(corpus, config), random_cover(corpus, config, 3, 7), brute_force_cover(corpus, config)):
        assert len(result) == 1
        assert result.source_indices == (0,)
        assert result.provenance is Provenance.FIXED


def test_two_mutually_covering_trajectories():
    corpus = corpus_of([(0, 1), (0, 2)], [(0.5, 1), (0.5, 2)])
    config = CoverConfig(epsilon=1.0)
    assert len(greedy_cover(corpus, config)) == 1
    assert len(brute_force_cover(corpus, config)) == 1


def test_greedy_picks_largest_gain_with_smallest_index_ties():
    # 1D points at x = 0, 1, 2, 10 with eps = 1: element 1 covers three
    corpus = corpus_of([(0, 0)], [(1, 0)], [(2, 0)], [(10, 0)])
    result = greedy_cover(corpus, CoverConfig(epsilon=1.0))
    assert result.source_indices == (1, 3)


def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpus):
        greedy_cover(TrajectoryCorpus(items=()), CoverConfig(epsilon=1.0))


def test_duplicates_are_collapsed():
    corpus = corpus_of([(0, 0)], [(0, 0)], [(5, 0)], [(5, 0)])
    result = greedy_cover(corpus, CoverConfig(epsilon=1.0))
    assert result.source_indices == (0, 2)
    assert not result.has_duplicates()


@pytest.mark.parametrize("kind", list(DistanceKind))
def test_greedy_postcondition(rng, kind):
    for _ in range(20):
        corpus = random_corpus(rng, int(rng.integers(1, 60)))
        config = CoverConfig(epsilon=float(rng.uniform(0.5, 3.0)), kind=kind)
        result = greedy_cover(corpus, config)
        assert result.complete
        assert verify_cover(result, corpus, config)
        for item in corpus.items:
            assert min(distance(item, m, kind) for m in result.modes) <= config.epsilon


def test_uncovered_candidate_pool_also_covers(rng):
    corpus = random_corpus(rng, 40)
    config = CoverConfig(epsilon=1.5, candidates="uncovered")
    result = greedy_cover(corpus, config)
    assert verify_cover(result, corpus, config)
    # only uncovered elements are picked, so set elements are pairwise farther than eps
    for i, a in enumerate(result.modes):
        for b in result.modes[i + 1:]:
            assert distance(a, b) > config.epsilon


def test_max_set_size_returns_flagged_partial(rng):
    corpus = random_corpus(rng, 50, scale=3.0)
    result = greedy_cover(corpus, CoverConfig(epsilon=0.5, max_set_size=2))
    assert len(result) == 2
    assert not result.complete


def test_greedy_within_log_bound_of_optimum(rng):
    for _ in range(100):
        n = int(rng.integers(1, 13))
        corpus = random_corpus(rng, n)
        config = CoverConfig(epsilon=float(rng.uniform(0.5, 3.0)))
        greedy = greedy_cover(corpus, config)
        optimum = brute_force_cover(corpus, config)
        assert len(optimum) <= len(greedy)
        assert len(greedy) <= max(1, math.ceil(math.log(n))) * len(optimum)
        assert verify_cover(optimum, corpus, config)


def test_brute_force_returns_lexicographically_first_minimum():
    # x = 0, 1, 2 with eps = 1: {1} is the only size-1 cover
    corpus = corpus_of([(0, 0)], [(1, 0)], [(2, 0)])
    assert brute_force_cover(corpus, CoverConfig(epsilon=1.0)).source_indices == (1,)
    # x = 0, 3 with eps = 1: size 2, indices in order
    corpus = corpus_of([(0, 0)], [(3, 0)])
    assert brute_force_cover(corpus, CoverConfig(epsilon=1.0)).source_indices == (0, 1)


def test_brute_force_guard(rng):
    corpus = random_corpus(rng, BRUTE_FORCE_LIMIT + 1)
    with pytest.raises(TooLarge):
        brute_force_cover(corpus, CoverConfig(epsilon=1.0))


def test_random_cover_is_deterministic(rng):
    corpus = random_corpus(rng, 40)
    config = CoverConfig(epsilon=1.5)
    first = random_cover(corpus, config, trials=10, rng_seed=99)
    second = random_cover(corpus, config, trials=10, rng_seed=99)
    assert first.source_indices == second.source_indices
    assert verify_cover(first, corpus, config)


def test_random_cover_usually_matches_greedy(rng):
    wins = 0
    for _ in range(100):
        corpus = random_corpus(rng, 8)
        config = CoverConfig(epsilon=float(rng.uniform(1.0, 2.5)))
        if len(random_cover(corpus, config, trials=50, rng_seed=int(rng.integers(1 << 31)))) <= len(greedy_cover(corpus, config)):
            wins += 1
    assert wins >= 90


def test_coverage_report_self_cover(rng):
    corpus = random_corpus(rng, 10)
    config = CoverConfig(epsilon=0.1)
    report = coverage_report(TrajectorySet(modes=corpus.items), corpus, config)
    assert report.fraction_covered == 1.0
    assert report.max_residual == 0.0


def test_coverage_report_hand_computed_residuals():
    corpus = corpus_of([(0, 0)], [(0, 3)], [(4, 0)])
    s = TrajectorySet(modes=(make_traj([(0, 0)]),))
    report = coverage_report(s, corpus, CoverConfig(epsilon=3.5))
    np.testing.assert_allclose(report.residuals, [0.0, 3.0, 4.0])
    assert report.fraction_covered == pytest.approx(2 / 3)
    assert report.max_residual == 4.0
    hist = report.histogram(bins=4)
    assert list(hist.columns) == ["bin_start", "bin_end", "count"]
    assert hist["count"].sum() == 3


def test_cover_size_shrinks_as_epsilon_grows(rng):
    corpus = random_corpus(rng, 300, steps=6)
    sizes = [len(greedy_cover(corpus, CoverConfig(epsilon=eps))) for eps in (8.0, 5.0, 4.0, 3.0, 2.0)]
    assert sizes == sorted(sizes)
