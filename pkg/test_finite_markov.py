"""
Property tests for the finite Markov algebra
"""
import numpy as np
import pytest

from errors import InvalidMeasure, ScoreSetMismatch
from finite_markov import (Measure, ScoreSet, Transition, compose, distribution_transition,
                           fosd_geq, fq_compose, is_downward, is_monotone, push,
                           quantile_transition, segments_are_uniform)

N_TRIALS = 1000
SCORES = ScoreSet((0.0, 1.0, 2.0, 3.0))


def random_downward(rng, scoreset):
    m = np.tril(rng.uniform(0.05, 1.0, (scoreset.size, scoreset.size)))
    return Transition.from_matrix(scoreset, scoreset, m / m.sum(axis=1, keepdims=True))


def random_monotone(rng, scoreset):
    """Rows with CDFs decreasing down the matrix."""
    n = scoreset.size
    cdfs = np.sort(rng.uniform(size=(n, n)), axis=1)
    cdfs[:, -1] = 1.0
    cdfs = -np.sort(-cdfs, axis=0)
    weights = np.diff(np.concatenate((np.zeros((n, 1)), cdfs), axis=1), axis=1)
    return Transition.from_matrix(scoreset, scoreset, weights)


class TestMeasures:

    def test_rejects_bad_weights(self):
        with pytest.raises(InvalidMeasure):
            Measure(SCORES, [0.5, 0.5, 0.5, -0.5])
        with pytest.raises(InvalidMeasure):
            Measure(SCORES, [0.5, 0.5])
        with pytest.raises(ValueError):
            ScoreSet((1.0, 0.0))

    def test_binary_measure(self):
        mu = Measure.binary(0.25)
        assert mu.pass_rate == 0.25
        np.testing.assert_allclose(mu.cdf(), [0.75, 1.0])

    def test_mismatched_score_sets(self):
        with pytest.raises(ScoreSetMismatch):
            fosd_geq(Measure.binary(0.5), Measure.point_mass(SCORES, 3.0))


class TestQuantileMatching:

    def test_perfect_test_to_half(self):
        k = fq_compose(Measure.binary(1.0), Measure.binary(0.5))
        np.testing.assert_allclose(k.matrix, [[1.0, 0.0], [0.5, 0.5]])

    def test_quarter_to_half(self):
        k = fq_compose(Measure.binary(0.25), Measure.binary(0.5))
        np.testing.assert_allclose(k.matrix, [[2.0 / 3.0, 1.0 / 3.0], [0.0, 1.0]], atol=1e-15)

    def test_null_top_score_maps_to_top(self):
        k = fq_compose(Measure.binary(0.0), Measure.binary(0.5))
        np.testing.assert_allclose(k.matrix[1], [0.0, 1.0])

    def test_push_recovers_target(self, rng, make_measure):
        for _ in range(N_TRIALS):
            mu = make_measure(SCORES, sparse=True)
            nu = make_measure(SCORES, sparse=True)
            np.testing.assert_allclose(push(mu, fq_compose(mu, nu)).array, nu.array, atol=1e-12)

    def test_unit_interval_images(self, make_measure):
        for _ in range(200):
            mu = make_measure(SCORES, sparse=True)
            assert segments_are_uniform(distribution_transition(mu).push(mu))
            np.testing.assert_allclose(quantile_transition(mu).push_uniform().array, mu.array,
                                       atol=1e-12)

    def test_quantile_of_one_is_top(self):
        q = quantile_transition(Measure(SCORES, [0.5, 0.5, 0.0, 0.0]))
        assert q.quantile(0.5) == 0.0
        assert q.quantile(1.0) == 3.0


class TestDownwardTransitions:

    def test_dominance_iff_downward_quantile_matching(self, make_measure):
        for _ in range(N_TRIALS):
            mu = make_measure(SCORES)
            nu = make_measure(SCORES)
            assert fosd_geq(mu, nu) == is_downward(fq_compose(mu, nu))

    def test_downward_images_are_dominated(self, rng, make_measure):
        for _ in range(N_TRIALS):
            mu = make_measure(SCORES)
            d = random_downward(rng, SCORES)
            nu = push(mu, d)
            assert is_downward(d)
            assert fosd_geq(mu, nu)
            assert is_downward(fq_compose(mu, nu))


class TestMonotoneTransitions:

    def test_monotone_preserves_dominance(self, rng, make_measure):
        for _ in range(N_TRIALS):
            mu = make_measure(SCORES)
            nu = push(mu, random_downward(rng, SCORES))
            k = random_monotone(rng, SCORES)
            assert is_monotone(k)
            assert fosd_geq(push(mu, k), push(nu, k))

    def test_closed_under_composition(self, rng):
        for _ in range(N_TRIALS):
            k1 = random_monotone(rng, SCORES)
            k2 = random_monotone(rng, SCORES)
            assert is_monotone(compose(k1, k2))

    def test_identity_and_constant(self, make_measure):
        nu = make_measure(SCORES)
        assert is_monotone(Transition.identity(SCORES))
        assert is_monotone(Transition.constant(SCORES, nu))
        assert not is_downward(Transition.constant(SCORES, Measure.point_mass(SCORES, 3.0)))

    def test_mix_is_convex_combination(self, rng):
        a = random_monotone(rng, SCORES)
        b = random_monotone(rng, SCORES)
        np.testing.assert_allclose(a.mix(0.25, b).matrix, 0.25 * a.matrix + 0.75 * b.matrix)
