"""
Tests for the incentive-compatibility harness and profile canonicalization
"""
import numpy as np
import pytest

from authentication import FiniteAuthRate
from continuous_model import PrecisionKernel
from figure_tables import GL_TYPES, green_laffont_untruthful_profile
from ic_harness import (canonicalize, check_ic, check_interim_ic, check_schedule,
                        exhaustive_deviation_search, grid_report, random_profile)
from mechanisms import solve_single_good
from profiles import FiniteProfile, induced_scf, passage_array


def gl_truthful_profile(gl_env):
    """Allocates only to a θ2 report that passes τ2, which θ1 can mimic."""
    decision = np.zeros((3, 3, 2, 2))
    decision[..., 0] = 1.0
    decision[1, 1, 1] = (0.0, 1.0)
    utility = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    performance = np.broadcast_to(passage_array(gl_env)[:, None], (3, 3, 3, 2))
    return FiniteProfile(gl_env, GL_TYPES, ("keep", "allocate"), np.eye(3), np.eye(3),
                         performance, decision, utility)


class TestGridReport:

    def test_finds_profitable_misreport(self):
        report = grid_report([0.0, 0.5, 1.0], [0.0, 1.0, 1.0], [0.0, 0.5, 0.9], np.ones((3, 3)))
        assert report.max_ic_violation == pytest.approx(0.4)
        assert report.worst_pair == (1.0, 0.5)
        assert report.shirking_pairs == 3
        assert not report.passes()

    def test_authentication_blocks_misreport(self):
        alpha = np.eye(3)
        report = grid_report([0.0, 0.5, 1.0], [0.0, 1.0, 1.0], [0.0, 0.5, 0.9], alpha)
        assert report.max_ic_violation == 0.0
        assert report.worst_pair is None
        assert report.passes()

    def test_participation_violation(self):
        report = grid_report([0.0, 1.0], [1.0, 1.0], [0.2, 0.2], np.eye(2))
        assert report.max_ir_violation == pytest.approx(0.2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            grid_report([0.0, 1.0], [1.0], [0.0, 0.0], np.eye(2))


class TestSolvedMechanisms:

    def test_check_ic_on_a_finer_grid(self, uniform):
        kernel = PrecisionKernel.constant(1.0)
        mech = solve_single_good(uniform, kernel, grid_n=101)
        report = check_ic(mech, kernel.as_alpha(), grid=np.linspace(0.0, 1.0, 57))
        assert report.grid_size == 57
        assert report.max_ir_violation <= 1e-6

    def test_schedule_with_finite_rate(self):
        grid = np.array([0.0, 0.5, 1.0])
        alpha = FiniteAuthRate(("0", "0.5", "1"), np.ones((3, 3)))
        report = check_schedule(grid, [0.0, 1.0, 1.0], [0.0, 0.5, 0.5], alpha)
        assert report.passes()
        with pytest.raises(ValueError):
            check_schedule(grid[:2], [0.0, 1.0], [0.0, 0.5], alpha)

    def test_ex_post_participation(self):
        grid = np.array([0.0, 0.5, 1.0])
        report = check_interim_ic([grid], [np.array([0.0, 0.5, 0.5])],
                                  [np.array([0.0, 0.3, 0.3])], [np.eye(3)])
        assert report.max_ir_violation == pytest.approx(0.1)
        assert report.worst_agent == 0
        assert len(report.to_record()["agents"]) == 1

    def test_raw_alpha_matrix(self):
        grid = np.array([0.0, 0.5, 1.0])
        report = check_schedule(grid, [0.0, 1.0, 1.0], [0.0, 0.5, 0.9], np.ones((3, 3)))
        assert report.max_ic_violation == pytest.approx(0.4)
        assert check_schedule(grid, [0.0, 1.0, 1.0], [0.0, 0.5, 0.9], np.eye(3)).passes()
        with pytest.raises(ValueError):
            check_schedule(grid, [0.0, 1.0, 1.0], [0.0, 0.5, 0.9], np.eye(2))


class TestGreenLaffontProfile:

    def test_untruthful_profile_is_incentive_compatible(self):
        profile = green_laffont_untruthful_profile()
        search = exhaustive_deviation_search(profile)
        assert search.is_ic()
        np.testing.assert_allclose(search.equilibrium, [0.0, 1.0, 1.0])

    def test_canonical_form_keeps_the_outcome(self):
        profile = green_laffont_untruthful_profile()
        canonical, report = canonicalize(profile)
        assert canonical.is_canonical
        assert report.scf_preserved and report.canonical_ic
        assert not report.notes
        tests = [canonical.tests[int(np.argmax(row))] for row in canonical.testing]
        assert tests == ["tau1", "tau3", "tau3"]
        np.testing.assert_allclose(induced_scf(canonical), induced_scf(profile), atol=1e-10)

    def test_mimicry_is_detected(self, gl_env):
        profile = gl_truthful_profile(gl_env)
        search = exhaustive_deviation_search(profile)
        assert not search.is_ic()
        assert search.max_gain == pytest.approx(1.0)
        assert search.best_messages[0] == "theta2"
        _, report = canonicalize(profile)
        assert not report.original_ic
        assert report.notes


class TestRevelationPrinciple:

    def test_random_profiles_canonicalize(self, rng):
        for _ in range(100):
            profile = random_profile(rng)
            assert exhaustive_deviation_search(profile).is_ic()
            canonical, report = canonicalize(profile)
            assert report.scf_preserved
            assert report.canonical_ic
            assert canonical.is_canonical

    def test_larger_profiles(self, rng):
        for _ in range(20):
            profile = random_profile(rng, n_types=4, n_messages=2, n_tests=2, n_decisions=3)
            _, report = canonicalize(profile)
            assert report.scf_preserved and report.canonical_ic
