"""
Tests for discernment orders and most-discerning testing functions
"""
import numpy as np
import pytest

from discernment import (PassageMatrix, binary_conversion, check_discerning, check_equivalent,
                         interval_environment, most_discerning_function, most_discerning_tests,
                         relation_table, retarget_tests, verify_conversion)
from errors import NotMostDiscerning, UnknownLabel
from figure_tables import tangent_environment, scaled_environment
from finite_markov import compose, fq_compose, is_monotone
from ic_harness import exhaustive_deviation_search
from profiles import FiniteProfile, induced_scf, passage_array


def holds(env, theta, tau, psi, **kw):
    return check_discerning(env, theta, tau, psi, **kw).holds


class TestGreenLaffont:

    def test_order_at_theta1(self, gl_env):
        assert holds(gl_env, "theta1", "tau1", "tau2")
        assert not holds(gl_env, "theta1", "tau2", "tau1")
        assert holds(gl_env, "theta1", "tau2", "tau3")
        assert not holds(gl_env, "theta1", "tau3", "tau2")

    def test_incomparable_at_theta2(self, gl_env):
        assert not holds(gl_env, "theta2", "tau2", "tau3")
        assert not holds(gl_env, "theta2", "tau3", "tau2")

    def test_order_at_theta3(self, gl_env):
        assert holds(gl_env, "theta3", "tau3", "tau2")
        assert not holds(gl_env, "theta3", "tau2", "tau3")
        assert check_equivalent(gl_env, "theta3", "tau1", "tau2")
        assert not check_equivalent(gl_env, "theta3", "tau1", "tau3")

    def test_most_discerning_sets(self, gl_env):
        assert most_discerning_tests(gl_env, "theta1") == ("tau1",)
        assert most_discerning_tests(gl_env, "theta2") == ()
        assert most_discerning_tests(gl_env, "theta3") == ("tau3",)
        selection = most_discerning_function(gl_env)
        assert not selection.exists
        assert selection.failing == ("theta2",)

    def test_relation_table_is_complete(self, gl_env):
        rows = relation_table(gl_env, threads=2)
        assert len(rows) == 27
        reflexive = [r for r in rows if r["tau"] == r["psi"]]
        assert all(r["holds"] for r in reflexive)

    def test_unknown_label(self, gl_env):
        with pytest.raises(UnknownLabel):
            check_discerning(gl_env, "theta9", "tau1", "tau2")


class TestBinaryCharacterization:

    def test_lambda_segment_matches_linear_program(self, rng):
        types = ("a", "b", "c")
        checked = 0
        for _ in range(500):
            rates = {"tau": rng.uniform(0.0, 1.0, 3), "psi": rng.uniform(0.0, 1.0, 3)}
            env = PassageMatrix.from_rates(types, ("tau", "psi"), rates)
            binary = check_discerning(env, "a", "tau", "psi", method="binary")
            lp = check_discerning(env, "a", "tau", "psi", method="lp")
            assert binary.holds == lp.holds
            if binary.holds:
                np.testing.assert_allclose(lp.lambda_interval, binary.lambda_interval, atol=1e-9)
                checked += 1
        assert checked > 0

    def test_enumerated_conversions_form_the_lambda_segment(self, rng):
        grid = np.linspace(0.0, 1.0, 2001)
        checked = 0
        for _ in range(500):
            tau, psi = rng.uniform(0.0, 1.0, 3), rng.uniform(0.0, 1.0, 3)
            env = PassageMatrix.from_rates(("a", "b", "c"), ("tau", "psi"),
                                           {"tau": tau, "psi": psi})
            p, q = tau[0], psi[0]
            # k = [[1 - x, x], [1 - y, y]] with (1 - p) x + p y = q, swept along x and along y
            x = np.concatenate([grid, (q - p * grid) / (1.0 - p)])
            y = np.concatenate([(q - (1.0 - p) * grid) / p, grid])
            monotone = (x >= 0.0) & (x <= 1.0) & (y >= 0.0) & (y <= 1.0) & (y >= x)
            x, y = x[monotone], y[monotone]
            converted = (1.0 - tau[:, None]) * x + tau[:, None] * y
            valid = np.all(converted <= psi[:, None] + 1e-12, axis=0)

            mu, nu = env.measure("tau", "a"), env.measure("psi", "a")
            matching = fq_compose(mu, nu).matrix
            full_spread = matching[1, 1] - matching[0, 1]
            if full_spread < 1e-6:
                continue
            lam = (y - x) / full_spread
            witness = check_discerning(env, "a", "tau", "psi", method="binary")
            if not witness.holds:
                assert not np.any(valid)
                continue
            lo, hi = witness.lambda_interval
            assert np.all(lam[valid] >= lo - 1e-9)
            assert np.all(lam[valid] <= hi + 1e-9)
            assert np.all(valid[(lam > lo + 1e-6) & (lam < hi - 1e-6)])
            for end in (lo, hi):
                assert verify_conversion(env, "a", "tau", "psi", binary_conversion(mu, nu, end),
                                         tol=1e-9)
            checked += 1
        assert checked > 20

    def test_segment_points_are_conversions(self, rng):
        types = ("a", "b", "c")
        for _ in range(200):
            rates = {"tau": rng.uniform(0.0, 1.0, 3), "psi": rng.uniform(0.0, 1.0, 3)}
            env = PassageMatrix.from_rates(types, ("tau", "psi"), rates)
            witness = check_discerning(env, "a", "tau", "psi")
            if not witness.holds:
                continue
            mu, nu = env.measure("tau", "a"), env.measure("psi", "a")
            lo, hi = witness.lambda_interval
            for lam in (lo, hi, rng.uniform(lo, hi)):
                assert verify_conversion(env, "a", "tau", "psi", binary_conversion(mu, nu, lam))
            if hi < 1.0 - 1e-6:
                k = binary_conversion(mu, nu, min(hi + 1e-3, 1.0))
                assert not verify_conversion(env, "a", "tau", "psi", k, tol=1e-12)

    def test_transitivity_by_composition(self, rng):
        types = ("a", "b", "c")
        found = 0
        for _ in range(300):
            rates = {name: rng.uniform(0.0, 1.0, 3) for name in ("t1", "t2", "t3")}
            env = PassageMatrix.from_rates(types, ("t1", "t2", "t3"), rates)
            first = check_discerning(env, "a", "t1", "t2")
            second = check_discerning(env, "a", "t2", "t3")
            if first.holds and second.holds:
                k = compose(first.conversion, second.conversion)
                assert verify_conversion(env, "a", "t1", "t3", k)
                assert holds(env, "a", "t1", "t3")
                found += 1
        assert found > 0


class TestNonbinaryTests:

    def test_three_score_linear_program(self):
        scores = (0, 1, 2)
        weights = {
            "sharp": [[0.8, 0.2, 0.0], [0.2, 0.6, 0.2], [0.0, 0.2, 0.8]],
            "blurred": [[0.5, 0.3, 0.2], [0.3, 0.4, 0.3], [0.2, 0.3, 0.5]],
        }
        env = PassageMatrix.from_weights(("low", "mid", "high"), ("sharp", "blurred"),
                                         scores, weights)
        witness = check_discerning(env, "high", "sharp", "sharp")
        assert witness.holds and witness.method == "lp"
        assert np.allclose(witness.conversion.matrix, np.eye(3), atol=1e-8) or \
            verify_conversion(env, "high", "sharp", "sharp", witness.conversion, tol=1e-9)
        result = check_discerning(env, "high", "sharp", "blurred")
        if result.holds:
            assert verify_conversion(env, "high", "sharp", "blurred", result.conversion, tol=1e-8)

    def test_garbled_test_is_dominated(self):
        sharp = np.array([[0.7, 0.2, 0.1], [0.2, 0.5, 0.3], [0.1, 0.2, 0.7]])
        garbling = np.array([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
        env = PassageMatrix.from_weights(("low", "mid", "high"), ("sharp", "garbled"),
                                         (0, 1, 2), {"sharp": sharp, "garbled": sharp @ garbling})
        for theta in env.types:
            witness = check_discerning(env, theta, "sharp", "garbled")
            assert witness.holds and witness.method == "lp"
            assert is_monotone(witness.conversion)
            np.testing.assert_allclose(env.measure("sharp", theta).array @ witness.conversion.matrix,
                                       env.measure("garbled", theta).array, atol=1e-8)
            assert verify_conversion(env, theta, "sharp", "garbled", witness.conversion, tol=1e-8)

    def test_uninformative_test_cannot_discern(self):
        blind = [[0.3, 0.4, 0.3]] * 3
        informative = [[0.6, 0.3, 0.1], [0.3, 0.4, 0.3], [0.1, 0.2, 0.7]]
        env = PassageMatrix.from_weights(("low", "mid", "high"), ("blind", "informative"),
                                         (0, 1, 2), {"blind": blind, "informative": informative})
        witness = check_discerning(env, "high", "blind", "informative")
        assert not witness.holds
        assert witness.method == "lp"
        assert witness.conversion is None
        assert check_discerning(env, "high", "informative", "blind").holds

    def test_binary_method_needs_binary_scores(self):
        env = PassageMatrix.from_weights(("x", "y"), ("t",), (0, 1, 2),
                                         {"t": [[0.2, 0.3, 0.5], [0.5, 0.3, 0.2]]})
        with pytest.raises(ValueError):
            check_discerning(env, "x", "t", "t", method="binary")


class TestIntervalInstances:

    def test_tangent_curves_pin_lambda(self):
        env, focal = tangent_environment(51)
        witness = check_discerning(env, focal, "tau", "psi")
        assert witness.holds
        lo, hi = witness.lambda_interval
        assert hi - lo < 1e-6
        assert lo == pytest.approx(0.5, abs=1e-6)

    def test_hard_and_scaled_tests(self):
        env, focal = scaled_environment(51)
        psi2 = check_discerning(env, focal, "tau", "psi2")
        assert psi2.holds
        assert psi2.lambda_interval[0] == pytest.approx(6.0 / 7.0, abs=1e-6)
        assert psi2.lambda_interval[1] == pytest.approx(1.0)
        assert holds(env, focal, "psi1", "psi2")
        assert not holds(env, focal, "psi2", "psi1")
        assert not holds(env, focal, "tau", "psi1")

    def test_interval_environment_labels(self):
        env, focal = interval_environment(0.0, 1.0, 11, {"t": lambda x: x}, refine_at=0.5)
        assert focal == "0.5"
        assert len(env.types) == 13
        assert env.rate("t", focal) == pytest.approx(0.5)


class TestRetargeting:

    def test_retarget_preserves_social_choice(self):
        env = PassageMatrix.from_rates(("lo", "hi"), ("tau_lo", "tau_hi"),
                                       {"tau_lo": [1.0, 0.3], "tau_hi": [0.6, 1.0]})
        tdhat = most_discerning_function(env).selection
        assert tdhat == {"lo": "tau_lo", "hi": "tau_hi"}
        testing = np.array([[0.5, 0.5], [0.5, 0.5]])
        decision = np.zeros((2, 2, 2, 2))
        decision[..., 0, 0] = 1.0
        decision[..., 1, 1] = 1.0
        utility = np.array([[0.0, 0.0], [1.0, 1.0]])
        profile = FiniteProfile.canonical(env, ("reject", "accept"), testing, decision, utility)
        retargeted = retarget_tests(env, profile, tdhat)
        for m, theta in enumerate(env.types):
            assert retargeted.testing[m, env.test_index(tdhat[theta])] == 1.0
        np.testing.assert_allclose(induced_scf(retargeted), induced_scf(profile), atol=1e-10)

    def test_retargeting_keeps_incentive_compatibility(self, rng):
        env = PassageMatrix.from_rates(("lo", "hi"), ("tau_lo", "tau_hi"),
                                       {"tau_lo": [1.0, 0.3], "tau_hi": [0.6, 1.0]})
        tdhat = most_discerning_function(env).selection
        for _ in range(200):
            # report-independent rules that reward passing are incentive compatible
            testing = np.tile(rng.dirichlet(np.ones(2)), (2, 1))
            accept = np.sort(rng.uniform(0.0, 1.0, (2, 2)), axis=1)
            decision = np.zeros((2, 2, 2, 2))
            decision[..., 1] = accept
            decision[..., 0] = 1.0 - accept
            utility = np.vstack([np.zeros(2), rng.uniform(0.0, 1.0, 2)])
            profile = FiniteProfile.canonical(env, ("reject", "accept"), testing, decision, utility)
            assert exhaustive_deviation_search(profile).is_ic()

            retargeted = retarget_tests(env, profile, tdhat)
            np.testing.assert_allclose(induced_scf(retargeted), induced_scf(profile), atol=1e-10)
            assert exhaustive_deviation_search(retargeted).is_ic()

    def test_retarget_rejects_weaker_test(self, gl_env):
        testing = np.full((3, 3), 1.0 / 3.0)
        decision = np.zeros((3, 3, 2, 2))
        decision[..., 0] = 1.0
        utility = np.zeros((2, 3))
        profile = FiniteProfile.canonical(gl_env, ("x", "y"), testing, decision, utility)
        with pytest.raises(NotMostDiscerning):
            retarget_tests(gl_env, profile, {"theta1": "tau3", "theta2": "tau2",
                                             "theta3": "tau3"})

    def test_passage_array_layout(self, gl_env):
        arr = passage_array(gl_env)
        assert arr.shape == (3, 3, 2)
        assert arr[0, 0, 1] == 1.0 and arr[2, 0, 1] == 0.0
