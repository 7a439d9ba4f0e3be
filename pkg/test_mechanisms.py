"""
Tests for the pricing, single-good and auction solvers
"""
import numpy as np
import pytest
from scipy.integrate import trapezoid

from continuous_model import ContinuousAuthRate, PrecisionKernel, TypeDistribution
from errors import IroningRequired
from ic_harness import check_auction_ic, check_ic
from mechanisms import (CANDIDATE, OPTIMAL, PRICING, SALE, CostFunction, lambda_sweep,
                        solve_auction, solve_nonlinear_pricing, solve_single_good)

FLAT = ContinuousAuthRate(0.0, 1.0, lambda report, true_type: np.ones(np.shape(report)), name="flat")


class TestSingleGood:

    def test_myerson_benchmark(self, uniform):
        mech = solve_single_good(uniform, PrecisionKernel.constant(0.0), grid_n=101)
        assert mech.theta_star == pytest.approx(0.5, abs=1e-9)
        assert mech.revenue == pytest.approx(0.25, abs=1e-8)
        assert mech.status == OPTIMAL
        assert mech.diagnostics["t_increasing"]
        assert mech.diagnostics["t_below_theta"]

    def test_reserve_solves_closed_form(self, uniform):
        mech = solve_single_good(uniform, PrecisionKernel.constant(1.0), grid_n=101)
        theta = mech.theta_star
        assert theta - 1.0 + np.exp(theta - 1.0) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_sale_is_incentive_compatible(self, uniform, hump, lam):
        kernel = PrecisionKernel.constant(lam)
        for dist in (uniform, hump):
            mech = solve_single_good(dist, kernel, grid_n=201)
            report = check_ic(mech, kernel.as_alpha())
            assert report.max_ic_violation <= 1e-6
            assert report.max_ir_violation <= 1e-6

    def test_point_type(self):
        mech = solve_single_good(TypeDistribution.point(0.4), PrecisionKernel.constant(1.0, 0.4, 0.4))
        assert mech.revenue == pytest.approx(0.4)
        assert mech.theta_star == 0.4

    def test_ironing_is_refused(self):
        bimodal = TypeDistribution.tabulated([0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
                                             [2.0, 0.05, 0.05, 2.0, 0.05, 0.05])
        with pytest.raises(IroningRequired):
            solve_single_good(bimodal, PrecisionKernel.constant(0.0), grid_n=51)

    def test_flat_rate_breaks_the_sale(self, uniform):
        kernel = PrecisionKernel.constant(2.0)
        mech = solve_single_good(uniform, kernel, grid_n=201, alpha=FLAT)
        assert mech.status == CANDIDATE
        assert mech.diagnostics["upper_bound_violation"] > 0.1
        assert check_ic(mech, FLAT).max_ic_violation == pytest.approx(0.278, abs=0.01)
        assert check_ic(mech, kernel.as_alpha()).passes()

    def test_coarse_grid_is_rejected(self, uniform):
        with pytest.raises(ValueError):
            solve_single_good(uniform, PrecisionKernel.constant(1.0), grid_n=11)


class TestNonlinearPricing:

    def test_myerson_benchmark(self, uniform):
        mech = solve_nonlinear_pricing(uniform, PrecisionKernel.constant(0.0),
                                       CostFunction.quadratic(), grid_n=101)
        assert mech.revenue == pytest.approx(1.0 / 12.0, abs=1e-4)
        np.testing.assert_allclose(mech.q, np.maximum(2.0 * mech.grid - 1.0, 0.0), atol=1e-6)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_pricing_is_incentive_compatible(self, uniform, hump, lam):
        kernel = PrecisionKernel.constant(lam)
        for dist in (uniform, hump):
            mech = solve_nonlinear_pricing(dist, kernel, CostFunction.quadratic(), grid_n=201)
            report = check_ic(mech, kernel.as_alpha())
            assert report.passes()
            assert mech.status in (OPTIMAL, CANDIDATE)

    def test_revenue_decomposition(self, uniform):
        cost = CostFunction.quadratic()
        mech = solve_nonlinear_pricing(uniform, PrecisionKernel.constant(1.0), cost, grid_n=201)
        density = uniform.pdf(mech.grid)
        surplus = trapezoid((mech.grid * mech.q - cost(mech.q)) * density, mech.grid)
        rent = trapezoid(mech.U * density, mech.grid)
        assert mech.revenue == pytest.approx(surplus - rent, abs=1e-12)
        virtual = trapezoid((mech.phi * mech.q - cost(mech.q)) * density, mech.grid)
        assert mech.revenue == pytest.approx(virtual, abs=1e-3)

    def test_utility_starts_at_zero(self, uniform):
        mech = solve_nonlinear_pricing(uniform, PrecisionKernel.constant(1.0),
                                       CostFunction.quadratic(), grid_n=101)
        assert mech.U[0] == 0.0
        assert np.all(np.diff(mech.q) >= -1e-12)


class TestLambdaSweep:

    def test_precision_raises_revenue(self, uniform):
        rows = lambda_sweep(uniform, [3.0, 0.0, 1.0, 2.0], kind=SALE, grid_n=101)
        assert [r["lambda"] for r in rows] == [0.0, 1.0, 2.0, 3.0]
        revenues = [r["revenue"] for r in rows]
        reserves = [r["theta_star"] for r in rows]
        assert all(b >= a - 1e-9 for a, b in zip(revenues, revenues[1:]))
        assert all(b <= a + 1e-9 for a, b in zip(reserves, reserves[1:]))

    def test_precision_raises_pricing_revenue(self, uniform):
        rows = lambda_sweep(uniform, [0.0, 1.0, 2.0, 3.0], kind=PRICING, grid_n=101)
        revenues = [r["revenue"] for r in rows]
        assert revenues[0] == pytest.approx(1.0 / 12.0, abs=1e-4)
        assert all(b >= a - 1e-9 for a, b in zip(revenues, revenues[1:]))
        assert all(r["theta_star"] is None for r in rows)

    def test_unknown_kind(self, uniform):
        with pytest.raises(ValueError):
            lambda_sweep(uniform, [1.0], kind="barter")


class TestAuction:

    def test_symmetric_myerson_revenue(self, uniform):
        sol = solve_auction([uniform, uniform], [PrecisionKernel.constant(0.0)] * 2, grid_n=201)
        assert sol.revenue == pytest.approx(5.0 / 12.0, abs=1e-3)
        assert sol.reserves == pytest.approx([0.5, 0.5], abs=1e-9)
        assert check_auction_ic(sol).passes(tol=1e-5)

    def test_allocation_and_ties(self, uniform):
        sol = solve_auction([uniform, uniform], [PrecisionKernel.constant(0.0)] * 2, grid_n=101)
        assert sol.allocate([0.9, 0.7]) == 0
        assert sol.allocate([0.6, 0.6]) == 0
        assert sol.allocate([0.2, 0.3]) is None
        payments = sol.transfers([0.9, 0.7])
        assert payments[1] == 0.0
        assert 0.5 <= payments[0] <= 0.9

    def test_precise_agent_wins_more(self, uniform):
        kernels = [PrecisionKernel.constant(0.0), PrecisionKernel.constant(2.0)]
        sol = solve_auction([uniform, uniform], kernels, grid_n=101)
        counts = sol.win_counts()
        assert counts["wins"][1] > counts["wins"][0]
        assert sol.reserves[1] < sol.reserves[0]
        assert check_auction_ic(sol).max_ic_violation <= 1e-5

    def test_single_agent_is_a_sale(self, uniform):
        kernel = PrecisionKernel.constant(1.0)
        sol = solve_auction([uniform], [kernel], grid_n=101)
        mech = solve_single_good(uniform, kernel, grid_n=101)
        assert sol.reserves[0] == pytest.approx(mech.theta_star, abs=1e-12)
        np.testing.assert_allclose(sol.interim_q[0], mech.q)
        assert sol.revenue == pytest.approx(mech.revenue, abs=1e-9)
        assert sol.status == OPTIMAL

    def test_upper_bound_is_checked_per_agent(self, uniform):
        kernel = PrecisionKernel.constant(2.0)
        sol = solve_auction([uniform, uniform], [kernel, kernel], grid_n=101,
                            alphas=[FLAT, kernel.as_alpha()])
        assert sol.status == CANDIDATE
        assert sol.diagnostics[0]["upper_bound_violation"] > 0.1
        assert sol.diagnostics[1]["upper_bound_violation"] <= 1e-6
        assert sol.warnings[0].startswith("agent 0")
        summary = sol.to_summary()
        assert summary["status"] == CANDIDATE
        assert summary["agents"][0]["upper_bound_violation"] > 0.1

    def test_exponential_rates_keep_the_auction_optimal(self, uniform):
        kernel = PrecisionKernel.constant(2.0)
        sol = solve_auction([uniform, uniform], [kernel, kernel], grid_n=101)
        assert sol.status == OPTIMAL
        assert not sol.warnings

    def test_needs_matching_kernels(self, uniform):
        with pytest.raises(ValueError):
            solve_auction([uniform, uniform], [PrecisionKernel.constant(0.0)])


class TestCostFunction:

    def test_quadratic_inverse(self):
        cost = CostFunction.quadratic(2.0)
        assert cost.inverse(1.0) == pytest.approx(0.5)
        assert cost.inverse(-1.0) == 0.0

    def test_root_found_inverse(self):
        cost = CostFunction(lambda q: q ** 3 / 3.0, lambda q: q ** 2)
        assert cost.inverse(4.0) == pytest.approx(2.0, abs=1e-9)

    def test_rejects_bad_costs(self):
        with pytest.raises(ValueError):
            CostFunction(lambda q: q, lambda q: np.ones(np.shape(q)))
        with pytest.raises(ValueError):
            CostFunction.power(1.0, 1.0)
