"""
Mechanism Solver for Veritest
Handles nonlinear pricing, single-good sales and auctions under partial verification
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

import config
from continuous_model import (PrecisionKernel, check_bounds, integrate, myerson_virtual_value,
                              spike_points, virtual_value, virtual_value_curve)
from errors import IroningRequired

logger = logging.getLogger(__name__)

PRICING = "pricing"
SALE = "sale"
AUCTION = "auction"

OPTIMAL = "optimal"
CANDIDATE = "candidate"


class CostFunction:
    """Production cost c(q) with c(0) = c'(0) = 0 and c' strictly increasing."""

    def __init__(self, cost, marginal, inverse_marginal=None, name="custom", params=None,
                 validate=True):
        self._cost = cost
        self._marginal = marginal
        self._inverse = inverse_marginal
        self.name = name
        self.params = dict(params or {})
        if validate:
            self.validate()

    @classmethod
    def quadratic(cls, scale=1.0):
        """c(q) = scale q² / 2."""
        scale = float(scale)
        if scale <= 0.0:
            raise ValueError("cost scale must be positive")
        return cls(lambda q: 0.5 * scale * np.square(q), lambda q: scale * np.asarray(q),
                   lambda y: np.asarray(y) / scale, name="quadratic", params={"scale": scale})

    @classmethod
    def power(cls, scale=1.0, exponent=2.0):
        """c(q) = scale q^e / e with e > 1."""
        scale, exponent = float(scale), float(exponent)
        if scale <= 0.0 or exponent <= 1.0:
            raise ValueError("power cost needs scale > 0 and exponent > 1")
        return cls(lambda q: scale * np.power(q, exponent) / exponent,
                   lambda q: scale * np.power(q, exponent - 1.0),
                   lambda y: np.power(np.asarray(y) / scale, 1.0 / (exponent - 1.0)),
                   name="power", params={"scale": scale, "exponent": exponent})

    def __call__(self, q):
        return self._cost(np.asarray(q, dtype=float))

    def marginal(self, q):
        return self._marginal(np.asarray(q, dtype=float))

    def inverse(self, y):
        """(c')⁻¹(y) for y >= 0, root-found when no closed form is given."""
        y = float(y)
        if y <= 0.0:
            return 0.0
        if self._inverse is not None:
            return float(self._inverse(y))
        upper = 1.0
        while float(self.marginal(upper)) < y:
            upper *= 2.0
        return brentq(lambda q: float(self.marginal(q)) - y, 0.0, upper, xtol=config.ROOT_XTOL)

    def inverse_array(self, values):
        return np.array([self.inverse(v) for v in np.asarray(values, dtype=float)])

    def validate(self):
        if abs(float(self(0.0))) > config.ALGEBRA_TOL or abs(float(self.marginal(0.0))) > config.ALGEBRA_TOL:
            raise ValueError("cost must satisfy c(0) = c'(0) = 0")
        marginal = np.asarray(self.marginal(np.linspace(0.0, 10.0, 101)), dtype=float)
        if np.any(np.diff(marginal) <= 0.0):
            raise ValueError("marginal cost must be strictly increasing")

    def to_record(self):
        return {"cost": self.name, **self.params}


@dataclass(eq=False)
class SolvedMechanism:
    """Allocation q, transfer t and utility U = θq - t on a type grid."""

    kind: str
    grid: np.ndarray
    q: np.ndarray
    t: np.ndarray
    U: np.ndarray
    phi: np.ndarray
    phi_myerson: np.ndarray
    revenue: float
    theta_star: float = None
    status: str = OPTIMAL
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    allocation: object = None

    @property
    def phi_increasing(self):
        return _is_increasing(self.phi)

    def quantity(self, theta):
        if self.allocation is not None:
            return self.allocation(theta)
        return np.interp(theta, self.grid, self.q)

    def transfer(self, theta):
        return np.interp(theta, self.grid, self.t)

    def rows(self):
        """Rows matching config.MECHANISM_COLUMNS."""
        return [list(row) for row in zip(self.grid, self.q, self.t, self.U,
                                         self.phi, self.phi_myerson)]

    def to_summary(self):
        return {
            "kind": self.kind,
            "status": self.status,
            "revenue": float(self.revenue),
            "theta_star": None if self.theta_star is None else float(self.theta_star),
            "grid_n": int(self.grid.size),
            "phi_increasing": self.phi_increasing,
            "warnings": list(self.warnings),
            "diagnostics": dict(self.diagnostics),
        }


def utility_envelope(grid, q, kernel, breaks=()):
    """U(θ) = ∫_lo^θ Λ(z|θ) q(z) dz on the grid, one quadrature per cell.

    q is either an array on the grid (interpolated linearly) or a callable.
    """
    grid = np.asarray(grid, dtype=float)
    if callable(q):
        q_fn = q
        sampled = np.asarray(q(grid), dtype=float)
    else:
        sampled = np.asarray(q, dtype=float)
        if sampled.shape != grid.shape:
            raise ValueError("allocation must have one value per grid point")
        q_fn = lambda z: np.interp(z, grid, sampled)  # noqa: E731
    if np.any(sampled < 0.0):
        raise ValueError("allocation must be nonnegative")

    utility = np.zeros(grid.size)
    for k in range(1, grid.size):
        a, b = grid[k - 1], grid[k]

        def integrand(z, b=b):
            return float(kernel.Lambda(z, b)) * float(q_fn(z))

        carried = float(kernel.Lambda(a, b)) * utility[k - 1]
        cell = integrate(integrand, a, b, spike_points(b, a, kernel.lambda_max, breaks))
        utility[k] = carried + cell
    return utility


def solve_nonlinear_pricing(dist, kernel, cost, grid_n=config.DEFAULT_GRID_N, alpha=None,
                            threads=1):
    """q* = (c')⁻¹(φ₊), t* = θq* - U with the minimal envelope U."""
    if dist.is_point:
        return _point_pricing(dist, cost)
    _check_grid(grid_n)
    grid = dist.grid(grid_n)
    phi = virtual_value_curve(dist, kernel, grid, threads)
    _require_increasing(phi, grid)
    q = cost.inverse_array(np.maximum(phi, 0.0))
    utility = utility_envelope(grid, q, kernel)
    transfer = grid * q - utility
    revenue = float(trapezoid((transfer - cost(q)) * dist.pdf(grid), grid))
    mech = SolvedMechanism(PRICING, grid, q, transfer, utility, phi,
                           np.asarray(myerson_virtual_value(dist, grid)), revenue)
    logger.info("nonlinear pricing on %d points: revenue %.10g", grid.size, revenue)
    return _apply_upper_bound(mech, dist, kernel, alpha)


def _point_pricing(dist, cost):
    theta = dist.lo
    q = cost.inverse(max(theta, 0.0))
    transfer = theta * q
    return SolvedMechanism(PRICING, np.array([theta]), np.array([q]), np.array([transfer]),
                           np.zeros(1), np.array([theta]), np.array([theta]),
                           float(transfer - cost(q)))


def solve_single_good(dist, kernel, grid_n=config.DEFAULT_GRID_N, alpha=None, threads=1):
    """Sell to types above θ* = inf{θ : φ(θ) >= 0} at t* = θ - U."""
    if dist.is_point:
        return _point_sale(dist)
    _check_grid(grid_n)
    grid = dist.grid(grid_n)
    phi = virtual_value_curve(dist, kernel, grid, threads)
    _require_increasing(phi, grid)
    theta_star = _reserve(dist, kernel, grid, phi)
    phi_m = np.asarray(myerson_virtual_value(dist, grid))

    if theta_star is None:
        zeros = np.zeros(grid.size)
        return SolvedMechanism(SALE, grid, zeros, zeros, zeros, phi, phi_m, 0.0,
                               allocation=lambda z: np.zeros(np.shape(z)))

    def allocation(z):
        return (np.asarray(z, dtype=float) >= theta_star).astype(float)

    q = allocation(grid)
    utility = utility_envelope(grid, allocation, kernel, breaks=[theta_star])
    transfer = grid * q - utility

    served = grid > theta_star
    nodes = np.concatenate(([theta_star], grid[served]))
    prices = np.concatenate(([theta_star], transfer[served]))
    revenue = float(trapezoid(prices * dist.pdf(nodes), nodes)) if nodes.size > 1 else 0.0

    mech = SolvedMechanism(SALE, grid, q, transfer, utility, phi, phi_m, revenue,
                           theta_star=float(theta_star), allocation=allocation)
    mech.diagnostics["t_increasing"] = _is_increasing(prices)
    mech.diagnostics["t_below_theta"] = bool(np.all(transfer <= grid + config.MONOTONE_TOL))
    logger.info("single good: theta* = %.10g, revenue %.10g", theta_star, revenue)
    return _apply_upper_bound(mech, dist, kernel, alpha)


def _point_sale(dist):
    theta = dist.lo
    sold = theta >= 0.0
    q = np.array([1.0 if sold else 0.0])
    transfer = q * theta
    return SolvedMechanism(SALE, np.array([theta]), q, transfer, np.zeros(1),
                           np.array([theta]), np.array([theta]), float(transfer[0]),
                           theta_star=theta if sold else None)


def _reserve(dist, kernel, grid, phi):
    if phi[0] >= 0.0:
        return float(grid[0])
    if phi[-1] < 0.0:
        return None
    k = int(np.argmax(phi >= 0.0))
    return float(brentq(lambda x: virtual_value(dist, kernel, x), grid[k - 1], grid[k],
                        xtol=config.ROOT_XTOL))


def _upper_bound_report(dist, kernel, alpha, qstar, grid_size):
    alpha = alpha if alpha is not None else kernel.as_alpha()
    return check_bounds(dist, alpha, kernel, qstar=qstar,
                        grid_n=min(grid_size, config.BOUNDS_GRID_N), virtual_values=False)


def _apply_upper_bound(mech, dist, kernel, alpha):
    report = _upper_bound_report(dist, kernel, alpha, mech.quantity, mech.grid.size)
    mech.diagnostics["lower_bound_violation"] = report.lower_bound_violation
    mech.diagnostics["upper_bound_violation"] = report.upper_bound_violation
    if report.upper_bound_violation > config.IC_TOL:
        mech.status = CANDIDATE
        message = (f"global upper bound violated by {report.upper_bound_violation:.3g} "
                   f"at {report.upper_bound_pair}")
        mech.warnings.append(message)
        logger.warning("%s mechanism downgraded to candidate: %s", mech.kind, message)
    return mech


def _apply_auction_upper_bound(solution):
    """Per-agent α_i <= Λ_i A_i with A_i built from the interim allocation Q_i."""
    for i, (dist, kernel, alpha) in enumerate(zip(solution.dists, solution.kernels,
                                                  solution.alphas)):
        if solution.reserves[i] is None:
            solution.diagnostics.append({"upper_bound_violation": 0.0})
            continue
        report = _upper_bound_report(dist, kernel, alpha,
                                     lambda z, i=i: solution.interim_quantity(i, z),
                                     solution.grids[i].size)
        solution.diagnostics.append({"lower_bound_violation": report.lower_bound_violation,
                                     "upper_bound_violation": report.upper_bound_violation})
        if report.upper_bound_violation > config.IC_TOL:
            solution.status = CANDIDATE
            message = (f"agent {i}: global upper bound violated by "
                       f"{report.upper_bound_violation:.3g} at {report.upper_bound_pair}")
            solution.warnings.append(message)
            logger.warning("auction downgraded to candidate: %s", message)
    return solution


@dataclass(eq=False)
class AuctionSolution:
    """Per-agent virtual values, reserves and interim schedules of the optimal auction."""

    dists: list
    kernels: list
    alphas: list
    grids: list
    phis: list
    reserves: list
    interim_q: list = field(default_factory=list)
    interim_u: list = field(default_factory=list)
    payments: list = field(default_factory=list)
    revenues: list = field(default_factory=list)
    status: str = OPTIMAL
    warnings: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def n_agents(self):
        return len(self.dists)

    @property
    def revenue(self):
        return float(sum(self.revenues))

    def virtual_value(self, i, theta):
        return np.interp(theta, self.grids[i], self.phis[i])

    def _inverse_virtual_value(self, j, v):
        grid, phi = self.grids[j], self.phis[j]
        v = np.asarray(v, dtype=float)
        idx = np.clip(np.searchsorted(phi, v, side="left"), 1, grid.size - 1)
        low, high = phi[idx - 1], phi[idx]
        span = np.where(high > low, high - low, 1.0)
        weight = np.clip(np.where(high > low, (v - low) / span, 0.0), 0.0, 1.0)
        x = grid[idx - 1] + weight * (grid[idx] - grid[idx - 1])
        x = np.where(v <= phi[0], grid[0], x)
        return np.where(v >= phi[-1], grid[-1], x)

    def interim_quantity(self, i, theta):
        """Q_i(θ) = ∏_{j≠i} F_j(φ_j⁻¹(max(0, φ_i(θ)))) above the reserve, else 0."""
        theta = np.asarray(theta, dtype=float)
        reserve = self.reserves[i]
        if reserve is None:
            return np.zeros(theta.shape) if theta.ndim else 0.0
        level = np.maximum(self.virtual_value(i, theta), 0.0)
        quantity = np.ones(theta.shape)
        for j in range(self.n_agents):
            if j != i:
                quantity = quantity * np.asarray(self.dists[j].cdf(self._inverse_virtual_value(j, level)))
        out = np.where(theta >= reserve, quantity, 0.0)
        return float(out) if out.ndim == 0 else out

    def payment(self, i, theta):
        """Price agent i pays upon winning."""
        theta = np.asarray(theta, dtype=float)
        reserve = self.reserves[i]
        if reserve is None:
            return np.zeros(theta.shape)
        grid = self.grids[i]
        served = grid > reserve
        nodes = np.concatenate(([reserve], grid[served]))
        prices = np.concatenate(([reserve], self.payments[i][served]))
        return np.where(theta >= reserve, np.interp(theta, nodes, prices), 0.0)

    def interim_transfer(self, i, theta):
        return np.asarray(self.interim_quantity(i, theta)) * self.payment(i, theta)

    def allocate(self, profile):
        """Winning agent for a type profile, or None when nobody is served."""
        profile = np.asarray(profile, dtype=float)
        if profile.shape != (self.n_agents,):
            raise ValueError(f"profile needs {self.n_agents} types")
        levels = np.array([self._eligible_level(i, profile[i]) for i in range(self.n_agents)])
        winner = int(np.argmax(levels))
        return None if np.isneginf(levels[winner]) else winner

    def transfers(self, profile):
        payments = np.zeros(self.n_agents)
        winner = self.allocate(profile)
        if winner is not None:
            payments[winner] = float(self.payment(winner, profile[winner]))
        return payments

    def _eligible_level(self, i, theta):
        reserve = self.reserves[i]
        if reserve is None or theta < reserve:
            return -np.inf
        return float(self.virtual_value(i, theta))

    def win_counts(self, max_points=None):
        """Winner counts over the product of the agents' grids."""
        if max_points is None and self.n_agents > 2:
            max_points = config.WIN_COUNT_MAX_POINTS
        levels = []
        for i in range(self.n_agents):
            grid = self.grids[i]
            if max_points is not None and grid.size > max_points:
                grid = np.linspace(grid[0], grid[-1], max_points)
            reserve = self.reserves[i]
            level = np.asarray(self.virtual_value(i, grid), dtype=float)
            if reserve is None:
                level = np.full(grid.shape, -np.inf)
            else:
                level = np.where(grid >= reserve, level, -np.inf)
            shape = [1] * self.n_agents
            shape[i] = grid.size
            levels.append(level.reshape(shape))
        stacked = np.stack(np.broadcast_arrays(*levels), axis=0)
        winners = np.argmax(stacked, axis=0)
        unsold = np.isneginf(np.max(stacked, axis=0))
        wins = [int(np.sum((winners == i) & ~unsold)) for i in range(self.n_agents)]
        return {"wins": wins, "no_sale": int(unsold.sum()), "points": int(unsold.size)}

    def rows(self):
        rows = []
        for i in range(self.n_agents):
            grid = self.grids[i]
            transfer = self.interim_q[i] * self.payments[i]
            phi_m = np.asarray(myerson_virtual_value(self.dists[i], grid))
            for k in range(grid.size):
                rows.append([i, grid[k], self.interim_q[i][k], transfer[k],
                             self.interim_u[i][k], self.phis[i][k], phi_m[k]])
        return rows

    def to_summary(self):
        return {
            "kind": AUCTION,
            "status": self.status,
            "revenue": self.revenue,
            "agents": [{"reserve": r, "revenue": float(v), "grid_n": int(g.size), **d}
                       for r, v, g, d in zip(self.reserves, self.revenues, self.grids,
                                             self.diagnostics)],
            "warnings": list(self.warnings),
        }


def solve_auction(dists, kernels, grid_n=config.DEFAULT_GRID_N, alphas=None, threads=1):
    """Allocate to the highest nonnegative virtual value; pay only upon winning."""
    dists, kernels = list(dists), list(kernels)
    if not dists or len(dists) != len(kernels):
        raise ValueError("an auction needs one kernel per agent")
    if alphas is None:
        alphas = [kernel.as_alpha() for kernel in kernels]
    _check_grid(grid_n)

    grids, phis, reserves = [], [], []
    for i, (dist, kernel) in enumerate(zip(dists, kernels)):
        if dist.is_point:
            raise ValueError(f"agent {i} needs a nondegenerate type interval")
        grid = dist.grid(grid_n)
        phi = virtual_value_curve(dist, kernel, grid, threads)
        _require_increasing(phi, grid, agent=i)
        grids.append(grid)
        phis.append(phi)
        reserves.append(_reserve(dist, kernel, grid, phi))

    solution = AuctionSolution(dists, kernels, list(alphas), grids, phis, reserves)
    for i, (dist, kernel, grid) in enumerate(zip(dists, kernels, grids)):
        reserve = reserves[i]
        quantity = np.asarray(solution.interim_quantity(i, grid), dtype=float)
        breaks = [] if reserve is None else [reserve]
        utility = utility_envelope(grid, lambda z, i=i: solution.interim_quantity(i, z), kernel,
                                   breaks=breaks)
        with np.errstate(divide="ignore", invalid="ignore"):
            payment = np.where(quantity > 0.0, grid - utility / quantity, 0.0)
        solution.interim_q.append(quantity)
        solution.interim_u.append(utility)
        solution.payments.append(payment)
        solution.revenues.append(_agent_revenue(solution, i))
    logger.info("auction with %d agents: revenue %.10g", len(dists), solution.revenue)
    return _apply_auction_upper_bound(solution)


def _agent_revenue(solution, i):
    reserve = solution.reserves[i]
    if reserve is None:
        return 0.0
    grid = solution.grids[i]
    served = grid > reserve
    nodes = np.concatenate(([reserve], grid[served]))
    utility = np.concatenate(([0.0], solution.interim_u[i][served]))
    surplus = nodes * np.asarray(solution.interim_quantity(i, nodes)) - utility
    return float(trapezoid(surplus * solution.dists[i].pdf(nodes), nodes))


def lambda_sweep(dist, lambdas, kind=SALE, cost=None, grid_n=config.DEFAULT_GRID_N, threads=1):
    """Revenue (and θ* for sales) under constant precision λ for each λ."""
    if kind == PRICING and cost is None:
        cost = CostFunction.quadratic()
    rows = []
    for lam in sorted(float(v) for v in lambdas):
        kernel = PrecisionKernel.constant(lam, dist.lo, dist.hi)
        if kind == SALE:
            mech = solve_single_good(dist, kernel, grid_n, threads=threads)
        elif kind == PRICING:
            mech = solve_nonlinear_pricing(dist, kernel, cost, grid_n, threads=threads)
        else:
            raise ValueError(f"unknown sweep kind {kind!r}")
        rows.append({"lambda": lam, "revenue": mech.revenue, "theta_star": mech.theta_star,
                     "status": mech.status})
    return rows


def _check_grid(grid_n):
    if int(grid_n) < config.MIN_GRID_N:
        raise ValueError(f"grid needs at least {config.MIN_GRID_N} points, got {grid_n}")


def _is_increasing(values):
    return bool(np.all(np.diff(np.asarray(values, dtype=float)) >= -config.MONOTONE_TOL))


def _require_increasing(phi, grid, agent=None):
    drops = np.nonzero(np.diff(phi) < -config.MONOTONE_TOL)[0]
    if drops.size:
        where = f" for agent {agent}" if agent is not None else ""
        raise IroningRequired(
            f"virtual value decreases near {grid[drops[0]]:.6g}{where}; ironing is not supported")
