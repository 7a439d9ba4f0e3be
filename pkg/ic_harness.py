"""
Incentive Compatibility Harness for Veritest
Brute-force IC checks for solved mechanisms and revelation-principle tools for finite profiles
"""
import logging
from dataclasses import dataclass, field

import numpy as np

import config
from authentication import FiniteAuthRate
from discernment import PassageMatrix
from finite_markov import Measure, fq_compose
from profiles import (FiniteProfile, best_response, deviation_values, equilibrium_payoffs,
                      induced_scf, passage_array)

logger = logging.getLogger(__name__)

__all__ = [
    "FiniteProfile", "ICReport", "DeviationReport", "EquivalenceReport", "check_ic", "check_schedule",
    "check_interim_ic", "check_auction_ic", "canonicalize", "exhaustive_deviation_search",
    "random_profile",
]


@dataclass(frozen=True)
class ICReport:
    """Worst incentive and participation violations over a type grid."""

    max_ic_violation: float
    max_ir_violation: float
    worst_pair: tuple = None
    shirking_pairs: int = 0
    binding: tuple = ()
    grid_size: int = 0
    worst_agent: int = None
    agents: tuple = ()

    def passes(self, tol=config.IC_TOL):
        return self.max_ic_violation <= tol and self.max_ir_violation <= tol

    def to_record(self):
        record = {
            "max_ic_violation": self.max_ic_violation,
            "max_ir_violation": self.max_ir_violation,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "shirking_pairs": self.shirking_pairs,
            "binding": [list(b) for b in self.binding],
            "grid_size": self.grid_size,
        }
        if self.agents:
            record["worst_agent"] = self.worst_agent
            record["agents"] = [a.to_record() for a in self.agents]
        return record


def grid_report(grid, q, t, alpha):
    """IC/IR on a grid: U(θ) >= α(θ'|θ) max(θ q(θ') - t(θ'), 0) for every θ' ≠ θ.

    alpha[j, i] = α(grid[j] | grid[i]) (rows are reports).
    """
    grid = np.asarray(grid, dtype=float)
    q = np.asarray(q, dtype=float)
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    n = grid.size
    if q.shape != (n,) or t.shape != (n,) or alpha.shape != (n, n):
        raise ValueError("allocation, transfer and alpha must match the grid")

    value = grid[:, None] * q[None, :] - t[None, :]
    utility = np.diag(value).copy()
    ir = max(float(-utility.min()), 0.0)
    if n < 2:
        return ICReport(0.0, ir, grid_size=n)

    off_diagonal = ~np.eye(n, dtype=bool)
    deviation = alpha.T * np.maximum(value, 0.0)
    gap = np.where(off_diagonal, deviation - utility[:, None], -np.inf)
    i, j = np.unravel_index(np.argmax(gap), gap.shape)
    worst = max(float(gap[i, j]), 0.0)
    shirking = int(np.sum((value < 0.0) & off_diagonal))

    slack = (-gap).ravel()
    order = np.argsort(slack, kind="stable")[:config.MAX_BINDING_REPORTED]
    binding = tuple((float(grid[k // n]), float(grid[k % n]), float(slack[k]))
                    for k in order if slack[k] <= config.BINDING_TOL)
    pair = (float(grid[i]), float(grid[j])) if worst > 0.0 else None
    return ICReport(worst, ir, pair, shirking, binding, n)


def _alpha_matrix(alpha, grid):
    grid = np.asarray(grid, dtype=float)
    if isinstance(alpha, FiniteAuthRate):
        if alpha.alpha.shape != (grid.size, grid.size):
            raise ValueError("finite authentication rate does not match the grid")
        return alpha.alpha
    if isinstance(alpha, np.ndarray):
        matrix = np.asarray(alpha, dtype=float)
        if matrix.shape != (grid.size, grid.size):
            raise ValueError("alpha matrix does not match the grid")
        return matrix
    if hasattr(alpha, "matrix"):
        return alpha.matrix(grid, grid)
    return np.array([[float(alpha(r, t)) for t in grid] for r in grid])


def check_ic(mech, alpha, grid=None):
    """Exhaustive (θ, θ') check of a solved mechanism under authentication rate alpha."""
    if grid is None:
        return check_schedule(mech.grid, mech.q, mech.t, alpha)
    grid = np.asarray(grid, dtype=float)
    return check_schedule(grid, mech.quantity(grid), mech.transfer(grid), alpha)


def check_schedule(grid, q, t, alpha):
    """check_ic for raw (grid, q, t) arrays, e.g. re-ingested from CSV."""
    report = grid_report(grid, q, t, _alpha_matrix(alpha, grid))
    logger.debug("IC check on %d points: ic %.3g, ir %.3g", report.grid_size,
                 report.max_ic_violation, report.max_ir_violation)
    return report


def check_interim_ic(grids, quantities, transfers, alphas):
    """Per-agent interim IC plus ex post participation (price upon winning <= type)."""
    agents = []
    for grid, quantity, transfer, alpha in zip(grids, quantities, transfers, alphas):
        grid = np.asarray(grid, dtype=float)
        quantity = np.asarray(quantity, dtype=float)
        transfer = np.asarray(transfer, dtype=float)
        report = grid_report(grid, quantity, transfer, _alpha_matrix(alpha, grid))
        winning = quantity > 0.0
        if np.any(winning):
            excess = transfer[winning] / quantity[winning] - grid[winning]
            ex_post = max(float(excess.max()), 0.0)
            if ex_post > report.max_ir_violation:
                report = ICReport(report.max_ic_violation, ex_post, report.worst_pair,
                                  report.shirking_pairs, report.binding, report.grid_size)
        agents.append(report)
    if not agents:
        raise ValueError("no agents to check")
    worst = max(range(len(agents)), key=lambda k: agents[k].max_ic_violation)
    return ICReport(
        max_ic_violation=agents[worst].max_ic_violation,
        max_ir_violation=max(a.max_ir_violation for a in agents),
        worst_pair=agents[worst].worst_pair,
        shirking_pairs=sum(a.shirking_pairs for a in agents),
        binding=agents[worst].binding,
        grid_size=sum(a.grid_size for a in agents),
        worst_agent=worst,
        agents=tuple(agents),
    )


def check_auction_ic(sol, grids=None):
    quantities, transfers, used = [], [], []
    for i in range(sol.n_agents):
        if grids is None:
            grid = sol.grids[i]
            quantity = sol.interim_q[i]
            transfer = quantity * sol.payments[i]
        else:
            grid = np.asarray(grids[i], dtype=float)
            quantity = np.asarray(sol.interim_quantity(i, grid), dtype=float)
            transfer = np.asarray(sol.interim_transfer(i, grid), dtype=float)
        used.append(grid)
        quantities.append(quantity)
        transfers.append(transfer)
    return check_interim_ic(used, quantities, transfers, sol.alphas)


@dataclass(frozen=True, eq=False)
class DeviationReport:
    """Truthful payoff against the best pure report with optimal performance, per type."""

    types: tuple
    equilibrium: np.ndarray
    best: np.ndarray
    best_messages: tuple

    @property
    def gains(self):
        return self.best - self.equilibrium

    @property
    def max_gain(self):
        return float(np.max(self.gains))

    def is_ic(self, tol=config.PROFILE_TOL):
        return self.max_gain <= tol

    def to_record(self):
        return {
            "types": list(self.types),
            "equilibrium": self.equilibrium.tolist(),
            "best": self.best.tolist(),
            "best_messages": list(self.best_messages),
            "max_gain": self.max_gain,
        }


def exhaustive_deviation_search(profile):
    """Best payoff over pure reports, each followed by the optimal performance measure."""
    equilibrium = equilibrium_payoffs(profile)
    deviations = deviation_values(profile)
    best_index = np.argmax(deviations, axis=1)
    best = deviations[np.arange(len(profile.types)), best_index]
    messages = tuple(profile.messages[m] for m in best_index)
    return DeviationReport(profile.types, equilibrium, best, messages)


@dataclass(frozen=True)
class EquivalenceReport:
    scf_gap: float
    original_ic: bool
    canonical_ic: bool
    original_max_gain: float
    canonical_max_gain: float
    notes: tuple = field(default_factory=tuple)

    @property
    def scf_preserved(self):
        return self.scf_gap <= config.PROFILE_TOL

    def to_record(self):
        return {
            "scf_gap": self.scf_gap,
            "scf_preserved": self.scf_preserved,
            "original_ic": self.original_ic,
            "canonical_ic": self.canonical_ic,
            "original_max_gain": self.original_max_gain,
            "canonical_max_gain": self.canonical_max_gain,
            "notes": list(self.notes),
        }


def canonicalize(profile):
    """Direct, truthful, full-effort profile inducing the same social choice function.

    The report θ' draws the old message m ~ r(·|θ') and test τ ~ t(·|m); the
    test is kept, the message is recovered from (θ', τ) by conditioning, and a
    full-effort score is converted into the old performance by F~_π Q~_p.
    """
    env = profile.env
    scoreset = env.scoreset
    passage = passage_array(env)
    n_types, n_msgs = profile.report.shape
    n_tests = len(env.tests)

    joint = profile.report[:, :, None] * profile.testing[None, :, :]
    testing = joint.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(testing[:, None, :] > 0.0, joint / testing[:, None, :], 0.0)
    weights[:, 0, :] = np.where(testing > 0.0, weights[:, 0, :], 1.0)

    decision = np.zeros((n_types, n_tests, scoreset.size, len(profile.decisions)))
    for k in range(n_types):
        for j in range(n_tests):
            full_effort = Measure(scoreset, passage[k, j])
            for m in range(n_msgs):
                h = weights[k, m, j]
                if h <= 0.0:
                    continue
                performed = Measure(scoreset, profile.performance[k, m, j])
                conversion = fq_compose(full_effort, performed).matrix
                decision[k, j] += h * (conversion @ profile.decision[m, j])

    canonical = FiniteProfile.canonical(env, profile.decisions, testing, decision,
                                        profile.utility)
    original = exhaustive_deviation_search(profile)
    converted = exhaustive_deviation_search(canonical)
    gap = float(np.max(np.abs(induced_scf(canonical) - induced_scf(profile))))
    notes = []
    if not original.is_ic():
        notes.append("original profile is not incentive compatible")
        logger.warning("canonicalizing a profile with deviation gain %.3g", original.max_gain)
    report = EquivalenceReport(gap, original.is_ic(), converted.is_ic(), original.max_gain,
                               converted.max_gain, tuple(notes))
    return canonical, report


def random_profile(rng, n_types=3, n_messages=3, n_tests=3, n_decisions=2):
    """Binary-score profile with random primitives and a best-response strategy."""
    types = tuple(f"t{k}" for k in range(n_types))
    tests = tuple(f"tau{j}" for j in range(n_tests))
    rates = {tau: rng.uniform(0.0, 1.0, n_types) for tau in tests}
    env = PassageMatrix.from_rates(types, tests, rates)
    messages = tuple(f"m{m}" for m in range(n_messages))
    decisions = tuple(f"x{x}" for x in range(n_decisions))
    testing = rng.dirichlet(np.ones(n_tests), size=n_messages)
    decision = rng.dirichlet(np.ones(n_decisions), size=(n_messages, n_tests, 2))
    utility = rng.normal(size=(n_decisions, n_types))
    report = np.zeros((n_types, n_messages))
    report[:, 0] = 1.0
    performance = np.broadcast_to(passage_array(env)[:, None],
                                  (n_types, n_messages, n_tests, 2))
    start = FiniteProfile(env, messages, decisions, report, testing, performance,
                          decision, utility)
    return best_response(start)
