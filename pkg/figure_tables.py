"""
Figure Tables for Veritest
Builds the reference instances and plotting datasets
"""
import logging

import numpy as np

import config
from authentication import FiniteAuthRate
from continuous_model import (ContinuousAuthRate, PrecisionKernel, TypeDistribution,
                              myerson_virtual_value, virtual_value_curve)
from discernment import PassageMatrix, interval_environment
from profiles import FiniteProfile

logger = logging.getLogger(__name__)

GL_TYPES = ("theta1", "theta2", "theta3")
GL_TESTS = ("tau1", "tau2", "tau3")
GL_REPORTS = {"theta1": ("theta1", "theta2"), "theta2": ("theta2", "theta3"),
              "theta3": ("theta3",)}

FOCAL_TYPE = 0.5
INTERVAL = (0.25, 0.75)


# ── Reference instances ───────────────────────────────────────────────────────

def green_laffont_environment():
    """Type θi passes τj iff θi may report θj in the partial verification example."""
    rates = {f"tau{j + 1}": [1.0 if GL_TYPES[j] in GL_REPORTS[theta] else 0.0
                             for theta in GL_TYPES]
             for j in range(3)}
    return PassageMatrix.from_rates(GL_TYPES, GL_TESTS, rates)


def green_laffont_alpha():
    """The {0, 1} message correspondence θ1 → {θ1, θ2}, θ2 → {θ2, θ3}, θ3 → {θ3}."""
    return FiniteAuthRate.from_correspondence(GL_TYPES, GL_REPORTS)


def green_laffont_untruthful_profile():
    """θ2 and θ3 both report θ3; the good goes to whoever passes τ3 after reporting θ3."""
    env = green_laffont_environment()
    decisions = ("keep", "allocate")
    report = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    testing = np.eye(3)
    decision = np.zeros((3, 3, 2, 2))
    decision[..., 0] = 1.0
    decision[2, 2, 1] = (0.0, 1.0)
    utility = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    performance = np.broadcast_to(np.transpose(env.array(), (1, 0, 2))[:, None],
                                  (3, 3, 3, 2))
    return FiniteProfile(env, GL_TYPES, decisions, report, testing, performance,
                         decision, utility)


def tangent_rates():
    """Affine τ and convex ψ touching at the focal type, so only λ = 1/2 works there."""
    return {
        "tau": lambda x: 0.5 + 1.5 * (x - 0.5),
        "psi": lambda x: x * (x - 0.25) + 0.375,
    }


def scaled_rates():
    """A hard test τ against ψ1 and its scaled copy ψ2 = 0.75 ψ1."""
    return {
        "tau": lambda x: 0.375 - 5.0 * (x - 0.5) ** 2,
        "psi1": lambda x: 0.75 - 4.0 * (x - 0.5) ** 2,
        "psi2": lambda x: 0.75 * (0.75 - 4.0 * (x - 0.5) ** 2),
    }


def tangent_environment(n=51):
    return interval_environment(INTERVAL[0], INTERVAL[1], n, tangent_rates(), refine_at=FOCAL_TYPE)


def scaled_environment(n=51):
    return interval_environment(INTERVAL[0], INTERVAL[1], n, scaled_rates(), refine_at=FOCAL_TYPE)


# ── Datasets ──────────────────────────────────────────────────────────────────

class FigureTables:
    """Column/row datasets for plotting outside the toolkit."""

    NAMES = ("virtual-value", "passage-tangent", "passage-scaled", "authentication-rate")

    def __init__(self, grid_n=None, threads=1):
        self.grid_n = grid_n
        self.threads = threads

    def _table(self, columns, rows):
        """Internal helper for a plain dataset."""
        return {"columns": list(columns), "rows": [list(r) for r in rows]}

    def create(self, name, **options):
        builders = {
            "virtual-value": self.create_virtual_value_table,
            "passage-tangent": lambda **kw: self.create_passage_table(tangent_rates(), **kw),
            "passage-scaled": lambda **kw: self.create_passage_table(scaled_rates(), **kw),
            "authentication-rate": self.create_authentication_rate_table,
        }
        if name not in builders:
            raise ValueError(f"unknown figure {name!r}; choose from {', '.join(self.NAMES)}")
        return builders[name](**options)

    def create_virtual_value_table(self, lambdas=None, dist=None):
        """φ^M and φ under constant λ on a uniform grid."""
        dist = dist or TypeDistribution.uniform()
        lambdas = config.DEFAULT_LAMBDAS if lambdas is None else lambdas
        grid = dist.grid(self.grid_n or config.VIRTUAL_VALUE_GRID_N)
        columns = ["theta", "phi_myerson"] + [f"phi_lambda_{_label(lam)}" for lam in lambdas]
        curves = [grid, np.asarray(myerson_virtual_value(dist, grid))]
        for lam in lambdas:
            kernel = PrecisionKernel.constant(float(lam), dist.lo, dist.hi)
            curves.append(virtual_value_curve(dist, kernel, grid, self.threads))
        logger.debug("virtual value table: %d points, %d curves", grid.size, len(lambdas))
        return self._table(columns, zip(*curves))

    def create_passage_table(self, rates, lo=INTERVAL[0], hi=INTERVAL[1]):
        """Passage curves plus the dotted level and the λ = 1/2 average of τ."""
        grid = np.linspace(lo, hi, self.grid_n or 101)
        focal = rates["tau"](FOCAL_TYPE)
        columns = ["theta"] + list(rates) + ["tau_level", "tau_average"]
        rows = []
        for x in grid:
            tau = rates["tau"](x)
            rows.append([x] + [rates[name](x) for name in rates] + [focal, 0.5 * (tau + focal)])
        return self._table(columns, rows)

    def create_authentication_rate_table(self, lam=1.0, reports=(0.25, 0.5, 0.75)):
        """Exponential α(report | θ) as a function of the true type, one column per report."""
        alpha = ContinuousAuthRate.exponential(lam)
        grid = np.linspace(0.0, 1.0, self.grid_n or 101)
        columns = ["theta"] + [f"report_{_label(r)}" for r in reports]
        values = [np.asarray(alpha(float(r), grid)) for r in reports]
        return self._table(columns, zip(grid, *values))


def _label(x):
    return f"{float(x):g}"
