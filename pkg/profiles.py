"""
Finite Profiles for Veritest
Handles mechanisms with tests together with the agent's reporting and performance strategies
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

import config
from errors import InvalidMeasure, UnknownLabel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FiniteProfile:
    """Mechanism (messages, testing rule, decision rule) plus a strategy.

    Arrays are indexed by label position:
      report       (types, messages)            r(m | θ)
      testing      (messages, tests)            t(τ | m)
      performance  (types, messages, tests, scores)  p_{θ,m,τ}
      decision     (messages, tests, scores, decisions)  g(x | m, τ, s)
      utility      (decisions, types)           u(x, θ)
    """

    env: object
    messages: tuple
    decisions: tuple
    report: np.ndarray
    testing: np.ndarray
    performance: np.ndarray
    decision: np.ndarray
    utility: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(str(m) for m in self.messages))
        object.__setattr__(self, "decisions", tuple(str(x) for x in self.decisions))
        n_types, n_tests = len(self.env.types), len(self.env.tests)
        n_msgs, n_dec = len(self.messages), len(self.decisions)
        n_scores = self.env.scoreset.size
        shapes = {
            "report": (n_types, n_msgs),
            "testing": (n_msgs, n_tests),
            "performance": (n_types, n_msgs, n_tests, n_scores),
            "decision": (n_msgs, n_tests, n_scores, n_dec),
            "utility": (n_dec, n_types),
        }
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if name != "utility":
                _check_stochastic(name, arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

        slack = np.cumsum(self.performance, axis=-1) - np.cumsum(self.passage, axis=-1)[:, None]
        if np.any(slack < -config.ALGEBRA_TOL):
            raise InvalidMeasure("performance measures must be dominated by the passage rates")

    @classmethod
    def canonical(cls, env, decisions, testing, decision, utility):
        """Direct, truthful, full-effort profile."""
        n_types = len(env.types)
        performance = np.broadcast_to(
            passage_array(env)[:, None, :, :],
            (n_types, n_types, len(env.tests), env.scoreset.size))
        return cls(env, env.types, decisions, np.eye(n_types), testing,
                   performance, decision, utility)

    @property
    def types(self):
        return self.env.types

    @property
    def tests(self):
        return self.env.tests

    @property
    def scoreset(self):
        return self.env.scoreset

    @property
    def passage(self):
        """π as (types, tests, scores)."""
        return passage_array(self.env)

    @property
    def is_canonical(self):
        if self.messages != self.types:
            return False
        if not np.allclose(self.report, np.eye(len(self.types)), atol=config.ALGEBRA_TOL):
            return False
        full = np.broadcast_to(self.passage[:, None], self.performance.shape)
        return bool(np.allclose(self.performance, full, atol=config.ALGEBRA_TOL))

    def with_strategy(self, report, performance):
        return replace(self, report=report, performance=performance)

    def message_index(self, message):
        try:
            return self.messages.index(str(message))
        except ValueError:
            raise UnknownLabel(f"unknown message {message!r}") from None

    def to_record(self):
        return {
            "types": list(self.types),
            "tests": list(self.tests),
            "scores": list(self.scoreset.scores),
            "messages": list(self.messages),
            "decisions": list(self.decisions),
            "report": self.report.tolist(),
            "testing": self.testing.tolist(),
            "performance": self.performance.tolist(),
            "decision": self.decision.tolist(),
            "utility": self.utility.tolist(),
        }


def passage_array(env):
    """Passage measures as an array indexed (types, tests, scores)."""
    return np.transpose(env.array(), (1, 0, 2))


def decision_values(profile):
    """w[θ, m, τ, s]: expected utility of type θ from the decision at (m, τ, s)."""
    return np.einsum("mtsx,xk->kmts", profile.decision, profile.utility)


def induced_scf(profile):
    """Social choice function f[θ, x] induced by the profile's strategy."""
    return np.einsum("km,mt,kmts,mtsx->kx", profile.report, profile.testing,
                     profile.performance, profile.decision)


def equilibrium_payoffs(profile):
    """Expected utility of each type under the profile's own strategy."""
    return np.einsum("kx,xk->k", induced_scf(profile), profile.utility)


def optimal_performance(passage, values):
    """Best measure dominated by `passage` for payoffs `values` on the scores.

    Mass at score s moves to the best score at or below s; ties keep the
    highest such score, so full effort is chosen whenever it is optimal.
    """
    passage = np.asarray(passage, dtype=float)
    target = _best_lower_index(np.asarray(values, dtype=float))
    rho = np.zeros_like(passage)
    np.add.at(rho, target, passage)
    return rho


def optimal_performance_values(profile):
    """best[θ, m, τ]: payoff of the optimal performance after report m and test τ."""
    w = decision_values(profile)
    best_lower = np.maximum.accumulate(w, axis=-1)
    return np.einsum("kts,kmts->kmt", profile.passage, best_lower)


def deviation_values(profile):
    """dev[θ, m]: payoff of reporting m and then performing optimally."""
    return np.einsum("mt,kmt->km", profile.testing, optimal_performance_values(profile))


def best_response(profile):
    """Replace the strategy by a pure best response with optimal performance."""
    w = decision_values(profile)
    n_types, n_msgs, n_tests, _ = w.shape
    performance = np.zeros(profile.performance.shape)
    for k in range(n_types):
        for m in range(n_msgs):
            for j in range(n_tests):
                performance[k, m, j] = optimal_performance(profile.passage[k, j], w[k, m, j])
    dev = deviation_values(profile)
    report = np.zeros(profile.report.shape)
    report[np.arange(n_types), np.argmax(dev, axis=1)] = 1.0
    return profile.with_strategy(report, performance)


def _best_lower_index(values):
    idx = np.zeros(values.size, dtype=int)
    best = 0
    for s in range(values.size):
        if values[s] >= values[best] - config.ALGEBRA_TOL:
            best = s
        idx[s] = best
    return idx


def _check_stochastic(name, arr):
    if np.any(arr < -config.ALGEBRA_TOL):
        raise InvalidMeasure(f"{name} has negative probabilities")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > config.ALGEBRA_TOL):
        raise InvalidMeasure(f"{name} distributions must sum to 1")
