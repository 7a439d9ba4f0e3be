"""
Authentication Manager for Veritest
Validates authentication rates and converts between rates and testing environments
"""
import logging
from dataclasses import dataclass

import numpy as np

import config
from discernment import PassageMatrix, binary_lambda_interval, check_discerning
from errors import NotMostDiscerning, UnknownLabel

logger = logging.getLogger(__name__)

TEST_PREFIX = "tau_"


@dataclass(frozen=True, eq=False)
class FiniteAuthRate:
    """α(report | true type) with rows indexed by report and columns by true type."""

    types: tuple
    alpha: np.ndarray

    def __post_init__(self):
        types = tuple(str(t) for t in self.types)
        a = np.array(self.alpha, dtype=float)
        if a.shape != (len(types), len(types)):
            raise ValueError(f"alpha must be {len(types)}x{len(types)}, got {a.shape}")
        if np.any(a < -config.ALGEBRA_TOL) or np.any(a > 1.0 + config.ALGEBRA_TOL):
            raise ValueError("authentication rates must lie in [0, 1]")
        a = np.clip(a, 0.0, 1.0)
        a.setflags(write=False)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "alpha", a)

    @classmethod
    def from_correspondence(cls, types, reports):
        """{0, 1} rate from the reports each type can send: reports[θ] ⊆ types."""
        types = tuple(str(t) for t in types)
        a = np.zeros((len(types), len(types)))
        for j, theta in enumerate(types):
            for report in reports.get(theta, ()):
                a[types.index(str(report)), j] = 1.0
        return cls(types, a)

    def index(self, theta):
        try:
            return self.types.index(str(theta))
        except ValueError:
            raise UnknownLabel(f"unknown type {theta!r}") from None

    def rate(self, report, true_type):
        return float(self.alpha[self.index(report), self.index(true_type)])

    @property
    def failure(self):
        """ᾱ = 1 - α."""
        return 1.0 - self.alpha

    @property
    def is_zero_one(self):
        return bool(np.all((self.alpha == 0.0) | (self.alpha == 1.0)))

    def minimal_types(self):
        """Types θ with α(θ|θ) <= α(θ|θ') for every θ'."""
        diag = np.diag(self.alpha)
        flags = np.all(diag[:, None] <= self.alpha + config.ALGEBRA_TOL, axis=1)
        return tuple(theta for theta, ok in zip(self.types, flags) if ok)

    def to_record(self):
        return {"types": list(self.types), "alpha": self.alpha.tolist()}


@dataclass(frozen=True)
class AlphaViolation:
    """Certificate that the tests of θ2 and θ3 cannot be ordered as required."""

    theta1: str
    theta2: str
    theta3: str
    slack: float
    partner: str = None

    def to_record(self):
        return {
            "theta1": self.theta1,
            "theta2": self.theta2,
            "theta3": self.theta3,
            "slack": self.slack,
            "partner": self.partner,
        }


@dataclass(frozen=True)
class AlphaValidation:
    holds: bool
    violation: AlphaViolation = None
    fast_path: bool = False

    def __bool__(self):
        return self.holds

    def to_record(self):
        return {
            "most_discerning": self.holds,
            "fast_path": self.fast_path,
            "violation": self.violation.to_record() if self.violation else None,
        }


def induce_alpha(env, tdhat, threads=1):
    """α(θ'|θ) = π(tdhat(θ')|θ) after checking that tdhat is most discerning."""
    if not env.is_binary:
        raise ValueError("authentication rates are induced from pass/fail environments")
    for theta in env.types:
        try:
            chosen = str(tdhat[theta])
        except KeyError:
            raise UnknownLabel(f"no test selected for type {theta!r}") from None
        for psi in env.tests:
            if psi != chosen and not check_discerning(env, theta, chosen, psi).holds:
                raise NotMostDiscerning(
                    f"{chosen} is not at least as {theta}-discerning as {psi}")
    a = np.array([env.rates(tdhat[report]) for report in env.types])
    return FiniteAuthRate(env.types, a)


def is_most_discerning_alpha(a, method="auto"):
    """Check every (θ2, θ3) pair against all θ1, returning the worst violation.

    When every type passes its own test at least as often as anyone else's,
    the check reduces to α(θ3|θ2) α(θ2|θ1) <= α(θ3|θ1) α(θ2|θ2).
    """
    if method not in ("auto", "fast", "full"):
        raise ValueError(f"unknown validation method {method!r}")
    diag_dominant = bool(np.all(np.diag(a.alpha)[:, None] >= a.alpha))
    if method == "fast" and not diag_dominant:
        raise ValueError("the triple-product check needs a diagonally dominant rate")
    if method == "fast" or (method == "auto" and diag_dominant):
        return _triple_product_check(a)
    return _full_check(a)


def _triple_product_check(a):
    alpha = a.alpha
    worst = None
    for b in range(len(a.types)):
        lhs = np.outer(alpha[:, b], alpha[b, :])
        rhs = alpha * alpha[b, b]
        slack = rhs - lhs
        c, k = np.unravel_index(np.argmin(slack), slack.shape)
        if slack[c, k] < -config.ALGEBRA_TOL and (worst is None or slack[c, k] < worst.slack):
            worst = AlphaViolation(a.types[k], a.types[b], a.types[c], float(slack[c, k]))
    if worst is not None:
        logger.info("nested range fails on (%s, %s, %s)", worst.theta1, worst.theta2, worst.theta3)
    return AlphaValidation(worst is None, worst, fast_path=True)


def _full_check(a):
    alpha = a.alpha
    worst = None
    n = len(a.types)
    for b in range(n):
        for c in range(n):
            if b == c:
                continue
            search = binary_lambda_interval(alpha[b, b], alpha[c, b], alpha[b, :], alpha[c, :])
            if search.feasible:
                continue
            if search.infeasible_index is not None:
                first, partner = search.infeasible_index, None
            else:
                first, partner = search.lower_index, search.upper_index
                if first is None:
                    first, partner = partner, None
            violation = AlphaViolation(
                a.types[first], a.types[b], a.types[c], float(search.slack),
                a.types[partner] if partner is not None else None)
            if worst is None or violation.slack < worst.slack:
                worst = violation
    return AlphaValidation(worst is None, worst, fast_path=False)


def essentially_equal(a1, a2):
    """Same minimal types and identical rows α(θ|·) for every other type."""
    if a1.types != a2.types:
        raise ValueError("authentication rates are defined on different types")
    minimal = a1.minimal_types()
    if set(minimal) != set(a2.minimal_types()):
        return False
    for i, theta in enumerate(a1.types):
        if theta in minimal:
            continue
        if np.any(np.abs(a1.alpha[i] - a2.alpha[i]) > config.ALGEBRA_TOL):
            return False
    return True


def environment_from_alpha(a):
    """One test per type with π(τ_θ'|θ) = α(θ'|θ), plus the testing function θ ↦ τ_θ."""
    validation = is_most_discerning_alpha(a)
    if not validation.holds:
        v = validation.violation
        raise NotMostDiscerning(
            f"authentication rate is not most discerning: ({v.theta1}, {v.theta2}, {v.theta3})")
    tests = tuple(TEST_PREFIX + theta for theta in a.types)
    rates = {test: a.alpha[i] for i, test in enumerate(tests)}
    env = PassageMatrix.from_rates(a.types, tests, rates)
    return env, dict(zip(a.types, tests))


def nested_range_holds(a):
    """Transitivity of the relation θ → θ' iff α(θ'|θ) = 1, via its closure."""
    relation = a.alpha.T >= 1.0 - config.ALGEBRA_TOL
    np.fill_diagonal(relation, True)
    closure = relation.copy()
    while True:
        step = closure | ((closure.astype(int) @ closure.astype(int)) > 0)
        if np.array_equal(step, closure):
            break
        closure = step
    return bool(np.array_equal(closure, relation))
