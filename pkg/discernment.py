"""
Discernment Manager for Veritest
Decides which tests are more discerning for a type and builds the score conversions that prove it
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

import config
from errors import NotMostDiscerning, UnknownLabel
from finite_markov import (Measure, ScoreSet, Transition, fq_compose, is_monotone)
from profiles import FiniteProfile

logger = logging.getLogger(__name__)

BINARY = "binary"
LP = "lp"


@dataclass(frozen=True, eq=False)
class PassageMatrix:
    """Finite testing environment: a score distribution per (test, type)."""

    types: tuple
    tests: tuple
    scoreset: ScoreSet
    dist: dict

    def __post_init__(self):
        types = tuple(str(t) for t in self.types)
        tests = tuple(str(t) for t in self.tests)
        if not types or not tests:
            raise ValueError("an environment needs at least one type and one test")
        if len(set(types)) != len(types) or len(set(tests)) != len(tests):
            raise ValueError("type and test labels must be unique")
        dist = {}
        for tau in tests:
            for theta in types:
                measure = self.dist.get((tau, theta))
                if measure is None:
                    raise ValueError(f"missing passage measure for test {tau!r}, type {theta!r}")
                if measure.scoreset != self.scoreset:
                    raise ValueError(f"passage measure for ({tau}, {theta}) uses another score set")
                dist[(tau, theta)] = measure
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "tests", tests)
        object.__setattr__(self, "dist", dist)

    @classmethod
    def from_rates(cls, types, tests, rates):
        """Binary environment from pass probabilities rates[test][i] for types[i]."""
        types = tuple(str(t) for t in types)
        dist = {}
        for tau in tests:
            row = list(rates[tau])
            if len(row) != len(types):
                raise ValueError(f"test {tau!r} needs {len(types)} passage rates")
            for theta, p in zip(types, row):
                dist[(str(tau), theta)] = Measure.binary(p)
        return cls(types, tuple(tests), ScoreSet.binary(), dist)

    @classmethod
    def from_weights(cls, types, tests, scores, weights):
        """General environment from weights[test][i] = score weights for types[i]."""
        scoreset = ScoreSet(tuple(scores))
        types = tuple(str(t) for t in types)
        dist = {}
        for tau in tests:
            rows = list(weights[tau])
            if len(rows) != len(types):
                raise ValueError(f"test {tau!r} needs {len(types)} score distributions")
            for theta, w in zip(types, rows):
                dist[(str(tau), theta)] = Measure(scoreset, w)
        return cls(types, tuple(tests), scoreset, dist)

    @property
    def is_binary(self):
        return self.scoreset.is_binary

    def type_index(self, theta):
        try:
            return self.types.index(str(theta))
        except ValueError:
            raise UnknownLabel(f"unknown type {theta!r}") from None

    def test_index(self, tau):
        try:
            return self.tests.index(str(tau))
        except ValueError:
            raise UnknownLabel(f"unknown test {tau!r}") from None

    def measure(self, tau, theta):
        self.test_index(tau)
        self.type_index(theta)
        return self.dist[(str(tau), str(theta))]

    def rate(self, tau, theta):
        """Passage probability (mass on the top score)."""
        return self.measure(tau, theta).pass_rate

    def rates(self, tau):
        """Passage probabilities of a test across all types."""
        self.test_index(tau)
        return np.array([self.dist[(str(tau), theta)].pass_rate for theta in self.types])

    def array(self):
        """Weights indexed (tests, types, scores)."""
        return np.array([[self.dist[(tau, theta)].weights for theta in self.types]
                         for tau in self.tests])

    def to_record(self):
        return {
            "types": list(self.types),
            "tests": list(self.tests),
            "scores": list(self.scoreset.scores),
            "weights": {tau: [list(self.dist[(tau, theta)].weights) for theta in self.types]
                        for tau in self.tests},
        }


@dataclass(frozen=True)
class LambdaSearch:
    """Intersection of the per-type half-lines in λ with [0, 1]."""

    interval: tuple = None
    lower_index: int = None
    upper_index: int = None
    infeasible_index: int = None
    slack: float = 0.0
    degenerate: bool = False

    @property
    def feasible(self):
        return self.interval is not None


@dataclass(frozen=True)
class DiscernmentWitness:
    """Outcome of a τ ⪰_θ ψ check."""

    theta: str
    tau: str
    psi: str
    holds: bool
    conversion: Transition = None
    lambda_interval: tuple = None
    method: str = BINARY
    notes: tuple = field(default_factory=tuple)

    def to_record(self):
        return {
            "type": self.theta,
            "tau": self.tau,
            "psi": self.psi,
            "holds": self.holds,
            "method": self.method,
            "lambda_interval": list(self.lambda_interval) if self.lambda_interval else None,
            "conversion": self.conversion.to_record() if self.conversion else None,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class MostDiscerningSelection:
    """A most-discerning testing function, or the types that have none."""

    selection: dict
    failing: tuple
    candidates: dict

    @property
    def exists(self):
        return self.selection is not None


def binary_lambda_interval(p_tau, p_psi, tau_rates, psi_rates):
    """Feasible λ for the binary conversion λ F~Q~ + (1 - λ) π_{ψ|θ}.

    With π(τ|θ) >= π(ψ|θ) each other type θ' must satisfy
        [λ π(τ|θ') + (1 - λ) π(τ|θ)] π(ψ|θ)/π(τ|θ) <= π(ψ|θ'),
    and otherwise the same inequality holds reversed for failure rates.
    The ratio 0/0 is read as 1. Each inequality is a half-line in λ.
    """
    tau_rates = np.asarray(tau_rates, dtype=float)
    psi_rates = np.asarray(psi_rates, dtype=float)
    degenerate = False
    if p_tau >= p_psi:
        if p_tau < config.DEGENERATE_COEF:
            degenerate = True
        ratio = p_psi / p_tau if p_tau > 0.0 else 1.0
        coefs = ratio * (tau_rates - p_tau)
        rhs = psi_rates - ratio * p_tau
    else:
        q_tau, q_psi = 1.0 - p_tau, 1.0 - p_psi
        ratio = q_psi / q_tau
        coefs = -ratio * ((1.0 - tau_rates) - q_tau)
        rhs = ratio * q_tau - (1.0 - psi_rates)

    lo, hi = 0.0, 1.0
    lo_at = hi_at = None
    for j, (coef, bound_rhs) in enumerate(zip(coefs, rhs)):
        if abs(coef) < config.DEGENERATE_COEF:
            if bound_rhs < -config.ALGEBRA_TOL:
                logger.debug("constant constraint from type index %d is violated", j)
                return LambdaSearch(infeasible_index=j, slack=float(bound_rhs),
                                    degenerate=degenerate)
            continue
        bound = bound_rhs / coef
        if coef > 0.0 and bound < hi:
            hi, hi_at = bound, j
        elif coef < 0.0 and bound > lo:
            lo, lo_at = bound, j

    slack = hi - lo
    if slack < -config.ALGEBRA_TOL:
        return LambdaSearch(lower_index=lo_at, upper_index=hi_at, slack=float(slack),
                            degenerate=degenerate)
    if slack < 0.0:
        lo = hi = 0.5 * (lo + hi)
    return LambdaSearch(interval=(float(lo), float(hi)), lower_index=lo_at,
                        upper_index=hi_at, slack=float(max(slack, 0.0)),
                        degenerate=degenerate)


def binary_conversion(mu, nu, lam):
    """λ F~_mu Q~_nu + (1 - λ) nu as a transition on the shared scores."""
    quantile_matching = fq_compose(mu, nu)
    return quantile_matching.mix(lam, Transition.constant(mu.scoreset, nu))


def verify_conversion(env, theta, tau, psi, k, tol=config.WITNESS_TOL):
    """Check that k is a monotone conversion witnessing τ ⪰_θ ψ."""
    if not is_monotone(k):
        return False
    source = env.measure(tau, theta)
    if np.max(np.abs(source.array @ k.matrix - env.measure(psi, theta).array)) > tol:
        return False
    for other in env.types:
        converted = np.cumsum(env.measure(tau, other).array @ k.matrix)
        if np.any(converted < env.measure(psi, other).cdf() - tol):
            return False
    return True


def check_discerning(env, theta, tau, psi, method="auto"):
    """Decide whether test tau is at least as theta-discerning as test psi."""
    env.type_index(theta)
    env.test_index(tau)
    env.test_index(psi)
    if method == "auto":
        method = BINARY if env.is_binary else LP
    if method == BINARY:
        if not env.is_binary:
            raise ValueError("the binary characterization needs the score set {0, 1}")
        return _check_binary(env, str(theta), str(tau), str(psi))
    if method == LP:
        return _check_lp(env, str(theta), str(tau), str(psi))
    raise ValueError(f"unknown discernment method {method!r}")


def _check_binary(env, theta, tau, psi):
    mu, nu = env.measure(tau, theta), env.measure(psi, theta)
    search = binary_lambda_interval(mu.pass_rate, nu.pass_rate, env.rates(tau), env.rates(psi))
    notes = ("zero passage rate handled with 0/0 = 1",) if search.degenerate else ()
    if search.degenerate:
        logger.warning("degenerate coefficients for %s vs %s at %s", tau, psi, theta)
    if not search.feasible:
        logger.debug("%s is not %s-discerning over %s", tau, theta, psi)
        return DiscernmentWitness(theta, tau, psi, False, method=BINARY, notes=notes)
    lo, hi = search.interval
    k = binary_conversion(mu, nu, 0.5 * (lo + hi))
    return DiscernmentWitness(theta, tau, psi, True, conversion=k,
                              lambda_interval=(lo, hi), method=BINARY, notes=notes)


def _check_lp(env, theta, tau, psi):
    program = _conversion_program(env, theta, tau, psi)
    result = _solve_program(program, np.zeros(program["n_vars"]))
    if result is None:
        return DiscernmentWitness(theta, tau, psi, False, method=LP)
    k = _clean_conversion(env.scoreset, result.x)
    notes = ()
    if not verify_conversion(env, theta, tau, psi, k, tol=config.LP_TOL):
        notes = ("solver witness exceeds the conversion tolerance",)
        logger.warning("LP witness for %s vs %s at %s failed re-verification", tau, psi, theta)

    interval = None
    if env.is_binary:
        interval = _lp_lambda_interval(env, theta, tau, psi, program)
    return DiscernmentWitness(theta, tau, psi, True, conversion=k,
                              lambda_interval=interval, method=LP, notes=notes)


def _conversion_program(env, theta, tau, psi):
    """Linear constraints on k[i, j] (flattened row-major) for τ ⪰_θ ψ."""
    n = env.scoreset.size
    n_vars = n * n
    mu = env.measure(tau, theta).array
    nu = env.measure(psi, theta).array

    a_eq, b_eq = [], []
    for i in range(n):
        row = np.zeros(n_vars)
        row[i * n:(i + 1) * n] = 1.0
        a_eq.append(row)
        b_eq.append(1.0)
    for j in range(n):
        row = np.zeros(n_vars)
        row[j::n] = mu
        a_eq.append(row)
        b_eq.append(nu[j])

    a_ub, b_ub = [], []
    for i in range(n - 1):
        for cut in range(n - 1):
            row = np.zeros(n_vars)
            row[(i + 1) * n:(i + 1) * n + cut + 1] = 1.0
            row[i * n:i * n + cut + 1] = -1.0
            a_ub.append(row)
            b_ub.append(0.0)
    for other in env.types:
        if other == theta:
            continue
        mu_other = env.measure(tau, other).array
        f_other = env.measure(psi, other).cdf()
        for cut in range(n - 1):
            row = np.zeros(n_vars)
            for i in range(n):
                row[i * n:i * n + cut + 1] = -mu_other[i]
            a_ub.append(row)
            b_ub.append(-f_other[cut])

    return {
        "n_vars": n_vars,
        "A_eq": np.array(a_eq),
        "b_eq": np.array(b_eq),
        "A_ub": np.array(a_ub) if a_ub else None,
        "b_ub": np.array(b_ub) if b_ub else None,
    }


def _solve_program(program, objective):
    result = linprog(objective, A_ub=program["A_ub"], b_ub=program["b_ub"],
                     A_eq=program["A_eq"], b_eq=program["b_eq"], bounds=(0.0, 1.0),
                     method="highs",
                     options={"primal_feasibility_tolerance": 1e-10,
                              "dual_feasibility_tolerance": 1e-10})
    logger.debug("linprog status %s: %s", result.status, result.message)
    if result.status != 0:
        return None
    return result


def _clean_conversion(scoreset, x):
    n = scoreset.size
    m = np.clip(np.asarray(x, dtype=float).reshape(n, n), 0.0, None)
    m /= m.sum(axis=1, keepdims=True)
    return Transition.from_matrix(scoreset, scoreset, m)


def _lp_lambda_interval(env, theta, tau, psi, program):
    """Map the range of the conversion spread k(1,1) - k(0,1) back to λ."""
    mu, nu = env.measure(tau, theta), env.measure(psi, theta)
    quantile_matching = fq_compose(mu, nu).matrix
    full_spread = quantile_matching[1, 1] - quantile_matching[0, 1]
    if full_spread < config.DEGENERATE_COEF:
        return (0.0, 1.0)
    spread = np.zeros(program["n_vars"])
    spread[3] = 1.0
    spread[1] = -1.0
    low = _solve_program(program, spread)
    high = _solve_program(program, -spread)
    if low is None or high is None:
        return None
    lo = float(np.clip(low.fun / full_spread, 0.0, 1.0))
    hi = float(np.clip(-high.fun / full_spread, 0.0, 1.0))
    return (lo, max(lo, hi))


def check_equivalent(env, theta, tau1, tau2):
    """True iff the two tests are equally theta-discerning."""
    env.type_index(theta)
    if not env.is_binary:
        return (check_discerning(env, theta, tau1, tau2).holds
                and check_discerning(env, theta, tau2, tau1).holds)
    r1, r2 = env.rates(tau1), env.rates(tau2)
    if np.all(np.abs(r1 - r2) <= config.ALGEBRA_TOL):
        return True
    k = env.type_index(theta)
    return bool(_is_minimal(r1, k) and _is_minimal(r2, k))


def _is_minimal(rates, k):
    return np.all(rates[k] <= rates + config.ALGEBRA_TOL)


def most_discerning_tests(env, theta, threads=1):
    """All tests that are at least as theta-discerning as every other test."""
    env.type_index(theta)

    def dominates_all(tau):
        return all(check_discerning(env, theta, tau, psi).holds
                   for psi in env.tests if psi != tau)

    flags = _parallel_map(dominates_all, env.tests, threads)
    return tuple(tau for tau, ok in zip(env.tests, flags) if ok)


def most_discerning_function(env, threads=1):
    """Lowest-index most-discerning test per type, when every type has one."""
    candidates = {theta: most_discerning_tests(env, theta, threads) for theta in env.types}
    failing = tuple(theta for theta in env.types if not candidates[theta])
    if failing:
        logger.info("no most-discerning test for types %s", ", ".join(failing))
        return MostDiscerningSelection(None, failing, candidates)
    selection = {theta: tests[0] for theta, tests in candidates.items()}
    return MostDiscerningSelection(selection, (), candidates)


def relation_table(env, threads=1):
    """Every (type, tau, psi) comparison as plain records."""
    triples = [(theta, tau, psi) for theta in env.types
               for tau in env.tests for psi in env.tests]
    witnesses = _parallel_map(lambda args: check_discerning(env, *args), triples, threads)
    rows = []
    for w in witnesses:
        interval = w.lambda_interval or (None, None)
        rows.append({
            "type": w.theta,
            "tau": w.tau,
            "psi": w.psi,
            "holds": w.holds,
            "lambda_lo": interval[0],
            "lambda_hi": interval[1],
        })
    return rows


def retarget_tests(env, profile, tdhat):
    """Canonical profile that runs tdhat(θ) and converts scores back to the old tests.

    Every test ψ the original testing rule may run after report θ must satisfy
    tdhat(θ) ⪰_θ ψ; the conversion witnessing it feeds the old decision rule.
    """
    if profile.messages != env.types:
        raise ValueError("retargeting needs a direct profile whose messages are the types")
    n_scores = env.scoreset.size
    testing = np.zeros(profile.testing.shape)
    decision = np.array(profile.decision)
    for m, theta in enumerate(env.types):
        try:
            target = str(tdhat[theta])
        except KeyError:
            raise UnknownLabel(f"no test selected for type {theta!r}") from None
        j_hat = env.test_index(target)
        converted = np.zeros((n_scores, len(profile.decisions)))
        for j, psi in enumerate(env.tests):
            weight = profile.testing[m, j]
            if weight <= config.PROFILE_TOL:
                continue
            witness = check_discerning(env, theta, target, psi)
            if not witness.holds:
                raise NotMostDiscerning(
                    f"{target} is not at least as {theta}-discerning as {psi}")
            converted += weight * (witness.conversion.matrix @ profile.decision[m, j])
        converted /= converted.sum(axis=1, keepdims=True)
        testing[m, j_hat] = 1.0
        decision[m, :] = converted
    return FiniteProfile.canonical(env, profile.decisions, testing, decision, profile.utility)


def interval_environment(lo, hi, n, rates, refine_at=None, refine_step=config.REFINE_STEP):
    """Discretize [lo, hi] into n types for passage-rate curves rates[test](θ).

    With refine_at, the focal type and its neighbours refine_at ± refine_step
    are added so the grid constraints approach their pointwise limit there.
    Returns the environment and the label of the focal type.
    """
    grid = np.linspace(lo, hi, n)
    focal = None
    if refine_at is not None:
        extra = [refine_at - refine_step, refine_at, refine_at + refine_step]
        grid = np.concatenate((grid, [x for x in extra if lo <= x <= hi]))
    grid = np.unique(np.round(grid, 14))
    labels = [_grid_label(x) for x in grid]
    table = {tau: [float(curve(x)) for x in grid] for tau, curve in rates.items()}
    env = PassageMatrix.from_rates(labels, tuple(rates), table)
    if refine_at is not None:
        focal = _grid_label(round(refine_at, 14))
    return env, focal


def _grid_label(x):
    return f"{x:.12g}"


def _parallel_map(func, items, threads):
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
